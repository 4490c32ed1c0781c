use serde::{Deserialize, Serialize};

use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub vector: Matrix,
    pub source_text: String,
}

/// Fixed-capacity memory of topical questions, oldest first. When full, a
/// push evicts the oldest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStore {
    capacity: usize,
    d: usize,
    entries: Vec<TopicEntry>,
}

impl TopicStore {
    pub fn new(capacity: usize, d: usize) -> Self {
        TopicStore { capacity: capacity.max(1), d, entries: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TopicEntry] {
        &self.entries
    }

    pub fn source_texts(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.source_text.clone()).collect()
    }

    /// Appends a `1 x d` vector; returns the evicted entry, if any.
    pub fn push(&mut self, vector: Matrix, source_text: impl Into<String>) -> Option<TopicEntry> {
        assert_eq!(vector.shape(), (1, self.d), "topic vector must be 1 x {}", self.d);
        let evicted = (self.entries.len() == self.capacity).then(|| self.entries.remove(0));
        self.entries.push(TopicEntry { vector, source_text: source_text.into() });
        evicted
    }

    /// `capacity x d`: entry rows first, zero rows after.
    pub fn matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.capacity, self.d);
        for (r, e) in self.entries.iter().enumerate() {
            m.row_mut(r).copy_from_slice(e.vector.row(0));
        }
        m
    }
}
