use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::Vocab;

#[derive(Debug, Error, PartialEq)]
pub enum GenConfigError {
    #[error("window sizes must satisfy overlap < stride < n (n={n}, m={m})")]
    Window { n: usize, m: usize },
    #[error("topic capacity must be at least 1")]
    Capacity,
    #[error("embedding width must be even and positive (got {0})")]
    Width(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Encoder window length.
    pub n: usize,
    /// Window stride; the overlap is `n - m`.
    pub m: usize,
    /// Previous utterances stacked into the context matrix.
    pub k: usize,
    /// Topic store capacity.
    pub h: usize,
    pub d: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Two-pass encoding of utterances longer than `n`. When off, input is
    /// cut at `n`.
    pub windowing: bool,
    /// Topic store in the context summary. When off, its rows stay zero.
    pub topic_store: bool,
    pub vocab: Vocab,
}

impl GenConfig {
    pub fn new(vocab: Vocab) -> Self {
        GenConfig { n: 128, m: 100, k: 2, h: 16, d: 64, encoder_layers: 2, decoder_layers: 2, windowing: true, topic_store: true, vocab }
    }

    /// A small configuration for quick experiments and tests.
    pub fn desk(vocab: Vocab) -> Self {
        GenConfig { n: 16, m: 12, d: 32, encoder_layers: 1, decoder_layers: 1, ..Self::new(vocab) }
    }

    pub fn overlap(&self) -> usize {
        self.n - self.m
    }

    /// Rows of one windowed embedding.
    pub fn block(&self) -> usize {
        self.n + self.m
    }

    /// Rows of the context matrix.
    pub fn context_rows(&self) -> usize {
        self.k * self.block()
    }

    pub fn validate(&self) -> Result<(), GenConfigError> {
        if !(self.m < self.n && self.n - self.m < self.m) {
            return Err(GenConfigError::Window { n: self.n, m: self.m });
        }
        if self.h == 0 {
            return Err(GenConfigError::Capacity);
        }
        if self.d == 0 || self.d % 2 == 1 {
            return Err(GenConfigError::Width(self.d));
        }
        Ok(())
    }

    /// The three ablation settings: no windowing and no store, windowing
    /// only, both.
    pub fn degraded(&self, windowing: bool, topic_store: bool) -> Self {
        GenConfig { windowing, topic_store, ..self.clone() }
    }
}
