//! Text and vector similarity scores and per-session error rates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;
use crate::transcript::{FlagToken, Utterance};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("BLEU needs a non-empty reference")]
    EmptyReference,
    #[error("cosine of vectors with {0} and {1} entries")]
    Dimension(usize, usize),
    #[error("{q_turns} topical turns but {embeddings} topic embeddings")]
    TopicCount { q_turns: usize, embeddings: usize },
}

/// Turns in a full-length interview.
pub const SESSION_TURNS: usize = 30;
pub const DEFAULT_TAU: f64 = 0.9;

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with clipped n-gram precisions up to order
/// `min(4, |candidate|, |reference|)`, uniform weights, brevity penalty and
/// no smoothing. An empty candidate scores 0.
pub fn bleu<T: AsRef<str>, U: AsRef<str>>(candidate: &[T], reference: &[U]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let order = 4.min(candidate.len()).min(reference.len());
    let mut log_sum = 0.0;
    for n in 1..=order {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let clipped: usize = cand.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum();
        if clipped == 0 {
            return Ok(0.0);
        }
        let total = candidate.len() + 1 - n;
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / order as f64).exp())
}

/// Cosine similarity of two equally sized vectors. A pair containing a zero
/// vector scores 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Dimension(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine with a zero vector; scoring 0");
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine_rows(a: &Matrix, b: &Matrix) -> Result<f64, MetricError> {
    cosine(a.data(), b.data())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    /// Percent of topical questions that repeat an earlier one.
    pub repetition_rate: f64,
    /// Percent of the interview conducted before the first ending turn.
    pub early_ending: f64,
    pub turn_count: usize,
}

/// Repetition rate over topic embeddings: the share (in percent) of topical
/// questions whose embedding has cosine at least `tau` with an earlier one.
pub fn repetition_rate(topics: &[Matrix], tau: f64) -> Result<f64, MetricError> {
    let mut repeats = 0;
    for (j, v) in topics.iter().enumerate() {
        for earlier in &topics[..j] {
            if cosine_rows(v, earlier)? >= tau {
                repeats += 1;
                break;
            }
        }
    }
    Ok(100.0 * repeats as f64 / topics.len().max(1) as f64)
}

/// Percent of a full interview reached when the ending turn (1-based index)
/// occurs; 100 when there is none.
pub fn early_ending(end_turn: Option<usize>) -> f64 {
    end_turn.map_or(100.0, |t| (100.0 * t as f64 / SESSION_TURNS as f64).min(100.0))
}

/// Metrics of a transcript whose turns are numbered from 1. `topics` holds the
/// embedding of each Q-flagged turn, in order.
pub fn session_metrics(transcript: &[Utterance], topics: &[Matrix], tau: f64) -> Result<SessionMetrics, MetricError> {
    let q_turns = transcript.iter().filter(|u| u.flag() == Some(FlagToken::Q)).count();
    if q_turns != topics.len() {
        return Err(MetricError::TopicCount { q_turns, embeddings: topics.len() });
    }
    let end = transcript.iter().position(|u| u.flag() == Some(FlagToken::E)).map(|i| i + 1);
    Ok(SessionMetrics { repetition_rate: repetition_rate(topics, tau)?, early_ending: early_ending(end), turn_count: transcript.len() })
}
