use serde::{Deserialize, Serialize};

use super::model::{DiarizerError, DiarizerModel};
use crate::annotate::{check_corpus_alignment, BoundaryLabels, FillerLexicon};
use crate::par::{self, Execution};
use crate::transcript::{Corpus, Dialogue};

/// Probability of label 1 for every token of a dialogue.
pub trait BoundaryScorer: Sync {
    fn boundary_probs(&self, dialogue: &Dialogue) -> Result<Vec<Vec<f64>>, DiarizerError>;
}

impl BoundaryScorer for DiarizerModel {
    fn boundary_probs(&self, dialogue: &Dialogue) -> Result<Vec<Vec<f64>>, DiarizerError> {
        Ok(self.predict_dialogue(dialogue)?.iter().map(|p| p.boundary_probs()).collect())
    }
}

/// Replays gold labels as certain predictions, looked up by dialogue id.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    labels: std::collections::HashMap<String, BoundaryLabels>,
}

impl OracleScorer {
    pub fn new(corpus: &Corpus, labels: &[BoundaryLabels]) -> Self {
        let labels = corpus.dialogues().iter().zip(labels).map(|(d, l)| (d.id().to_string(), l.clone())).collect();
        OracleScorer { labels }
    }
}

impl BoundaryScorer for OracleScorer {
    fn boundary_probs(&self, dialogue: &Dialogue) -> Result<Vec<Vec<f64>>, DiarizerError> {
        Ok(match self.labels.get(dialogue.id()) {
            Some(l) => l.utterances.iter().map(|u| u.iter().map(|&x| f64::from(x)).collect()).collect(),
            None => dialogue.utterances().iter().map(|u| vec![0.0; u.len()]).collect(),
        })
    }
}

/// Predicts a boundary at every filler-lexicon token.
#[derive(Debug, Clone, Default)]
pub struct FillerHeuristic {
    pub lexicon: FillerLexicon,
}

impl BoundaryScorer for FillerHeuristic {
    fn boundary_probs(&self, dialogue: &Dialogue) -> Result<Vec<Vec<f64>>, DiarizerError> {
        Ok(dialogue
            .utterances()
            .iter()
            .map(|u| u.tokens().iter().map(|t| if self.lexicon.contains(t) { 1.0 } else { 0.0 }).collect())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl F1Score {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        F1Score { precision, recall, f1, true_positives: tp, false_positives: fp, false_negatives: fn_ }
    }
}

/// Micro-averaged scores for label 1, given predicted and gold 0/1 sequences.
pub fn f1_of_label_one<'a>(pairs: impl IntoIterator<Item = (&'a [u8], &'a [u8])>) -> F1Score {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (pred, gold) in pairs {
        for (&p, &g) in pred.iter().zip(gold) {
            match (p, g) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                _ => {}
            }
        }
    }
    F1Score::from_counts(tp, fp, fn_)
}

/// Argmax decisions; a probability of exactly one half counts as label 1.
pub fn decide(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

pub fn evaluate_f1(
    scorer: &dyn BoundaryScorer,
    corpus: &Corpus,
    gold: &[BoundaryLabels],
    exec: Execution,
) -> Result<F1Score, DiarizerError> {
    check_corpus_alignment(corpus, gold)?;
    let preds = par::map_indexed(exec, corpus.dialogues(), |_, d| scorer.boundary_probs(d));
    let mut decided: Vec<Vec<u8>> = Vec::new();
    let mut golds: Vec<&[u8]> = Vec::new();
    for (p, g) in preds.into_iter().zip(gold) {
        for (u, gl) in p?.iter().zip(&g.utterances) {
            decided.push(decide(u));
            golds.push(gl);
        }
    }
    Ok(f1_of_label_one(decided.iter().map(Vec::as_slice).zip(golds)))
}
