//! Per-token boundary supervision and the labels file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{Corpus, Dialogue, SpeakerId, Utterance};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("labels for {count} dialogues but corpus has {expected}")]
    DialogueCount { count: usize, expected: usize },
    #[error("dialogue {id:?}: {message}")]
    Misaligned { id: String, message: String },
}

/// Which tokens of an utterance carry label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelScheme {
    /// Last two tokens before a speaker switch.
    #[default]
    LastTwo,
    /// Only the last token before a speaker switch.
    LastOne,
    /// Every token labeled with its speaker (S1 = 0, S2 = 1).
    Speaker,
}

impl LabelScheme {
    /// Number of trailing positions that mark an utterance's own end.
    pub fn tail_width(self, len: usize) -> usize {
        match self {
            LabelScheme::LastTwo => len.min(2),
            LabelScheme::LastOne => len.min(1),
            LabelScheme::Speaker => 0,
        }
    }

    /// Whether `labels` contains a boundary strictly inside the utterance.
    pub fn has_internal_boundary(self, labels: &[u8]) -> bool {
        match self {
            LabelScheme::Speaker => labels.windows(2).any(|w| w[0] != w[1]),
            _ => {
                let tail = self.tail_width(labels.len());
                labels[..labels.len() - tail].iter().any(|&l| l == 1)
            }
        }
    }
}

/// Labels aligned to the tokens of each utterance of one dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryLabels {
    pub utterances: Vec<Vec<u8>>,
}

impl BoundaryLabels {
    pub fn check_aligned(&self, dialogue: &Dialogue) -> Result<(), LabelError> {
        let misaligned = |message| LabelError::Misaligned { id: dialogue.id().to_string(), message };
        if self.utterances.len() != dialogue.len() {
            return Err(misaligned(format!(
                "{} label rows for {} utterances",
                self.utterances.len(),
                dialogue.len()
            )));
        }
        for (i, (labels, u)) in self.utterances.iter().zip(dialogue.utterances()).enumerate() {
            if labels.len() != u.len() {
                return Err(misaligned(format!("utterance {i}: {} labels for {} tokens", labels.len(), u.len())));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(misaligned(format!("utterance {i}: labels must be 0 or 1")));
            }
        }
        Ok(())
    }

    pub fn token_count(&self) -> usize {
        self.utterances.iter().map(Vec::len).sum()
    }
}

fn utterance_labels(u: &Utterance, next: Option<SpeakerId>, scheme: LabelScheme) -> Vec<u8> {
    let len = u.len();
    if scheme == LabelScheme::Speaker {
        let bit = u8::from(u.speaker() == SpeakerId::S2);
        return vec![bit; len];
    }
    let mut labels = vec![0u8; len];
    if next.is_some_and(|s| s != u.speaker()) {
        for l in &mut labels[len - scheme.tail_width(len)..] {
            *l = 1;
        }
    }
    labels
}

/// Reference labels of a clean dialogue under `scheme`: an utterance followed
/// by a different speaker gets its tail labeled; the final utterance is all zeros.
pub fn label_with(dialogue: &Dialogue, scheme: LabelScheme) -> BoundaryLabels {
    let utts = dialogue.utterances();
    let utterances = utts
        .iter()
        .enumerate()
        .map(|(i, u)| utterance_labels(u, utts.get(i + 1).map(Utterance::speaker), scheme))
        .collect();
    BoundaryLabels { utterances }
}

/// [`label_with`] under the default last-two-tokens scheme.
pub fn label_clean(dialogue: &Dialogue) -> BoundaryLabels {
    label_with(dialogue, LabelScheme::LastTwo)
}

pub fn check_corpus_alignment(corpus: &Corpus, labels: &[BoundaryLabels]) -> Result<(), LabelError> {
    if labels.len() != corpus.len() {
        return Err(LabelError::DialogueCount { count: labels.len(), expected: corpus.len() });
    }
    corpus.dialogues().iter().zip(labels).try_for_each(|(d, l)| l.check_aligned(d))
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    id: String,
    labels: Vec<Vec<u8>>,
}

pub fn write_labels<W: Write>(corpus: &Corpus, labels: &[BoundaryLabels], mut writer: W) -> std::io::Result<()> {
    for (d, l) in corpus.dialogues().iter().zip(labels) {
        let rec = LabelRecord { id: d.id().to_string(), labels: l.utterances.clone() };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_labels(corpus: &Corpus, labels: &[BoundaryLabels], path: impl AsRef<Path>) -> Result<(), LabelError> {
    let path = path.as_ref();
    let io_err = |source| LabelError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    write_labels(corpus, labels, BufWriter::new(file)).map_err(io_err)
}

/// Reads a labels file and orders it to match `corpus` by dialogue id.
pub fn read_labels<R: BufRead>(corpus: &Corpus, reader: R) -> Result<Vec<BoundaryLabels>, LabelError> {
    let mut by_id = std::collections::HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let parse = |message: String| LabelError::Parse { line: idx + 1, message };
        let line = line.map_err(|e| parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        by_id.insert(rec.id, BoundaryLabels { utterances: rec.labels });
    }
    if by_id.len() != corpus.len() {
        return Err(LabelError::DialogueCount { count: by_id.len(), expected: corpus.len() });
    }
    let labels = corpus
        .dialogues()
        .iter()
        .map(|d| {
            by_id.remove(d.id()).ok_or_else(|| LabelError::Misaligned {
                id: d.id().to_string(),
                message: "no labels for dialogue".into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_corpus_alignment(corpus, &labels)?;
    Ok(labels)
}

pub fn load_labels(corpus: &Corpus, path: impl AsRef<Path>) -> Result<Vec<BoundaryLabels>, LabelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LabelError::Io { path: path.display().to_string(), source })?;
    read_labels(corpus, BufReader::new(file))
}
