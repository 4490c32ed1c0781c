//! Line-delimited JSON dialogue files: one dialogue record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{tokenize, Corpus, Dialogue, FlagToken, SpeakerId, Split, TranscriptError, Utterance};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {field}: {source}")]
    Invalid {
        line: usize,
        field: &'static str,
        #[source]
        source: TranscriptError,
    },
    #[error("corpus: {0}")]
    Corpus(#[from] TranscriptError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub speaker: SpeakerId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<FlagToken>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_topical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub utterances: Vec<UtteranceRecord>,
    #[serde(default)]
    pub topic_questions: Vec<String>,
}

impl DialogueRecord {
    pub fn from_dialogue(dialogue: &Dialogue, split: Option<Split>) -> Self {
        DialogueRecord {
            id: dialogue.id().to_string(),
            split,
            utterances: dialogue
                .utterances()
                .iter()
                .map(|u| UtteranceRecord {
                    speaker: u.speaker(),
                    text: u.text(),
                    flag: u.flag(),
                    is_topical: u.is_topical(),
                })
                .collect(),
            topic_questions: dialogue.topic_questions().to_vec(),
        }
    }

    fn into_dialogue(self, line: usize) -> Result<Dialogue, CorpusError> {
        let invalid = |field, source| CorpusError::Invalid { line, field, source };
        let utterances = self
            .utterances
            .into_iter()
            .map(|u| Utterance::new(u.speaker, tokenize(&u.text), u.flag, u.is_topical))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid("utterances", e))?;
        Dialogue::new(self.id, utterances, self.topic_questions).map_err(|e| match e {
            TranscriptError::TooManyTopics(_) => invalid("topic_questions", e),
            _ => invalid("utterances", e),
        })
    }
}

/// Reads a corpus from line-delimited records. Blank lines are skipped.
/// The corpus split is taken from the first record carrying one (default TRN).
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut dialogues = Vec::new();
    let mut split = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        if split.is_none() {
            split = record.split;
        }
        dialogues.push(record.into_dialogue(line_no)?);
    }
    Ok(Corpus::new(dialogues, split.unwrap_or_default())?)
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> std::io::Result<()> {
    for d in corpus.dialogues() {
        let record = DialogueRecord::from_dialogue(d, Some(corpus.split()));
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    write_corpus(corpus, BufWriter::new(file)).map_err(io_err)
}
