//! Two-speaker transcript data model, tokenizer and corpus file I/O.

mod io;
mod stats;
mod tokenize;

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{parse_corpus, CorpusError, read_corpus, save_corpus, write_corpus, DialogueRecord, UtteranceRecord};
pub use stats::{corpus_stats, CorpusStats};
pub use tokenize::{detokenize, tokenize};

/// Maximum number of annotated topical questions per dialogue.
pub const MAX_TOPIC_QUESTIONS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("utterance has no tokens")]
    EmptyUtterance,
    #[error("flag {0} is only valid on interviewer (S1) utterances")]
    FlagOnInterviewee(FlagToken),
    #[error("dialogue has no utterances")]
    EmptyDialogue,
    #[error("topic_questions exceeds {MAX_TOPIC_QUESTIONS} (got {0})")]
    TooManyTopics(usize),
    #[error("duplicate dialogue id {0:?}")]
    DuplicateId(String),
    #[error("token {0:?} is empty or contains whitespace")]
    BadToken(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeakerId {
    /// Interviewer.
    S1,
    /// Interviewee.
    S2,
}

impl SpeakerId {
    pub fn other(self) -> Self {
        match self {
            SpeakerId::S1 => SpeakerId::S2,
            SpeakerId::S2 => SpeakerId::S1,
        }
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeakerId::S1 => "S1",
            SpeakerId::S2 => "S2",
        })
    }
}

/// Leading control symbol of a generated turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlagToken {
    /// Opening interviewer utterance.
    B,
    /// Closing interviewer utterance.
    E,
    /// Interviewer utterance carrying a topical question.
    Q,
    S1,
    S2,
}

impl FlagToken {
    pub const ALL: [FlagToken; 5] = [FlagToken::B, FlagToken::E, FlagToken::Q, FlagToken::S1, FlagToken::S2];

    /// B, E and Q can only mark interviewer turns.
    pub fn interviewer_only(self) -> bool {
        matches!(self, FlagToken::B | FlagToken::E | FlagToken::Q)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FlagToken::B => "B",
            FlagToken::E => "E",
            FlagToken::Q => "Q",
            FlagToken::S1 => "S1",
            FlagToken::S2 => "S2",
        }
    }
}

impl fmt::Display for FlagToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single non-empty, whitespace-free surface token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self, TranscriptError> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(TranscriptError::BadToken(surface));
        }
        Ok(Token(surface))
    }

    pub(crate) fn new_unchecked(surface: String) -> Self {
        debug_assert!(!surface.is_empty());
        Token(surface)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Token {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    speaker: SpeakerId,
    tokens: Vec<Token>,
    flag: Option<FlagToken>,
    is_topical: bool,
}

impl Utterance {
    pub fn new(
        speaker: SpeakerId,
        tokens: Vec<Token>,
        flag: Option<FlagToken>,
        is_topical: bool,
    ) -> Result<Self, TranscriptError> {
        if tokens.is_empty() {
            return Err(TranscriptError::EmptyUtterance);
        }
        if let Some(flag) = flag {
            if flag.interviewer_only() && speaker != SpeakerId::S1 {
                return Err(TranscriptError::FlagOnInterviewee(flag));
            }
        }
        Ok(Utterance { speaker, tokens, flag, is_topical })
    }

    /// Tokenizes `text` into a plain utterance.
    pub fn from_text(speaker: SpeakerId, text: &str) -> Result<Self, TranscriptError> {
        Self::new(speaker, tokenize(text), None, false)
    }

    pub fn speaker(&self) -> SpeakerId {
        self.speaker
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn flag(&self) -> Option<FlagToken> {
        self.flag
    }

    pub fn is_topical(&self) -> bool {
        self.is_topical
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }

    /// Returns a copy with a different speaker. Fails if the flag would become illegal.
    pub fn with_speaker(&self, speaker: SpeakerId) -> Result<Self, TranscriptError> {
        Self::new(speaker, self.tokens.clone(), self.flag, self.is_topical)
    }

    pub fn with_flag(&self, flag: Option<FlagToken>) -> Result<Self, TranscriptError> {
        Self::new(self.speaker, self.tokens.clone(), flag, self.is_topical)
    }

    pub fn with_topical(mut self, is_topical: bool) -> Self {
        self.is_topical = is_topical;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    id: String,
    utterances: Vec<Utterance>,
    topic_questions: Vec<String>,
}

impl Dialogue {
    pub fn new(
        id: impl Into<String>,
        utterances: Vec<Utterance>,
        topic_questions: Vec<String>,
    ) -> Result<Self, TranscriptError> {
        if utterances.is_empty() {
            return Err(TranscriptError::EmptyDialogue);
        }
        if topic_questions.len() > MAX_TOPIC_QUESTIONS {
            return Err(TranscriptError::TooManyTopics(topic_questions.len()));
        }
        Ok(Dialogue { id: id.into(), utterances, topic_questions })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn topic_questions(&self) -> &[String] {
        &self.topic_questions
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// All tokens of the dialogue in order.
    pub fn token_stream(&self) -> impl Iterator<Item = &Token> {
        self.utterances.iter().flat_map(|u| u.tokens.iter())
    }

    pub fn with_utterances(&self, utterances: Vec<Utterance>) -> Result<Self, TranscriptError> {
        Self::new(self.id.clone(), utterances, self.topic_questions.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    #[default]
    Trn,
    Dev,
    Tst,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    dialogues: Vec<Dialogue>,
    split: Split,
}

impl Corpus {
    pub fn new(dialogues: Vec<Dialogue>, split: Split) -> Result<Self, TranscriptError> {
        let mut seen = std::collections::HashSet::new();
        for d in &dialogues {
            if !seen.insert(d.id.as_str()) {
                return Err(TranscriptError::DuplicateId(d.id.clone()));
            }
        }
        Ok(Corpus { dialogues, split })
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn into_dialogues(self) -> Vec<Dialogue> {
        self.dialogues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interviewer_flags_rejected_on_s2() {
        let toks = tokenize("Sure .");
        assert_eq!(
            Utterance::new(SpeakerId::S2, toks.clone(), Some(FlagToken::Q), false),
            Err(TranscriptError::FlagOnInterviewee(FlagToken::Q))
        );
        assert!(Utterance::new(SpeakerId::S2, toks, Some(FlagToken::S2), false).is_ok());
    }

    #[test]
    fn empty_utterance_rejected() {
        assert_eq!(Utterance::from_text(SpeakerId::S1, "  "), Err(TranscriptError::EmptyUtterance));
    }

    #[test]
    fn topic_cap() {
        let u = Utterance::from_text(SpeakerId::S1, "hi").unwrap();
        let qs: Vec<String> = (0..17).map(|i| format!("q{i}")).collect();
        assert_eq!(Dialogue::new("d", vec![u], qs), Err(TranscriptError::TooManyTopics(17)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let u = Utterance::from_text(SpeakerId::S1, "hi").unwrap();
        let d = Dialogue::new("x", vec![u], vec![]).unwrap();
        assert!(matches!(
            Corpus::new(vec![d.clone(), d], Split::Trn),
            Err(TranscriptError::DuplicateId(_))
        ));
    }

    #[test]
    fn bad_token() {
        assert!(Token::new("a b").is_err());
        assert!(Token::new("").is_err());
        assert!(Token::new("ok").is_ok());
    }
}
