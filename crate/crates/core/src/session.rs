//! Live interview sessions: a human posts replies, the generator answers,
//! and the session ends on an ending turn or at the turn cap.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{session_metrics, SessionMetrics, SESSION_TURNS};
use crate::generator::{generate_turn, Decode, GeneratorError, GeneratorModel, TopicStore};
use crate::transcript::{
    tokenize, write_corpus, Corpus, Dialogue, FlagToken, SpeakerId, Split, TranscriptError, Utterance, UtteranceRecord,
    MAX_TOPIC_QUESTIONS,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no session with id {0:?}")]
    NotFound(String),
    #[error("session {0:?} has ended")]
    Ended(String),
    #[error("utterance text is empty")]
    EmptyText,
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("metrics: {0}")]
    Metrics(#[from] crate::eval::MetricError),
    #[error("transcript log: {0}")]
    Log(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    EndedByE,
    EndedByCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    /// Absent when the human's reply filled the last turn.
    pub bot_text: Option<String>,
    pub flag: Option<FlagToken>,
    pub topics_snapshot: Vec<String>,
    /// Index (from 1) of the latest turn in the session.
    pub turn_index: usize,
    pub session_status: SessionStatus,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    history: Vec<Utterance>,
    store: TopicStore,
    topics: Vec<crate::nn::Matrix>,
    status: SessionStatus,
    decode: Decode,
    created_at: f64,
    updated_at: f64,
}

impl Session {
    /// Creates a session and generates its opening turn.
    pub fn start(id: impl Into<String>, model: &GeneratorModel, decode: Decode) -> Result<(Self, TurnResponse), SessionError> {
        let t = now();
        let mut s = Session {
            id: id.into(),
            history: Vec::new(),
            store: TopicStore::new(model.config.h, model.config.d),
            topics: Vec::new(),
            status: SessionStatus::Active,
            decode,
            created_at: t,
            updated_at: t,
        };
        let first = s.bot_turn(model)?;
        Ok((s, first))
    }

    fn bot_turn(&mut self, model: &GeneratorModel) -> Result<TurnResponse, SessionError> {
        let turn = generate_turn(model, &self.history, &mut self.store, self.decode)?;
        if turn.stored_topic {
            let v = self.store.entries().last().expect("just pushed").vector.clone();
            self.topics.push(v);
        }
        let text = turn.utterance.text();
        self.history.push(turn.utterance);
        if turn.flag == FlagToken::E {
            self.status = SessionStatus::EndedByE;
        } else if self.history.len() >= SESSION_TURNS {
            self.status = SessionStatus::EndedByCap;
        }
        self.updated_at = now();
        Ok(self.response(Some(text), Some(turn.flag)))
    }

    fn response(&self, bot_text: Option<String>, flag: Option<FlagToken>) -> TurnResponse {
        TurnResponse {
            bot_text,
            flag,
            topics_snapshot: self.store.source_texts(),
            turn_index: self.history.len(),
            session_status: self.status,
        }
    }

    /// Appends the human's reply and, unless that fills the last turn, the
    /// generator's answer.
    pub fn post(&mut self, model: &GeneratorModel, text: &str) -> Result<TurnResponse, SessionError> {
        if self.status != SessionStatus::Active {
            return Err(SessionError::Ended(self.id.clone()));
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(SessionError::EmptyText);
        }
        self.history.push(Utterance::new(SpeakerId::S2, tokens, Some(FlagToken::S2), false)?);
        self.updated_at = now();
        if self.history.len() >= SESSION_TURNS {
            self.status = SessionStatus::EndedByCap;
            return Ok(self.response(None, None));
        }
        self.bot_turn(model)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn turn_count(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[Utterance] {
        &self.history
    }

    pub fn store(&self) -> &TopicStore {
        &self.store
    }

    /// Embeddings of every topical question asked, in order, including ones
    /// since evicted from the store.
    pub fn topic_history(&self) -> &[crate::nn::Matrix] {
        &self.topics
    }

    pub fn created_at(&self) -> f64 {
        self.created_at
    }

    pub fn updated_at(&self) -> f64 {
        self.updated_at
    }

    pub fn metrics(&self, tau: f64) -> Result<SessionMetrics, SessionError> {
        Ok(session_metrics(&self.history, &self.topics, tau)?)
    }

    /// The session as a dialogue; its topical questions become the
    /// dialogue's topic list (at most the first 16).
    pub fn to_dialogue(&self) -> Result<Dialogue, SessionError> {
        let questions = self
            .history
            .iter()
            .filter(|u| u.flag() == Some(FlagToken::Q))
            .take(MAX_TOPIC_QUESTIONS)
            .map(Utterance::text)
            .collect();
        Ok(Dialogue::new(self.id.clone(), self.history.clone(), questions)?)
    }

    /// One corpus-file line holding the whole transcript.
    pub fn export(&self) -> Result<String, SessionError> {
        let corpus = Corpus::new(vec![self.to_dialogue()?], Split::Tst)?;
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf)?;
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub turn_count: usize,
    pub status: SessionStatus,
    pub created_at: f64,
    pub updated_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub index: usize,
    #[serde(flatten)]
    pub record: UtteranceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptView {
    pub id: String,
    pub status: SessionStatus,
    pub turns: Vec<TranscriptTurn>,
    pub topics: Vec<String>,
    /// Present once the session has ended.
    pub metrics: Option<SessionMetrics>,
    /// The transcript as a corpus-file line.
    pub export: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub decode: Decode,
    pub tau: f64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions { decode: Decode::Greedy, tau: crate::eval::DEFAULT_TAU }
    }
}

/// Registry of live sessions over one shared model. Each session sits behind
/// its own lock, so posts to one session run one at a time while other
/// sessions proceed.
pub struct SessionManager {
    model: Arc<GeneratorModel>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    options: SessionOptions,
    log_dir: Option<PathBuf>,
}

impl SessionManager {
    pub fn new(model: Arc<GeneratorModel>, options: SessionOptions) -> Self {
        SessionManager { model, sessions: RwLock::new(BTreeMap::new()), options, log_dir: None }
    }

    /// Appends every turn of every session to `<dir>/<id>.jsonl`.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.log_dir = Some(dir.into());
        self
    }

    pub fn model(&self) -> &GeneratorModel {
        &self.model
    }

    pub fn options(&self) -> SessionOptions {
        self.options
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions.read().expect("registry lock").get(id).cloned().ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    fn log(&self, session: &Session, from: usize) -> Result<(), SessionError> {
        let Some(dir) = &self.log_dir else { return Ok(()) };
        let mut file: File = OpenOptions::new().create(true).append(true).open(dir.join(format!("{}.jsonl", session.id)))?;
        for (i, u) in session.history.iter().enumerate().skip(from) {
            let turn = TranscriptTurn { index: i + 1, record: record_of(u) };
            writeln!(file, "{}", serde_json::to_string(&turn).expect("turn serialises"))?;
        }
        Ok(())
    }

    /// Starts a session, optionally overriding the decode mode.
    pub fn create(&self, decode: Option<Decode>) -> Result<(String, TurnResponse), SessionError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let (session, first) = Session::start(id.clone(), &self.model, decode.unwrap_or(self.options.decode))?;
        self.log(&session, 0)?;
        self.sessions.write().expect("registry lock").insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, first))
    }

    pub fn post(&self, id: &str, text: &str) -> Result<TurnResponse, SessionError> {
        let cell = self.get(id)?;
        let mut session = cell.lock().expect("session lock");
        let before = session.turn_count();
        let resp = session.post(&self.model, text)?;
        self.log(&session, before)?;
        Ok(resp)
    }

    pub fn transcript(&self, id: &str) -> Result<TranscriptView, SessionError> {
        let cell = self.get(id)?;
        let session = cell.lock().expect("session lock");
        let metrics = match session.status {
            SessionStatus::Active => None,
            _ => Some(session.metrics(self.options.tau)?),
        };
        Ok(TranscriptView {
            id: session.id.clone(),
            status: session.status,
            turns: session.history.iter().enumerate().map(|(i, u)| TranscriptTurn { index: i + 1, record: record_of(u) }).collect(),
            topics: session.store.source_texts(),
            metrics,
            export: session.export()?,
        })
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let cells: Vec<_> = self.sessions.read().expect("registry lock").values().cloned().collect();
        cells
            .iter()
            .map(|c| {
                let s = c.lock().expect("session lock");
                SessionSummary { id: s.id.clone(), turn_count: s.turn_count(), status: s.status, created_at: s.created_at, updated_at: s.updated_at }
            })
            .collect()
    }

    pub fn delete(&self, id: &str) -> Result<(), SessionError> {
        self.sessions.write().expect("registry lock").remove(id).map(|_| ()).ok_or_else(|| SessionError::NotFound(id.to_string()))
    }
}

fn record_of(u: &Utterance) -> UtteranceRecord {
    UtteranceRecord { speaker: u.speaker(), text: u.text(), flag: u.flag(), is_topical: u.is_topical() }
}
