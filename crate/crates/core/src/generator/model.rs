//! Encoder, sliding-window stitching, context summary and decoder.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{GenConfig, GenConfigError};
use super::store::TopicStore;
use crate::nn::layers::sinusoid;
use crate::nn::{CheckpointError, DecoderLayer, FeedForward, Linear, Matrix, ModelCheckpoint, ParamId, ParamStore, ShapeError, Tape, TransformerLayer, Var};
use crate::transcript::{FlagToken, TranscriptError, Utterance};
use crate::vocab::BOS;

pub const CHECKPOINT_KIND: &str = "generator";

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Config(#[from] GenConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] crate::nn::ConfigError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("dialogue {0:?} has unflagged utterances; run the flag-annotation pass (`annotate_flags`) first")]
    NoFlags(String),
    #[error("topic embedding needs a Q-flagged utterance (got {0:?})")]
    NotTopical(Option<FlagToken>),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
}

static TRUNCATED: AtomicUsize = AtomicUsize::new(0);

/// Utterances cut to the window limit since start-up.
pub fn truncation_count() -> usize {
    TRUNCATED.load(Ordering::Relaxed)
}

/// Stitches an encoding of `ids` into an `(n + m) x d` matrix using `encode`
/// for each pass. Inputs up to `n` are encoded once; longer inputs (up to
/// `n + m`) are encoded as tokens `0..n` and `m..len`, with the overlapping
/// rows averaged. Longer inputs are cut to `n + m`.
pub fn window_encode_with(
    t: &mut Tape,
    ids: &[usize],
    n: usize,
    m: usize,
    d: usize,
    mut encode: impl FnMut(&mut Tape, &[usize]) -> Result<Var, ShapeError>,
) -> Result<Var, ShapeError> {
    let block = n + m;
    let ids = if ids.len() > block {
        TRUNCATED.fetch_add(1, Ordering::Relaxed);
        log::warn!("utterance of {} tokens cut to {block}", ids.len());
        &ids[..block]
    } else {
        ids
    };
    let len = ids.len();
    let mut parts = Vec::with_capacity(4);
    if len <= n {
        if len > 0 {
            parts.push(encode(t, ids)?);
        }
    } else {
        let first = encode(t, &ids[..n])?;
        let second = encode(t, &ids[m..])?;
        let overlap = n - m;
        parts.push(t.slice_rows(first, 0, m)?);
        let a = t.slice_rows(first, m, overlap)?;
        let b = t.slice_rows(second, 0, overlap)?;
        let sum = t.add(a, b)?;
        parts.push(t.scale(sum, 0.5));
        parts.push(t.slice_rows(second, overlap, len - n)?);
    }
    if len < block {
        parts.push(t.constant(Matrix::zeros(block - len, d)));
    }
    t.concat_rows(&parts)
}

/// Stacks the last `k` windowed embeddings, earliest first, with zero
/// blocks in front for missing history.
pub fn build_context(t: &mut Tape, history: &[Var], k: usize, block: usize, d: usize) -> Result<Var, ShapeError> {
    let recent = &history[history.len().saturating_sub(k)..];
    if k == 0 {
        return Ok(t.constant(Matrix::zeros(0, d)));
    }
    let mut parts = Vec::with_capacity(k);
    if recent.len() < k {
        parts.push(t.constant(Matrix::zeros((k - recent.len()) * block, d)));
    }
    parts.extend_from_slice(recent);
    t.concat_rows(&parts)
}

/// Summary of stacked topic and context rows: `A = softmax_cols(X W + B)`,
/// `S = Aᵀ X`. Returns `(A, S)`.
pub fn context_summary(t: &mut Tape, v: Var, c: Var, w: Var, bias: Var) -> Result<(Var, Var), ShapeError> {
    let x = t.concat_rows(&[v, c])?;
    let scores = t.matmul(x, w)?;
    let scores = t.add(scores, bias)?;
    let a = t.softmax_cols(scores);
    let at = t.transpose(a);
    let s = t.matmul(at, x)?;
    Ok((a, s))
}

/// Plain-matrix form of the summary for a given score matrix.
pub fn summary_from_scores(x: &Matrix, scores: &Matrix) -> Result<(Matrix, Matrix), ShapeError> {
    if scores.rows() != x.rows() {
        return Err(ShapeError::Mismatch { op: "context_summary", left: x.shape(), right: scores.shape() });
    }
    let a = scores.softmax_columns();
    let s = a.transpose().matmul(x)?;
    Ok((a, s))
}

#[derive(Debug, Clone)]
pub struct GeneratorModel {
    pub config: GenConfig,
    pub store: ParamStore,
    embed: ParamId,
    encoder: Vec<TransformerLayer>,
    topic_ff: FeedForward,
    score_w: ParamId,
    score_b: ParamId,
    decoder: Vec<DecoderLayer>,
    output: Linear,
}

/// Encoder input for an utterance: its flag symbol (if any) then its tokens.
pub(crate) fn flagged_ids(config: &GenConfig, u: &Utterance) -> Vec<usize> {
    let mut ids = Vec::with_capacity(u.len() + 1);
    if let Some(f) = u.flag() {
        ids.push(config.vocab.flag_id(f));
    }
    ids.extend(u.tokens().iter().map(|t| config.vocab.id(t)));
    ids
}

impl GeneratorModel {
    pub fn new(config: GenConfig, seed: u64) -> Result<Self, GeneratorError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.d;
        let embed = store.add_uniform("embed", config.vocab.len(), d, 1.0, &mut rng);
        let encoder = (0..config.encoder_layers).map(|i| TransformerLayer::new(&mut store, &format!("enc{i}"), d, &mut rng)).collect();
        let topic_ff = FeedForward::new(&mut store, "topic_ff", d, 2 * d, &mut rng);
        let score_w = store.add_xavier("summary.w", d, config.n, &mut rng);
        let score_b = store.add_zeros("summary.b", config.h + config.context_rows(), config.n);
        let decoder = (0..config.decoder_layers).map(|i| DecoderLayer::new(&mut store, &format!("dec{i}"), d, &mut rng)).collect();
        let output = Linear::new(&mut store, "output", d, config.vocab.len(), &mut rng);
        Ok(GeneratorModel { config, store, embed, encoder, topic_ff, score_w, score_b, decoder, output })
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        let config = serde_json::to_value(&self.config).expect("config serialises");
        ModelCheckpoint::capture(CHECKPOINT_KIND, config, &self.store)
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self, GeneratorError> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let config: GenConfig = serde_json::from_value(ckpt.config.clone()).map_err(CheckpointError::from)?;
        let mut model = Self::new(config, 0)?;
        ckpt.restore_into(&mut model.store)?;
        Ok(model)
    }

    /// One encoder pass; positions restart at zero for every pass.
    pub(crate) fn encode(&self, t: &mut Tape, ids: &[usize]) -> Result<Var, ShapeError> {
        let table = t.param(self.embed);
        let x = t.gather(table, ids)?;
        let pos = t.constant(sinusoid(ids.len(), self.config.d, 0));
        let mut h = t.add(x, pos)?;
        for layer in &self.encoder {
            h = layer.forward(t, h)?;
        }
        Ok(h)
    }

    /// `(n + m) x d` embedding of an utterance's flag and tokens.
    pub(crate) fn window(&self, t: &mut Tape, ids: &[usize]) -> Result<Var, ShapeError> {
        let c = &self.config;
        if c.windowing {
            window_encode_with(t, ids, c.n, c.m, c.d, |t, part| self.encode(t, part))
        } else {
            let cut = &ids[..ids.len().min(c.n)];
            window_encode_with(t, cut, c.n, c.m, c.d, |t, part| self.encode(t, part))
        }
    }

    pub(crate) fn topic_vector(&self, t: &mut Tape, u: &Utterance) -> Result<Var, ShapeError> {
        let ids: Vec<usize> = u.tokens().iter().take(self.config.n).map(|tok| self.config.vocab.id(tok)).collect();
        let h = self.encode(t, &ids)?;
        let pooled = t.mean_rows(h);
        self.topic_ff.forward(t, pooled)
    }

    /// Topic rows: stored vectors then zero padding, or all zeros when the
    /// store is disabled.
    pub(crate) fn topic_rows(&self, t: &mut Tape, topics: &[Var]) -> Result<Var, ShapeError> {
        let (h, d) = (self.config.h, self.config.d);
        if !self.config.topic_store || topics.is_empty() {
            return Ok(t.constant(Matrix::zeros(h, d)));
        }
        let recent = &topics[topics.len().saturating_sub(h)..];
        let mut parts = recent.to_vec();
        if recent.len() < h {
            parts.push(t.constant(Matrix::zeros(h - recent.len(), d)));
        }
        t.concat_rows(&parts)
    }

    pub(crate) fn summary(&self, t: &mut Tape, topics: Var, history: &[Var]) -> Result<Var, ShapeError> {
        let c = &self.config;
        let ctx = build_context(t, history, c.k, c.block(), c.d)?;
        let w = t.param(self.score_w);
        let b = t.param(self.score_b);
        Ok(context_summary(t, topics, ctx, w, b)?.1)
    }

    /// Decoder logits for every position of `input` (`[bos, flag, tokens..]`).
    pub(crate) fn decode(&self, t: &mut Tape, input: &[usize], summary: Var) -> Result<Var, ShapeError> {
        let table = t.param(self.embed);
        let x = t.gather(table, input)?;
        let pos = t.constant(sinusoid(input.len(), self.config.d, 0));
        let mut h = t.add(x, pos)?;
        for layer in &self.decoder {
            h = layer.forward(t, h, summary)?;
        }
        self.output.forward(t, h)
    }

    pub(crate) fn bos(&self) -> usize {
        self.config.vocab.id(BOS)
    }

    /// Windowed embedding of an utterance (flag symbol first), as a plain matrix.
    pub fn window_encode(&self, u: &Utterance) -> Result<Matrix, GeneratorError> {
        self.window_encode_ids(&flagged_ids(&self.config, u))
    }

    pub fn window_encode_ids(&self, ids: &[usize]) -> Result<Matrix, GeneratorError> {
        let mut t = Tape::new(&self.store);
        let v = self.window(&mut t, ids)?;
        Ok(t.value(v).clone())
    }

    /// Single encoder pass over raw ids.
    pub fn encode_ids(&self, ids: &[usize]) -> Result<Matrix, GeneratorError> {
        let mut t = Tape::new(&self.store);
        let v = self.encode(&mut t, ids)?;
        Ok(t.value(v).clone())
    }

    /// Abstract embedding of a topical question.
    pub fn topic_embed(&self, u: &Utterance) -> Result<Matrix, GeneratorError> {
        if u.flag() != Some(FlagToken::Q) {
            return Err(GeneratorError::NotTopical(u.flag()));
        }
        let mut t = Tape::new(&self.store);
        let v = self.topic_vector(&mut t, u)?;
        Ok(t.value(v).clone())
    }

    /// Mean-pooled encoder output of an utterance's tokens.
    pub fn utterance_embedding(&self, u: &Utterance) -> Result<Matrix, GeneratorError> {
        let ids: Vec<usize> = u.tokens().iter().take(self.config.n).map(|tok| self.config.vocab.id(tok)).collect();
        Ok(self.encode_ids(&ids)?.mean_rows())
    }

    /// Summary matrix for a history and topic store.
    pub fn context_summary(&self, history: &[Utterance], store: &TopicStore) -> Result<Matrix, GeneratorError> {
        let mut t = Tape::new(&self.store);
        let wins = self.history_windows(&mut t, history)?;
        let v = if self.config.topic_store { t.constant(store.matrix()) } else { t.constant(Matrix::zeros(self.config.h, self.config.d)) };
        let s = self.summary(&mut t, v, &wins)?;
        Ok(t.value(s).clone())
    }

    pub(crate) fn history_windows(&self, t: &mut Tape, history: &[Utterance]) -> Result<Vec<Var>, ShapeError> {
        let recent = &history[history.len().saturating_sub(self.config.k)..];
        recent.iter().map(|u| self.window(t, &flagged_ids(&self.config, u))).collect()
    }

    /// Teacher-forced loss of one interviewer turn given its history and the
    /// topical questions asked before it. Records onto `t`, which may be built
    /// over a copy of this model's parameters.
    pub fn turn_loss(&self, t: &mut Tape, history: &[Utterance], topics: &[Utterance], turn: &Utterance) -> Result<Var, GeneratorError> {
        let flag = turn.flag().ok_or_else(|| GeneratorError::NoFlags(turn.text()))?;
        let wins = self.history_windows(t, history)?;
        let vecs = if self.config.topic_store {
            topics.iter().map(|u| self.topic_vector(t, u)).collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        let v = self.topic_rows(t, &vecs)?;
        let s = self.summary(t, v, &wins)?;
        let ids: Vec<usize> = turn.tokens().iter().map(|tok| self.config.vocab.id(tok)).collect();
        let (input, target) = super::train::decoder_io(self, flag, &ids);
        let logits = self.decode(t, &input, s)?;
        Ok(t.cross_entropy(logits, &target)?)
    }

    pub fn param_store(&self) -> &ParamStore {
        &self.store
    }
}
