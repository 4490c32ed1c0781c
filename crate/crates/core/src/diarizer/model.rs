//! The boundary classifier: a token encoder, an utterance-level layer over
//! recent utterance embeddings, and softmax heads.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::LabelScheme;
use crate::nn::layers::{sinusoid, two_ended_positions};
use crate::nn::{CheckpointError, Linear, Matrix, ModelCheckpoint, ParamId, ParamStore, ShapeError, Tape, TransformerLayer, Var};
use crate::transcript::{Corpus, Dialogue, Utterance};
use crate::vocab::{Vocab, UTT};

pub const CHECKPOINT_KIND: &str = "diarizer";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Context,
    #[default]
    Joint,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "context" => Ok(Variant::Context),
            "joint" => Ok(Variant::Joint),
            other => Err(format!("unknown variant {other:?} (expected baseline, context or joint)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiarizerConfig {
    /// Number of previous utterances the context layer sees.
    pub k: usize,
    pub d: usize,
    pub layers: usize,
    pub variant: Variant,
    /// Longest utterance (in tokens) fed to the encoder; longer ones are cut.
    pub max_len: usize,
    pub scheme: LabelScheme,
    /// Dropout rate on the context row during training.
    #[serde(default)]
    pub context_dropout: f64,
    pub vocab: Vocab,
}

impl DiarizerConfig {
    pub fn new(vocab: Vocab) -> Self {
        DiarizerConfig { k: 5, d: 64, layers: 2, variant: Variant::Joint, max_len: 128, scheme: LabelScheme::LastTwo, context_dropout: 0.5, vocab }
    }

    pub fn for_corpus(corpus: &Corpus) -> Self {
        Self::new(Vocab::build(corpus))
    }
}

#[derive(Debug, Error)]
pub enum DiarizerError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Labels(#[from] crate::annotate::LabelError),
    #[error("invalid training config: {0}")]
    Config(#[from] crate::nn::ConfigError),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("repair produced an invalid dialogue: {0}")]
    Repair(String),
    #[error("utterance index {index} out of range for {len} utterances")]
    Index { index: usize, len: usize },
}

/// Probabilities for one utterance: `[p(0), p(1)]` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiarizerPrediction {
    /// Utterance-level error probability; only the joint variant has one.
    pub utterance: Option<[f64; 2]>,
    pub tokens: Vec<[f64; 2]>,
}

impl DiarizerPrediction {
    pub fn boundary_probs(&self) -> Vec<f64> {
        self.tokens.iter().map(|p| p[1]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceEncoding {
    pub special: Matrix,
    pub per_token: Matrix,
}

/// Graph handles for one dialogue: the utterance summary row, per-token
/// rows and head logits of every utterance.
pub(crate) struct DialogueGraph {
    pub token_logits: Vec<Var>,
    pub utterance_logits: Vec<Option<Var>>,
}

#[derive(Debug, Clone)]
pub struct DiarizerModel {
    pub config: DiarizerConfig,
    pub store: ParamStore,
    embed: ParamId,
    encoder: Vec<TransformerLayer>,
    context: TransformerLayer,
    token_head: Linear,
    utterance_head: Option<Linear>,
}

static TRUNCATED: AtomicUsize = AtomicUsize::new(0);

/// Utterances cut to the encoder's maximum length since start-up.
pub fn truncation_count() -> usize {
    TRUNCATED.load(Ordering::Relaxed)
}

impl DiarizerModel {
    pub fn new(config: DiarizerConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.d;
        let embed = store.add_uniform("embed", config.vocab.len(), d, 1.0, &mut rng);
        let encoder = (0..config.layers).map(|i| TransformerLayer::new(&mut store, &format!("enc{i}"), d, &mut rng)).collect();
        let context = TransformerLayer::new(&mut store, "context", d, &mut rng);
        let head_in = if config.variant == Variant::Baseline { d } else { 2 * d };
        let token_head = Linear::zeroed(&mut store, "token_head", head_in, 2);
        let utterance_head = (config.variant == Variant::Joint).then(|| Linear::zeroed(&mut store, "utterance_head", 2 * d, 2));
        DiarizerModel { config, store, embed, encoder, context, token_head, utterance_head }
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        let config = serde_json::to_value(&self.config).expect("config serialises");
        ModelCheckpoint::capture(CHECKPOINT_KIND, config, &self.store)
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self, DiarizerError> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let config: DiarizerConfig = serde_json::from_value(ckpt.config.clone()).map_err(CheckpointError::from)?;
        let mut model = Self::new(config, 0);
        ckpt.restore_into(&mut model.store)?;
        Ok(model)
    }

    fn token_ids(&self, u: &Utterance) -> Vec<usize> {
        let limit = self.config.max_len.max(1);
        if u.len() > limit {
            TRUNCATED.fetch_add(1, Ordering::Relaxed);
            log::warn!("utterance of {} tokens cut to {limit}", u.len());
        }
        let mut ids = vec![self.config.vocab.id(UTT)];
        ids.extend(u.tokens().iter().take(limit).map(|t| self.config.vocab.id(t)));
        ids
    }

    /// Encoder output: row 0 summarises the utterance, rows 1.. are tokens.
    pub(crate) fn encode(&self, t: &mut Tape, u: &Utterance) -> Result<Var, ShapeError> {
        let ids = self.token_ids(u);
        let table = t.param(self.embed);
        let x = t.gather(table, &ids)?;
        let pos = t.constant(two_ended_positions(ids.len(), self.config.d));
        let mut h = t.add(x, pos)?;
        for layer in &self.encoder {
            h = layer.forward(t, h)?;
        }
        Ok(h)
    }

    /// Context row from the summary rows of the preceding utterances.
    pub(crate) fn context_row(&self, t: &mut Tape, previous: &[Var]) -> Result<Var, ShapeError> {
        let k = self.config.k;
        let recent = &previous[previous.len().saturating_sub(k)..];
        if recent.is_empty() {
            return Ok(t.constant(Matrix::zeros(1, self.config.d)));
        }
        let stacked = t.concat_rows(recent)?;
        let pos = t.constant(sinusoid(recent.len(), self.config.d, 0));
        let h = t.add(stacked, pos)?;
        let h = self.context.forward(t, h)?;
        Ok(t.mean_rows(h))
    }

    /// Graph for the first `upto` utterances. With `dropout_seed`, context rows
    /// get inverted dropout at `config.context_dropout`.
    pub(crate) fn build(&self, t: &mut Tape, dialogue: &Dialogue, upto: usize, dropout_seed: Option<u64>) -> Result<DialogueGraph, ShapeError> {
        let rate = self.config.context_dropout;
        let mut dropout = dropout_seed.filter(|_| rate > 0.0).map(ChaCha8Rng::seed_from_u64);
        let mut specials = Vec::new();
        let mut token_logits = Vec::new();
        let mut utterance_logits = Vec::new();
        for u in &dialogue.utterances()[..upto] {
            let enc = self.encode(t, u)?;
            let rows = t.shape(enc).0;
            let special = t.slice_rows(enc, 0, 1)?;
            let tokens = t.slice_rows(enc, 1, rows - 1)?;
            let (tok_in, utt) = match self.config.variant {
                Variant::Baseline => (tokens, None),
                variant => {
                    let mut ctx = self.context_row(t, &specials)?;
                    if let Some(rng) = dropout.as_mut() {
                        let keep = 1.0 / (1.0 - rate);
                        let mask = Matrix::from_fn(1, self.config.d, |_, _| if rng.gen::<f64>() < rate { 0.0 } else { keep });
                        let mask = t.constant(mask);
                        ctx = t.mul(ctx, mask)?;
                    }
                    let rep = t.repeat_rows(ctx, rows - 1)?;
                    let tok_in = t.concat_cols(rep, tokens)?;
                    let utt = match (variant, &self.utterance_head) {
                        (Variant::Joint, Some(head)) => {
                            let both = t.concat_cols(ctx, special)?;
                            Some(head.forward(t, both)?)
                        }
                        _ => None,
                    };
                    (tok_in, utt)
                }
            };
            token_logits.push(self.token_head.forward(t, tok_in)?);
            utterance_logits.push(utt);
            specials.push(special);
        }
        Ok(DialogueGraph { token_logits, utterance_logits })
    }

    /// Predictions for every utterance of a dialogue.
    pub fn predict_dialogue(&self, dialogue: &Dialogue) -> Result<Vec<DiarizerPrediction>, DiarizerError> {
        let mut t = Tape::new(&self.store);
        let g = self.build(&mut t, dialogue, dialogue.len(), None)?;
        let pair = |m: &Matrix, r: usize| [m.get(r, 0), m.get(r, 1)];
        let mut out = Vec::with_capacity(dialogue.len());
        for (u, (tok, utt)) in dialogue.utterances().iter().zip(g.token_logits.iter().zip(&g.utterance_logits)) {
            let probs = t.value(*tok).softmax_rows();
            let mut tokens: Vec<[f64; 2]> = (0..probs.rows()).map(|r| pair(&probs, r)).collect();
            // Tokens past the encoder limit get no evidence either way.
            tokens.resize(u.len(), [0.5, 0.5]);
            let utterance = utt.map(|v| pair(&t.value(v).softmax_rows(), 0));
            out.push(DiarizerPrediction { utterance, tokens });
        }
        Ok(out)
    }

    /// Prediction for utterance `i`, using only the utterances up to it.
    pub fn predict(&self, dialogue: &Dialogue, i: usize) -> Result<DiarizerPrediction, DiarizerError> {
        if i >= dialogue.len() {
            return Err(DiarizerError::Index { index: i, len: dialogue.len() });
        }
        let prefix = dialogue.with_utterances(dialogue.utterances()[..=i].to_vec()).expect("prefix of a valid dialogue");
        Ok(self.predict_dialogue(&prefix)?.pop().expect("non-empty prefix"))
    }

    pub fn encode_utterance(&self, u: &Utterance) -> Result<UtteranceEncoding, DiarizerError> {
        let mut t = Tape::new(&self.store);
        let enc = self.encode(&mut t, u)?;
        let m = t.value(enc);
        Ok(UtteranceEncoding { special: m.slice_rows(0, 1), per_token: m.slice_rows(1, m.rows() - 1) })
    }

    /// Context row for a list of previous utterance summary rows.
    pub fn context_embed(&self, previous: &[Matrix]) -> Result<Matrix, DiarizerError> {
        let mut t = Tape::new(&self.store);
        let vars: Vec<Var> = previous.iter().map(|m| t.constant(m.clone())).collect();
        let v = self.context_row(&mut t, &vars)?;
        Ok(t.value(v).clone())
    }
}
