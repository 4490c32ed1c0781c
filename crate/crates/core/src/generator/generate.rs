//! Constrained autoregressive decoding of one interviewer turn.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{flagged_ids, GeneratorError, GeneratorModel};
use super::store::TopicStore;
use crate::nn::{Matrix, Tape};
use crate::par::sub_seed;
use crate::transcript::{FlagToken, SpeakerId, Token, Utterance};
use crate::vocab::EOS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Decode {
    #[default]
    Greedy,
    /// Samples from the softmax; the stream for a turn is derived from the
    /// seed and the history length.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTurn {
    pub flag: FlagToken,
    pub utterance: Utterance,
    /// Whether the turn was a topical question and went into the store.
    pub stored_topic: bool,
}

fn pick(logits: &[f64], allowed: &[bool], rng: Option<&mut ChaCha8Rng>) -> usize {
    let max = logits.iter().zip(allowed).filter(|(_, &a)| a).map(|(&l, _)| l).fold(f64::NEG_INFINITY, f64::max);
    match rng {
        None => {
            // First maximum wins ties, so greedy output is stable.
            let mut best = None;
            for (i, (&l, &a)) in logits.iter().zip(allowed).enumerate() {
                if a && best.map_or(true, |(_, b)| l > b) {
                    best = Some((i, l));
                }
            }
            best.expect("at least one allowed symbol").0
        }
        Some(rng) => {
            let weights: Vec<f64> = logits.iter().zip(allowed).map(|(&l, &a)| if a { (l - max).exp() } else { 0.0 }).collect();
            WeightedIndex::new(&weights).expect("allowed symbols have positive weight").sample(rng)
        }
    }
}

/// Generates the next interviewer turn after `history`. The first symbol is a
/// flag: B when the history is empty, otherwise one of E, Q, S1. A Q turn is
/// embedded and pushed into `store`.
pub fn generate_turn(model: &GeneratorModel, history: &[Utterance], store: &mut TopicStore, decode: Decode) -> Result<GeneratedTurn, GeneratorError> {
    let cfg = &model.config;
    let vocab = &cfg.vocab;
    let mut rng = match decode {
        Decode::Greedy => None,
        Decode::Sampled { seed } => Some(ChaCha8Rng::seed_from_u64(sub_seed(seed, history.len() as u64))),
    };
    let mut t = Tape::new(&model.store);
    let windows = history[history.len().saturating_sub(cfg.k)..]
        .iter()
        .map(|u| model.window(&mut t, &flagged_ids(cfg, u)))
        .collect::<Result<Vec<_>, _>>()?;
    let v = if cfg.topic_store { t.constant(store.matrix()) } else { t.constant(Matrix::zeros(cfg.h, cfg.d)) };
    let s = model.summary(&mut t, v, &windows)?;

    let mut flag_allowed = vec![false; vocab.len()];
    let flags: &[FlagToken] = if history.is_empty() { &[FlagToken::B] } else { &[FlagToken::E, FlagToken::Q, FlagToken::S1] };
    for &f in flags {
        flag_allowed[vocab.flag_id(f)] = true;
    }
    let eos = vocab.id(EOS);
    let mut token_allowed: Vec<bool> = (0..vocab.len()).map(|i| !vocab.is_special(i)).collect();
    token_allowed[eos] = true;
    let mut first_token_allowed = token_allowed.clone();
    first_token_allowed[eos] = false;

    let mut input = vec![model.bos()];
    let mut flag = None;
    let mut tokens = Vec::new();
    while tokens.len() < cfg.n {
        let logits = model.decode(&mut t, &input, s)?;
        let m = t.value(logits);
        let last = m.row(m.rows() - 1).to_vec();
        let allowed = match (flag, tokens.is_empty()) {
            (None, _) => &flag_allowed,
            (Some(_), true) => &first_token_allowed,
            (Some(_), false) => &token_allowed,
        };
        let next = pick(&last, allowed, rng.as_mut());
        if flag.is_none() {
            flag = vocab.flag_of(next);
        } else if next == eos {
            break;
        } else {
            tokens.push(Token::new(vocab.symbol(next))?);
        }
        input.push(next);
    }
    let flag = flag.expect("flag chosen at the first step");
    let topical = flag == FlagToken::Q;
    let utterance = Utterance::new(SpeakerId::S1, tokens, Some(flag), topical)?;
    if topical {
        let vec = model.topic_embed(&utterance)?;
        store.push(vec, utterance.text());
    }
    Ok(GeneratedTurn { flag, utterance, stored_topic: topical })
}
