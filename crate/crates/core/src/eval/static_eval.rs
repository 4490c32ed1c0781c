//! Turn-by-turn comparison of generated and human interviewer utterances.

use serde::{Deserialize, Serialize};

use super::metrics::{bleu, cosine_rows};
use super::EvalError;
use crate::generator::{generate_turn, Decode, GeneratorModel, TopicStore};
use crate::nn::Matrix;
use crate::par::{self, Execution};
use crate::transcript::{Corpus, Dialogue, FlagToken, SpeakerId, Utterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnScore {
    pub dialogue: String,
    /// Position of the interviewer turn in its dialogue (from 0).
    pub index: usize,
    pub bleu: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEvalResult {
    pub avg_bleu: f64,
    pub avg_cosine: f64,
    pub turns: Vec<TurnScore>,
}

/// Scores `generate(dialogue, i)` against every interviewer turn `i`, with
/// BLEU over tokens and cosine over `embed`.
pub fn static_eval_with<G, E>(corpus: &Corpus, generate: G, embed: E, exec: Execution) -> Result<StaticEvalResult, EvalError>
where
    G: Fn(&Dialogue, usize) -> Result<Utterance, EvalError> + Sync + Send,
    E: Fn(&Utterance) -> Result<Matrix, EvalError> + Sync + Send,
{
    let jobs: Vec<(usize, usize)> = corpus
        .dialogues()
        .iter()
        .enumerate()
        .flat_map(|(d, dl)| dl.utterances().iter().enumerate().filter(|(_, u)| u.speaker() == SpeakerId::S1).map(move |(i, _)| (d, i)))
        .collect();
    let scored = par::map_indexed(exec, &jobs, |_, &(d, i)| -> Result<TurnScore, EvalError> {
        let dialogue = &corpus.dialogues()[d];
        let gold = &dialogue.utterances()[i];
        let out = generate(dialogue, i)?;
        Ok(TurnScore {
            dialogue: dialogue.id().to_string(),
            index: i,
            bleu: bleu(out.tokens(), gold.tokens())?,
            cosine: cosine_rows(&embed(&out)?, &embed(gold)?)?,
        })
    });
    let turns = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n = turns.len().max(1) as f64;
    Ok(StaticEvalResult {
        avg_bleu: turns.iter().map(|t| t.bleu).sum::<f64>() / n,
        avg_cosine: turns.iter().map(|t| t.cosine).sum::<f64>() / n,
        turns,
    })
}

/// Greedy generation of each interviewer turn from the turns before it and
/// the gold topical questions asked so far; cosine over mean-pooled encoder
/// outputs of the model.
pub fn static_eval(model: &GeneratorModel, corpus: &Corpus, exec: Execution) -> Result<StaticEvalResult, EvalError> {
    static_eval_with(
        corpus,
        |dialogue, i| {
            let before = &dialogue.utterances()[..i];
            let mut store = TopicStore::new(model.config.h, model.config.d);
            for u in before.iter().filter(|u| u.flag() == Some(FlagToken::Q)) {
                store.push(model.topic_embed(u)?, u.text());
            }
            Ok(generate_turn(model, before, &mut store, Decode::Greedy)?.utterance)
        },
        |u| Ok(model.utterance_embedding(u)?),
        exec,
    )
}
