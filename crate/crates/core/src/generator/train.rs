//! Teacher-forced training with the topic store replayed in gold order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::GenConfig;
use super::flags::is_flagged;
use super::model::{flagged_ids, GeneratorError, GeneratorModel};
use crate::nn::{Optimizer, ParamGrads, ShapeError, Tape, TrainConfig, Var};
use crate::par::{self, Execution};
use crate::transcript::{Corpus, Dialogue, FlagToken, SpeakerId};
use crate::vocab::EOS;

#[derive(Debug, Clone, PartialEq)]
pub struct GenTrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Decoder input and target ids for one interviewer turn.
pub(crate) fn decoder_io(model: &GeneratorModel, flag: FlagToken, tokens: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let cfg = &model.config;
    let flag = cfg.vocab.flag_id(flag);
    let body = &tokens[..tokens.len().min(cfg.n)];
    let mut input = vec![model.bos(), flag];
    input.extend_from_slice(body);
    let mut target = vec![flag];
    target.extend_from_slice(body);
    target.push(cfg.vocab.id(EOS));
    (input, target)
}

/// Logits and targets for every interviewer turn of a dialogue, on one tape.
/// Windows and topic vectors are computed once per utterance.
fn dialogue_graph(model: &GeneratorModel, t: &mut Tape, dialogue: &Dialogue) -> Result<(Vec<Var>, Vec<usize>), ShapeError> {
    let cfg = &model.config;
    let mut windows: Vec<Var> = Vec::with_capacity(dialogue.len());
    let mut topics: Vec<Var> = Vec::new();
    let mut logits = Vec::new();
    let mut targets = Vec::new();
    for u in dialogue.utterances() {
        if u.speaker() == SpeakerId::S1 {
            let flag = u.flag().expect("flagged dialogue");
            let v = model.topic_rows(t, &topics)?;
            let s = model.summary(t, v, &windows)?;
            let ids: Vec<usize> = u.tokens().iter().map(|tok| cfg.vocab.id(tok)).collect();
            let (input, target) = decoder_io(model, flag, &ids);
            logits.push(model.decode(t, &input, s)?);
            targets.extend(target);
            if flag == FlagToken::Q && cfg.topic_store {
                topics.push(model.topic_vector(t, u)?);
            }
        }
        if cfg.k > 0 {
            windows.push(model.window(t, &flagged_ids(cfg, u))?);
        }
    }
    Ok((logits, targets))
}

fn check_flags(dialogue: &Dialogue) -> Result<(), GeneratorError> {
    if is_flagged(dialogue) {
        Ok(())
    } else {
        Err(GeneratorError::NoFlags(dialogue.id().to_string()))
    }
}

/// Mean token cross-entropy over a dialogue's interviewer turns, with
/// parameter gradients.
pub fn dialogue_gradients(model: &GeneratorModel, dialogue: &Dialogue) -> Result<(f64, ParamGrads), GeneratorError> {
    check_flags(dialogue)?;
    let mut t = Tape::new(&model.store);
    let (logits, targets) = dialogue_graph(model, &mut t, dialogue)?;
    if logits.is_empty() {
        return Ok((0.0, ParamGrads::empty(model.store.len())));
    }
    let all = t.concat_rows(&logits)?;
    let loss = t.cross_entropy(all, &targets)?;
    let value = t.scalar(loss);
    Ok((value, t.backward(loss).into_param_grads()))
}

/// Fraction of decoder targets (flags, tokens, end marker) predicted exactly
/// by argmax under teacher forcing.
pub fn teacher_forced_accuracy(model: &GeneratorModel, corpus: &Corpus, exec: Execution) -> Result<f64, GeneratorError> {
    let per: Vec<Result<(usize, usize), GeneratorError>> = par::map_indexed(exec, corpus.dialogues(), |_, d| {
        check_flags(d)?;
        let mut t = Tape::new(&model.store);
        let (logits, targets) = dialogue_graph(model, &mut t, d)?;
        let mut hits = 0;
        let mut row = 0;
        for l in logits {
            let m = t.value(l);
            for r in 0..m.rows() {
                let best = (0..m.cols()).max_by(|&a, &b| m.get(r, a).total_cmp(&m.get(r, b))).unwrap_or(0);
                hits += usize::from(best == targets[row]);
                row += 1;
            }
        }
        Ok((hits, row))
    });
    let (mut hits, mut total) = (0, 0);
    for p in per {
        let (h, n) = p?;
        hits += h;
        total += n;
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// Trains `model` in place; dialogues of a batch are processed in parallel
/// and their gradients merged in index order.
pub fn fit_generator(model: &mut GeneratorModel, corpus: &Corpus, train: &TrainConfig, exec: Execution) -> Result<GenTrainReport, GeneratorError> {
    train.validate()?;
    if corpus.is_empty() {
        return Err(GeneratorError::EmptyCorpus);
    }
    corpus.dialogues().iter().try_for_each(check_flags)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x5eed);
    let mut opt = Optimizer::from_config(train);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(train.epochs);
    for _ in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(train.batch_size) {
            let model_ref: &GeneratorModel = model;
            let results = par::map_indexed(exec, batch, |_, &i| dialogue_gradients(model_ref, &corpus.dialogues()[i]));
            let mut grads = ParamGrads::empty(model.store.len());
            for r in results {
                let (loss, g) = r?;
                total += loss;
                grads.merge(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            model.store.accumulate(&grads);
            opt.step(&mut model.store);
        }
        epoch_losses.push(total / corpus.len() as f64);
    }
    Ok(GenTrainReport { epoch_losses })
}

pub fn train_generator(corpus: &Corpus, config: GenConfig, train: &TrainConfig, exec: Execution) -> Result<(GeneratorModel, GenTrainReport), GeneratorError> {
    let mut model = GeneratorModel::new(config, train.seed)?;
    let report = fit_generator(&mut model, corpus, train, exec)?;
    Ok((model, report))
}
