use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{DiarizerConfig, DiarizerError, DiarizerModel, Variant};
use crate::annotate::{check_corpus_alignment, BoundaryLabels};
use crate::nn::{Optimizer, ParamGrads, ShapeError, Tape, TrainConfig, Var};
use crate::par::{self, Execution};
use crate::transcript::{Corpus, Dialogue};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-dialogue loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Token cross-entropy over the whole dialogue, plus the utterance-level
/// cross-entropy for the joint variant (equal weights).
pub(crate) fn dialogue_loss(
    model: &DiarizerModel,
    t: &mut Tape,
    dialogue: &Dialogue,
    labels: &BoundaryLabels,
    dropout_seed: Option<u64>,
) -> Result<Var, ShapeError> {
    let g = model.build(t, dialogue, dialogue.len(), dropout_seed)?;
    let limit = model.config.max_len.max(1);
    let targets: Vec<usize> = labels.utterances.iter().flat_map(|l| l.iter().take(limit).map(|&x| usize::from(x))).collect();
    let all = t.concat_rows(&g.token_logits)?;
    let mut loss = t.cross_entropy(all, &targets)?;
    if model.config.variant == Variant::Joint {
        let rows: Vec<Var> = g.utterance_logits.iter().flatten().copied().collect();
        let gold: Vec<usize> = labels.utterances.iter().map(|l| usize::from(model.config.scheme.has_internal_boundary(l))).collect();
        let stacked = t.concat_rows(&rows)?;
        let u = t.cross_entropy(stacked, &gold)?;
        loss = t.add(loss, u)?;
    }
    Ok(loss)
}

/// Loss and gradients of one dialogue, without dropout.
pub fn dialogue_gradients(model: &DiarizerModel, dialogue: &Dialogue, labels: &BoundaryLabels) -> Result<(f64, ParamGrads), DiarizerError> {
    gradients_with(model, dialogue, labels, None)
}

fn gradients_with(model: &DiarizerModel, dialogue: &Dialogue, labels: &BoundaryLabels, dropout_seed: Option<u64>) -> Result<(f64, ParamGrads), DiarizerError> {
    let mut t = Tape::new(&model.store);
    let loss = dialogue_loss(model, &mut t, dialogue, labels, dropout_seed)?;
    let value = t.scalar(loss);
    Ok((value, t.backward(loss).into_param_grads()))
}

/// The training loss without dropout, recorded on a caller's tape so it can
/// be checked against finite differences.
pub fn dialogue_loss_on(model: &DiarizerModel, t: &mut Tape, dialogue: &Dialogue, labels: &BoundaryLabels) -> Result<Var, DiarizerError> {
    Ok(dialogue_loss(model, t, dialogue, labels, None)?)
}

/// Scalar training loss of one dialogue.
pub fn dialogue_loss_value(model: &DiarizerModel, dialogue: &Dialogue, labels: &BoundaryLabels) -> Result<f64, DiarizerError> {
    let mut t = Tape::new(&model.store);
    let loss = dialogue_loss(model, &mut t, dialogue, labels, None)?;
    Ok(t.scalar(loss))
}

/// Runs `train.epochs` epochs on an existing model. Gradients of a batch are
/// computed per dialogue (in parallel when `exec` allows) and summed in
/// batch order, so results do not depend on the execution mode.
pub fn fit(
    model: &mut DiarizerModel,
    corpus: &Corpus,
    labels: &[BoundaryLabels],
    train: &TrainConfig,
    exec: Execution,
) -> Result<TrainReport, DiarizerError> {
    train.validate()?;
    check_corpus_alignment(corpus, labels)?;
    if corpus.is_empty() {
        return Err(DiarizerError::EmptyCorpus);
    }
    let dialogues = corpus.dialogues();
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x5eed);
    let mut opt = Optimizer::from_config(train);
    let mut order: Vec<usize> = (0..dialogues.len()).collect();
    let mut epoch_losses = Vec::with_capacity(train.epochs);
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(train.batch_size) {
            let seeds: Vec<(usize, u64)> = batch.iter().map(|&i| (i, rng.gen())).collect();
            let results = par::map_indexed(exec, &seeds, |_, &(i, seed)| gradients_with(model, &dialogues[i], &labels[i], Some(seed)));
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
        let mean = total / dialogues.len() as f64;
        log::info!("diarizer epoch {} loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(TrainReport { epoch_losses })
}

/// Builds a fresh model seeded from `train.seed` and trains it.
pub fn train_diarizer(
    corpus: &Corpus,
    labels: &[BoundaryLabels],
    config: DiarizerConfig,
    train: &TrainConfig,
    exec: Execution,
) -> Result<(DiarizerModel, TrainReport), DiarizerError> {
    train.validate()?;
    check_corpus_alignment(corpus, labels)?;
    let mut model = DiarizerModel::new(config, train.seed);
    let report = fit(&mut model, corpus, labels, train, exec)?;
    Ok((model, report))
}
