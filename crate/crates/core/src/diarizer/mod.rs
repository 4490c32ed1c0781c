//! Detecting and repairing speaker-diarization errors in transcripts.

mod eval;
mod model;
mod repair;
mod train;

pub use eval::{decide, evaluate_f1, f1_of_label_one, BoundaryScorer, F1Score, FillerHeuristic, OracleScorer};
pub use model::{truncation_count, DiarizerConfig, DiarizerError, DiarizerModel, DiarizerPrediction, UtteranceEncoding, Variant, CHECKPOINT_KIND};
pub use repair::{repair, repair_with_probs, split_points, DEFAULT_THRESHOLD};
pub use train::{dialogue_gradients, dialogue_loss_on, dialogue_loss_value, fit, train_diarizer, TrainReport};
