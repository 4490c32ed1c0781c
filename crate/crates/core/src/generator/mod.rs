//! Interview turn generation: sliding-window encoding of long utterances,
//! attention over recent context and stored topics, and a small decoder.

mod config;
mod flags;
mod generate;
mod model;
mod store;
mod train;

pub use config::{GenConfig, GenConfigError};
pub use flags::{annotate_flags, contains_topic_question, is_flagged};
pub use generate::{generate_turn, Decode, GeneratedTurn};
pub use model::{
    build_context, context_summary, summary_from_scores, truncation_count, window_encode_with, GeneratorError, GeneratorModel,
    CHECKPOINT_KIND,
};
pub use store::{TopicEntry, TopicStore};
pub use train::{dialogue_gradients, fit_generator, teacher_forced_accuracy, train_generator, GenTrainReport};
