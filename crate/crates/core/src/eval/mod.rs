//! Static and session-level evaluation of the generator.

mod ablation;
mod metrics;
mod static_eval;

use thiserror::Error;

pub use ablation::{ablation_run, scripted_session, AblationReport, AblationRow};
pub use metrics::{
    bleu, cosine, cosine_rows, early_ending, repetition_rate, session_metrics, MetricError, SessionMetrics, DEFAULT_TAU,
    SESSION_TURNS,
};
pub use static_eval::{static_eval, static_eval_with, StaticEvalResult, TurnScore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Generator(#[from] crate::generator::GeneratorError),
    #[error(transparent)]
    Session(#[from] Box<crate::session::SessionError>),
    #[error("the scripted interviewee needs at least one reply")]
    NoReplies,
}

impl From<crate::session::SessionError> for EvalError {
    fn from(e: crate::session::SessionError) -> Self {
        EvalError::Session(Box::new(e))
    }
}
