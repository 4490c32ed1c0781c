//! Scripted sessions against several models and their averaged error rates.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::generator::{Decode, GeneratorModel};
use crate::par::{self, sub_seed, Execution};
use crate::session::{Session, SessionStatus};

/// Runs one session in which the interviewee answers with `replies` in
/// order, cycling, until the session ends.
pub fn scripted_session(model: &GeneratorModel, replies: &[String], decode: Decode) -> Result<Session, EvalError> {
    if replies.is_empty() {
        return Err(EvalError::NoReplies);
    }
    let (mut session, _) = Session::start("scripted", model, decode)?;
    let mut next = replies.iter().cycle();
    while session.status() == SessionStatus::Active {
        session.post(model, next.next().expect("cycle is endless"))?;
    }
    Ok(session)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub repetition_rate: f64,
    pub early_ending: f64,
    pub mean_turns: f64,
    pub per_session: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub sessions: usize,
    pub seed: u64,
    pub tau: f64,
    pub rows: Vec<AblationRow>,
}

/// `sessions` scripted sessions per model with sampled decoding. Session `i`
/// uses the same seed for every model, so rows differ only by model.
pub fn ablation_run(
    models: &[(&str, &GeneratorModel)],
    sessions: usize,
    replies: &[String],
    seed: u64,
    tau: f64,
    exec: Execution,
) -> Result<AblationReport, EvalError> {
    let mut rows = Vec::with_capacity(models.len());
    for (name, model) in models {
        let runs = par::map_range(exec, sessions, |i| -> Result<(f64, f64, usize), EvalError> {
            let s = scripted_session(model, replies, Decode::Sampled { seed: sub_seed(seed, i as u64) })?;
            let m = s.metrics(tau)?;
            Ok((m.repetition_rate, m.early_ending, m.turn_count))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        let n = runs.len().max(1) as f64;
        rows.push(AblationRow {
            model: name.to_string(),
            repetition_rate: runs.iter().map(|r| r.0).sum::<f64>() / n,
            early_ending: runs.iter().map(|r| r.1).sum::<f64>() / n,
            mean_turns: runs.iter().map(|r| r.2 as f64).sum::<f64>() / n,
            per_session: runs.iter().map(|r| [r.0, r.1]).collect(),
        });
    }
    Ok(AblationReport { sessions, seed, tau, rows })
}

impl AblationReport {
    /// Plain-text table; off-topic rates are not automated and show as n/a.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<8} {:>8} {:>8} {:>8}", "model", "R (%)", "OT (%)", "EE (%)").unwrap();
        for r in &self.rows {
            writeln!(out, "{:<8} {:>8.1} {:>8} {:>8.1}", r.model, r.repetition_rate, "n/a", r.early_ending).unwrap();
        }
        out
    }
}
