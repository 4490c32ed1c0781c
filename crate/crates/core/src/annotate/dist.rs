//! Filler-word error distribution and its plain-text config format.
//!
//! ```text
//! # merged-count = dialogue-share : per-filler shares in `fillers` order
//! fillers = okay yeah right um so uh well like oh
//! 2 = 40.4 : 46.7 16.0 8.0 8.5 8.0 4.4 4.7 0.2 3.1
//! ```

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon::DEFAULT_FILLERS;

/// Allowed deviation of a row's filler shares from 100.
pub const SHARE_SUM_TOLERANCE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("row {merged}: filler shares sum to {sum:.2}, expected 100 ± {SHARE_SUM_TOLERANCE}")]
    ShareSum { merged: usize, sum: f64 },
    #[error("row {0}: merged count must be at least 2")]
    MergedCount(usize),
    #[error("distribution has no rows")]
    Empty,
    #[error("dialogue shares must be non-negative with a positive total")]
    DialogueShares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistRow {
    pub merged: usize,
    /// Percentage of dialogues, before renormalization.
    pub dialogue_share: f64,
    pub filler_shares: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    rows: Vec<DistRow>,
}

const TABLE: [(usize, f64, [f64; 9]); 4] = [
    (2, 40.4, [46.7, 16.0, 8.0, 8.5, 8.0, 4.4, 4.7, 0.2, 3.1]),
    (3, 35.9, [33.3, 29.8, 3.9, 8.5, 11.1, 6.2, 2.3, 0.6, 4.1]),
    (4, 8.6, [33.7, 24.5, 5.6, 9.7, 11.2, 5.1, 3.6, 1.0, 5.1]),
    (5, 7.3, [28.9, 30.7, 6.6, 4.2, 15.1, 6.6, 4.8, 0.6, 2.4]),
];

impl ErrorDistribution {
    pub fn new(rows: Vec<DistRow>) -> Result<Self, DistError> {
        if rows.is_empty() {
            return Err(DistError::Empty);
        }
        let mut total = 0.0;
        for row in &rows {
            if row.merged < 2 {
                return Err(DistError::MergedCount(row.merged));
            }
            if !(row.dialogue_share >= 0.0) || row.filler_shares.values().any(|s| !(*s >= 0.0)) {
                return Err(DistError::DialogueShares);
            }
            let sum: f64 = row.filler_shares.values().sum();
            if (sum - 100.0).abs() > SHARE_SUM_TOLERANCE + 1e-9 {
                return Err(DistError::ShareSum { merged: row.merged, sum });
            }
            total += row.dialogue_share;
        }
        if total <= 0.0 {
            return Err(DistError::DialogueShares);
        }
        Ok(ErrorDistribution { rows })
    }

    /// The measured interview-transcript distribution (rows for 2..=5 merged utterances).
    pub fn table3() -> Self {
        let rows = TABLE
            .iter()
            .map(|(merged, share, fillers)| DistRow {
                merged: *merged,
                dialogue_share: *share,
                filler_shares: DEFAULT_FILLERS.iter().zip(fillers).map(|(w, s)| (w.to_string(), *s)).collect(),
            })
            .collect();
        Self::new(rows).expect("built-in table is valid")
    }

    pub fn rows(&self) -> &[DistRow] {
        &self.rows
    }

    /// Dialogue shares rescaled to sum to 100.
    pub fn renormalized_shares(&self) -> Vec<f64> {
        let total: f64 = self.rows.iter().map(|r| r.dialogue_share).sum();
        self.rows.iter().map(|r| 100.0 * r.dialogue_share / total).collect()
    }

    pub fn parse(text: &str) -> Result<Self, DistError> {
        let mut fillers: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let syntax = |message: String| DistError::Syntax { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`".into()))?;
            let key = key.trim();
            if key == "fillers" {
                fillers = Some(value.split_whitespace().map(str::to_lowercase).collect());
                continue;
            }
            let merged: usize = key.parse().map_err(|_| syntax(format!("unknown key {key:?}")))?;
            let names = fillers.as_ref().ok_or_else(|| syntax("`fillers` must precede rows".into()))?;
            let (share, shares) =
                value.split_once(':').ok_or_else(|| syntax("expected `share : filler shares`".into()))?;
            let share: f64 = share.trim().parse().map_err(|_| syntax(format!("bad share {:?}", share.trim())))?;
            let shares = shares
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| syntax(format!("bad filler share {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if shares.len() != names.len() {
                return Err(syntax(format!("expected {} filler shares, found {}", names.len(), shares.len())));
            }
            rows.push(DistRow {
                merged,
                dialogue_share: share,
                filler_shares: names.iter().cloned().zip(shares).collect(),
            });
        }
        Self::new(rows)
    }

    /// Renders the config format accepted by [`ErrorDistribution::parse`].
    /// Rows are assumed to share the first row's filler order.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.rows[0].filler_shares.keys().map(String::as_str).collect();
        let _ = writeln!(out, "# merged-count = dialogue-share : filler shares");
        let _ = writeln!(out, "fillers = {}", names.join(" "));
        for row in &self.rows {
            let shares: Vec<String> =
                names.iter().map(|n| format!("{}", row.filler_shares.get(*n).copied().unwrap_or(0.0))).collect();
            let _ = writeln!(out, "{} = {} : {}", row.merged, row.dialogue_share, shares.join(" "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table3_rows() {
        let d = ErrorDistribution::table3();
        assert_eq!(d.rows().len(), 4);
        assert_eq!(d.rows()[0].merged, 2);
        assert_eq!(d.rows()[0].dialogue_share, 40.4);
        assert_eq!(d.rows()[0].filler_shares["okay"], 46.7);
        let shares = d.renormalized_shares();
        assert!((shares.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!((shares[0] - 40.4 / 92.2 * 100.0).abs() < 1e-9);
    }

    #[test]
    fn config_round_trip() {
        let d = ErrorDistribution::table3();
        assert_eq!(ErrorDistribution::parse(&d.to_config()).unwrap(), d);
    }

    #[test]
    fn bad_sum_rejected() {
        let text = "fillers = a b\n2 = 50 : 60 30\n";
        assert!(matches!(ErrorDistribution::parse(text), Err(DistError::ShareSum { merged: 2, .. })));
    }

    #[test]
    fn syntax_errors_name_line() {
        let text = "fillers = a b\n\n2 = 50 : 60\n";
        assert!(matches!(ErrorDistribution::parse(text), Err(DistError::Syntax { line: 3, .. })));
        assert!(matches!(ErrorDistribution::parse("2 = 1 : 100"), Err(DistError::Syntax { line: 1, .. })));
        assert_eq!(ErrorDistribution::parse("# nothing\n"), Err(DistError::Empty));
    }
}
