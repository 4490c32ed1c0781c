//! Splitting merged utterances at predicted boundaries.
//!
//! Split points come from runs of tokens whose boundary probability reaches
//! the threshold. Under the last-two-tokens scheme a run is cut into pairs,
//! each pair closing one segment; a run that reaches the end of the
//! utterance is paired from the end so the utterance's own tail stays whole.
//!
//! Speakers are assigned by looking at the neighbours rather than at the
//! utterance's surviving speaker, because a merge keeps the speaker of the
//! side without the filler, which may belong to either segment. An unsplit
//! utterance keeps its speaker. A split utterance starts with the speaker
//! that follows the previous utterance (switched when that utterance's tail
//! is a boundary) and then alternates. Split utterances at the start of a
//! dialogue are resolved backwards from the first unsplit one; when every
//! utterance is split the interviewer is assumed to speak first.

use super::eval::BoundaryScorer;
use super::model::DiarizerError;
use crate::annotate::LabelScheme;
use crate::transcript::{Dialogue, SpeakerId, Token, TranscriptError, Utterance};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Segment end offsets (exclusive) inside one utterance, excluding its end.
pub fn split_points(probs: &[f64], threshold: f64, scheme: LabelScheme) -> Vec<usize> {
    let len = probs.len();
    let on: Vec<bool> = probs.iter().map(|&p| p >= threshold).collect();
    let mut cuts = Vec::new();
    match scheme {
        LabelScheme::LastOne => {
            cuts.extend((0..len.saturating_sub(1)).filter(|&j| on[j]).map(|j| j + 1));
        }
        LabelScheme::Speaker => {
            cuts.extend((1..len).filter(|&j| on[j] != on[j - 1]));
        }
        LabelScheme::LastTwo => {
            let mut j = 0;
            while j < len {
                if !on[j] {
                    j += 1;
                    continue;
                }
                let start = j;
                while j < len && on[j] {
                    j += 1;
                }
                let end = j;
                let run = end - start;
                if end == len {
                    // Pair from the end; a leftover first token is ignored.
                    let mut e = end;
                    while e >= start + 2 {
                        if e < len {
                            cuts.push(e);
                        }
                        e -= 2;
                    }
                } else {
                    for p in 0..run / 2 {
                        cuts.push(start + 2 * (p + 1));
                    }
                }
            }
            cuts.sort_unstable();
        }
    }
    cuts
}

fn tail_is_boundary(probs: &[f64], threshold: f64, scheme: LabelScheme) -> bool {
    let w = scheme.tail_width(probs.len()).max(1).min(probs.len());
    probs[probs.len() - w..].iter().all(|&p| p >= threshold)
}

struct Piece {
    tokens: Vec<Token>,
    speaker: Option<SpeakerId>,
}

/// Splits a dialogue using already computed per-token boundary probabilities.
pub fn repair_with_probs(dialogue: &Dialogue, probs: &[Vec<f64>], threshold: f64, scheme: LabelScheme) -> Result<Dialogue, TranscriptError> {
    let utts = dialogue.utterances();
    let cuts: Vec<Vec<usize>> = utts.iter().zip(probs).map(|(u, p)| split_points(&p[..u.len()], threshold, scheme)).collect();
    if cuts.iter().all(Vec::is_empty) {
        return Ok(dialogue.clone());
    }
    let tails: Vec<bool> = utts.iter().zip(probs).map(|(u, p)| tail_is_boundary(&p[..u.len()], threshold, scheme)).collect();

    // Pieces per utterance, with speakers where they are already known.
    let mut pieces: Vec<Vec<Piece>> = utts
        .iter()
        .zip(&cuts)
        .map(|(u, c)| {
            let mut bounds = vec![0];
            bounds.extend(c.iter().copied());
            bounds.push(u.len());
            let known = c.is_empty().then_some(u.speaker());
            bounds.windows(2).map(|w| Piece { tokens: u.tokens()[w[0]..w[1]].to_vec(), speaker: known }).collect()
        })
        .collect();

    let speaker_scheme = scheme == LabelScheme::Speaker;
    if speaker_scheme {
        for (i, c) in cuts.iter().enumerate() {
            let mut start = 0;
            let bounds: Vec<usize> = c.iter().copied().chain([utts[i].len()]).collect();
            for (piece, end) in pieces[i].iter_mut().zip(bounds) {
                piece.speaker = Some(if probs[i][start] >= threshold { SpeakerId::S2 } else { SpeakerId::S1 });
                start = end;
            }
        }
    } else {
        // Forward pass from each resolved utterance.
        let mut prev: Option<SpeakerId> = None;
        for i in 0..utts.len() {
            if !cuts[i].is_empty() {
                if let Some(p) = prev {
                    let mut s = if tails[i - 1] { p.other() } else { p };
                    for piece in &mut pieces[i] {
                        piece.speaker = Some(s);
                        s = s.other();
                    }
                }
            }
            prev = pieces[i].last().and_then(|p| p.speaker);
        }
        // Leading split utterances: walk back from the first unsplit one.
        if let Some(anchor) = (0..utts.len()).find(|&i| cuts[i].is_empty()) {
            let mut next = utts[anchor].speaker();
            for i in (0..anchor).rev() {
                let mut s = if tails[i] { next.other() } else { next };
                for piece in pieces[i].iter_mut().rev() {
                    piece.speaker = Some(s);
                    s = s.other();
                }
                next = pieces[i][0].speaker.expect("just assigned");
            }
        } else {
            // Every utterance was split, so no speaker is trustworthy; the
            // interviewer is taken to open the conversation.
            let mut s = SpeakerId::S1;
            for group in &mut pieces {
                for piece in group.iter_mut() {
                    piece.speaker = Some(s);
                    s = s.other();
                }
            }
        }
    }

    // Rebuild, joining same-speaker neighbours where a split took part.
    let mut out: Vec<(Utterance, bool)> = Vec::new();
    for (i, (u, group)) in utts.iter().zip(pieces).enumerate() {
        let split = !cuts[i].is_empty();
        let mut flag_used = false;
        for piece in group {
            let speaker = piece.speaker.unwrap_or(u.speaker());
            let keeps_flag = !flag_used && speaker == u.speaker();
            flag_used |= keeps_flag;
            let flag = if keeps_flag { u.flag() } else { None };
            let topical = keeps_flag && u.is_topical();
            if let Some((last, last_split)) = out.last_mut() {
                if (split || *last_split) && last.speaker() == speaker {
                    let mut tokens = last.tokens().to_vec();
                    tokens.extend(piece.tokens);
                    let flag = last.flag().or(flag);
                    *last = Utterance::new(speaker, tokens, flag, last.is_topical() || topical)?;
                    *last_split = true;
                    continue;
                }
            }
            out.push((Utterance::new(speaker, piece.tokens, flag, topical)?, split));
        }
    }
    dialogue.with_utterances(out.into_iter().map(|(u, _)| u).collect())
}

/// Scores a dialogue and splits it at predicted boundaries.
pub fn repair(dialogue: &Dialogue, scorer: &dyn BoundaryScorer, threshold: f64, scheme: LabelScheme) -> Result<Dialogue, DiarizerError> {
    let probs = scorer.boundary_probs(dialogue)?;
    repair_with_probs(dialogue, &probs, threshold, scheme).map_err(|e| DiarizerError::Repair(e.to_string()))
}
