//! Heuristic counts of diarization error types in real transcripts.

use serde::{Deserialize, Serialize};

use super::lexicon::{filler_boundary, is_punct, BoundaryPosition, FillerLexicon};
use crate::transcript::{Dialogue, Token};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTaxonomyCount {
    pub asr: usize,
    pub word_repetition: usize,
    pub filler_word: usize,
    pub adjacent_concatenation: usize,
}

impl ErrorTaxonomyCount {
    pub fn total(&self) -> usize {
        self.asr + self.word_repetition + self.filler_word + self.adjacent_concatenation
    }
}

impl std::ops::AddAssign for ErrorTaxonomyCount {
    fn add_assign(&mut self, rhs: Self) {
        self.asr += rhs.asr;
        self.word_repetition += rhs.word_repetition;
        self.filler_word += rhs.filler_word;
        self.adjacent_concatenation += rhs.adjacent_concatenation;
    }
}

fn is_asr_marker(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

fn is_sentence_end(token: &str) -> bool {
    matches!(token, "." | "?" | "!")
}

fn sentences(tokens: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        let last_of_run = tokens.get(i + 1).map_or(true, |n| !is_sentence_end(n));
        if is_sentence_end(t) && last_of_run {
            out.push(&tokens[start..=i]);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out
}

fn starts_capitalized(sentence: &[Token]) -> bool {
    sentence
        .iter()
        .find(|t| !is_punct(t))
        .and_then(|t| t.chars().next())
        .is_some_and(char::is_uppercase)
}

pub fn analyze_taxonomy(dialogue: &Dialogue, lexicon: &FillerLexicon) -> ErrorTaxonomyCount {
    let mut counts = ErrorTaxonomyCount::default();
    for u in dialogue.utterances() {
        let tokens = u.tokens();
        counts.asr += tokens.iter().filter(|t| is_asr_marker(t)).count();
        counts.word_repetition += tokens
            .windows(2)
            .filter(|w| {
                let (a, b) = (w[0].as_str(), w[1].as_str());
                !is_punct(a) && !lexicon.contains(a) && a.eq_ignore_ascii_case(b)
            })
            .count();
        let sents = sentences(tokens);
        for pair in sents.windows(2) {
            let ends_with_filler = filler_boundary(pair[0], lexicon)
                .is_some_and(|b| b.position == BoundaryPosition::Ends || pair[0].iter().filter(|t| !is_punct(t)).count() == 1);
            let begins_with_filler =
                filler_boundary(pair[1], lexicon).is_some_and(|b| b.position == BoundaryPosition::Begins);
            if ends_with_filler || begins_with_filler {
                counts.filler_word += 1;
            } else if starts_capitalized(pair[1]) {
                counts.adjacent_concatenation += 1;
            }
        }
    }
    counts
}
