use serde::{Deserialize, Serialize};

use crate::transcript::Token;

/// Filler words, in the column order of the measured error distribution.
pub const DEFAULT_FILLERS: [&str; 9] = ["okay", "yeah", "right", "um", "so", "uh", "well", "like", "oh"];

const PUNCT: [&str; 5] = [".", ",", "?", "!", ";"];

pub(crate) fn is_punct(token: &str) -> bool {
    PUNCT.contains(&token)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerLexicon {
    words: Vec<String>,
}

impl Default for FillerLexicon {
    fn default() -> Self {
        FillerLexicon { words: DEFAULT_FILLERS.iter().map(|w| w.to_string()).collect() }
    }
}

impl FillerLexicon {
    /// Builds a lexicon from words, lowercased, dropping duplicates but keeping order.
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for w in words {
            let w = w.as_ref().to_lowercase();
            if !out.contains(&w) {
                out.push(w);
            }
        }
        FillerLexicon { words: out }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Case-insensitive membership; returns the canonical lexicon entry.
    pub fn lookup(&self, token: &str) -> Option<&str> {
        let lower = token.to_lowercase();
        self.words.iter().find(|w| **w == lower).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup(token).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPosition {
    Begins,
    Ends,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerBoundary {
    pub position: BoundaryPosition,
    pub filler: String,
}

/// Detects an utterance that begins or ends with a filler word, ignoring
/// adjacent sentence punctuation. A leading filler takes priority.
pub fn filler_boundary(tokens: &[Token], lexicon: &FillerLexicon) -> Option<FillerBoundary> {
    let first = tokens.iter().find(|t| !is_punct(t));
    if let Some(filler) = first.and_then(|t| lexicon.lookup(t)) {
        return Some(FillerBoundary { position: BoundaryPosition::Begins, filler: filler.to_string() });
    }
    let last = tokens.iter().rev().find(|t| !is_punct(t));
    last.and_then(|t| lexicon.lookup(t))
        .map(|filler| FillerBoundary { position: BoundaryPosition::Ends, filler: filler.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::tokenize;

    fn fb(text: &str) -> Option<(BoundaryPosition, String)> {
        filler_boundary(&tokenize(text), &FillerLexicon::default()).map(|b| (b.position, b.filler))
    }

    #[test]
    fn default_lexicon() {
        assert_eq!(FillerLexicon::default().words(), DEFAULT_FILLERS);
    }

    #[test]
    fn begins_over_ends() {
        assert_eq!(fb("Okay. Okay."), Some((BoundaryPosition::Begins, "okay".into())));
        assert_eq!(fb("Um, I guess so"), Some((BoundaryPosition::Begins, "um".into())));
    }

    #[test]
    fn no_filler() {
        assert_eq!(fb("My name is David"), None);
    }

    #[test]
    fn ends_with_filler() {
        assert_eq!(fb("I agree, yeah"), Some((BoundaryPosition::Ends, "yeah".into())));
        assert_eq!(fb("I agree, yeah."), Some((BoundaryPosition::Ends, "yeah".into())));
    }

    #[test]
    fn punctuation_only() {
        assert_eq!(fb(". ?"), None);
    }
}
