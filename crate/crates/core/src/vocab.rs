//! Token vocabulary shared by the models.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::transcript::{Corpus, FlagToken};

pub const UNK: &str = "<unk>";
pub const UTT: &str = "<utt>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

/// Symbols that are never surface tokens: the special markers plus one
/// entry per flag.
pub fn special_symbols() -> Vec<String> {
    let mut out: Vec<String> = [UNK, UTT, BOS, EOS].iter().map(|s| s.to_string()).collect();
    out.extend(FlagToken::ALL.iter().map(|f| format!("<{}>", f.as_str())));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(symbols: Vec<String>) -> Self {
        Self::from_symbols(symbols)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.symbols
    }
}

impl Vocab {
    /// Specials first, then surface tokens by descending frequency, ties
    /// broken by the token text so the result is deterministic.
    pub fn build(corpus: &Corpus) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for d in corpus.dialogues() {
            for t in d.token_stream() {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut symbols = special_symbols();
        symbols.extend(words.into_iter().map(|(w, _)| w.to_string()));
        Self::from_symbols(symbols)
    }

    pub fn from_symbols(symbols: Vec<String>) -> Self {
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { symbols, index }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn symbol(&self, id: usize) -> &str {
        self.symbols.get(id).map_or(UNK, String::as_str)
    }

    pub fn flag_id(&self, flag: FlagToken) -> usize {
        self.id(&format!("<{}>", flag.as_str()))
    }

    pub fn flag_of(&self, id: usize) -> Option<FlagToken> {
        FlagToken::ALL.iter().copied().find(|f| self.flag_id(*f) == id)
    }

    /// Whether `id` is one of the reserved symbols.
    pub fn is_special(&self, id: usize) -> bool {
        id < special_symbols().len()
    }

    pub fn encode<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{read_corpus, Split};

    #[test]
    fn specials_then_frequency() {
        let text = r#"{"id":"a","utterances":[{"speaker":"S1","text":"b a a"},{"speaker":"S2","text":"c a b"}],"topic_questions":[]}"#;
        let corpus = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(corpus.split(), Split::Trn);
        let v = Vocab::build(&corpus);
        let n = special_symbols().len();
        assert_eq!(v.symbol(n), "a");
        assert_eq!(v.symbol(n + 1), "b");
        assert_eq!(v.symbol(n + 2), "c");
        assert_eq!(v.id("zzz"), 0);
        assert_eq!(v.flag_of(v.flag_id(FlagToken::Q)), Some(FlagToken::Q));
        assert!(v.is_special(v.id(EOS)));
    }
}
