//! Deterministic word tokenizer.
//!
//! Splits on whitespace, detaches sentence punctuation (`. , ? ! ;`) into
//! standalone tokens and splits English contractions (`'s n't 're 'm 've
//! 'll 'd`) off the word they attach to. [`detokenize`] is the inverse up to
//! whitespace normalization: `tokenize(&detokenize(&tokenize(s))) ==
//! tokenize(s)`.

use super::Token;

const PUNCT: [char; 5] = ['.', ',', '?', '!', ';'];

// Longest suffixes first so that `n't` wins over nothing shorter sharing its tail.
const CONTRACTIONS: [&str; 7] = ["n't", "'re", "'ve", "'ll", "'s", "'m", "'d"];

fn is_punct(c: char) -> bool {
    PUNCT.contains(&c)
}

fn contraction_suffix(word: &str) -> Option<usize> {
    let lower = word.to_lowercase();
    // Only ASCII suffixes are matched, so byte lengths agree between `word` and `lower`.
    CONTRACTIONS.iter().find_map(|suffix| {
        if lower.len() == word.len() && lower.ends_with(suffix) && word.len() > suffix.len() {
            Some(word.len() - suffix.len())
        } else {
            None
        }
    })
}

fn is_contraction(token: &str) -> bool {
    let lower = token.to_lowercase();
    CONTRACTIONS.contains(&lower.as_str())
}

fn split_word(word: &str, out: &mut Vec<Token>) {
    if word.is_empty() {
        return;
    }
    let first = word.chars().next().unwrap();
    if is_punct(first) {
        out.push(Token::new_unchecked(first.to_string()));
        split_word(&word[first.len_utf8()..], out);
        return;
    }
    let last = word.chars().next_back().unwrap();
    if is_punct(last) {
        split_word(&word[..word.len() - last.len_utf8()], out);
        out.push(Token::new_unchecked(last.to_string()));
        return;
    }
    if let Some(at) = contraction_suffix(word) {
        split_word(&word[..at], out);
        out.push(Token::new_unchecked(word[at..].to_string()));
        return;
    }
    out.push(Token::new_unchecked(word.to_string()));
}

/// Tokenizes raw text. Empty or all-whitespace input yields no tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        split_word(word, &mut out);
    }
    out
}

fn attaches_left(token: &str) -> bool {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if is_punct(c) => true,
        _ => is_contraction(token),
    }
}

/// Joins tokens back into text, gluing punctuation and contraction suffixes
/// onto the preceding token.
pub fn detokenize<T: AsRef<str>>(tokens: &[T]) -> String {
    let mut out = String::new();
    for (i, token) in tokens.iter().enumerate() {
        let token = token.as_ref();
        if i > 0 && !attaches_left(token) {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}
