//! Deriving interviewer flags from a transcript's topic questions.

use crate::transcript::{tokenize, Dialogue, FlagToken, SpeakerId, TranscriptError, Utterance};

fn lower_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| t.to_lowercase()).collect()
}

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Sentence punctuation at the edges of a topic question does not have to
/// match, so "Where did you grow up?" is found in "... grow up ? Tell me".
fn question_core(text: &str) -> Vec<String> {
    let mut toks = lower_tokens(text);
    while toks.last().is_some_and(|t| matches!(t.as_str(), "." | "?" | "!" | "," | ";")) {
        toks.pop();
    }
    toks
}

/// Whether an utterance contains any of the topic questions.
pub fn contains_topic_question(u: &Utterance, questions: &[String]) -> bool {
    let hay: Vec<String> = u.tokens().iter().map(|t| t.to_lowercase()).collect();
    questions.iter().any(|q| contains_run(&hay, &question_core(q)))
}

/// Flags every utterance: the first interviewer turn gets B, the last E,
/// other interviewer turns containing a topic question Q (and are marked
/// topical), remaining interviewer turns S1, interviewee turns S2.
pub fn annotate_flags(dialogue: &Dialogue) -> Result<Dialogue, TranscriptError> {
    let utts = dialogue.utterances();
    let s1: Vec<usize> = (0..utts.len()).filter(|&i| utts[i].speaker() == SpeakerId::S1).collect();
    let first = s1.first().copied();
    let last = s1.last().copied();
    let questions = dialogue.topic_questions();
    let out = utts
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let (flag, topical) = match u.speaker() {
                SpeakerId::S2 => (FlagToken::S2, false),
                SpeakerId::S1 if Some(i) == first => (FlagToken::B, false),
                SpeakerId::S1 if Some(i) == last => (FlagToken::E, false),
                SpeakerId::S1 if contains_topic_question(u, questions) => (FlagToken::Q, true),
                SpeakerId::S1 => (FlagToken::S1, false),
            };
            Ok(u.with_flag(Some(flag))?.with_topical(topical))
        })
        .collect::<Result<Vec<_>, TranscriptError>>()?;
    dialogue.with_utterances(out)
}

/// Whether every utterance of the dialogue carries a flag.
pub fn is_flagged(dialogue: &Dialogue) -> bool {
    dialogue.utterances().iter().all(|u| u.flag().is_some())
}
