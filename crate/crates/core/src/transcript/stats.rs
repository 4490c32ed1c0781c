use serde::{Deserialize, Serialize};

use super::{Corpus, SpeakerId, TranscriptError};

/// Corpus shape summary: dialogue count and mean lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Number of dialogues.
    pub dialogues: usize,
    /// Mean utterances per dialogue.
    pub utterances_per_dialogue: f64,
    /// Mean tokens per interviewer utterance.
    pub s1_tokens: f64,
    /// Mean tokens per interviewee utterance.
    pub s2_tokens: f64,
}

fn mean(sum: usize, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats, TranscriptError> {
    if corpus.is_empty() {
        return Err(TranscriptError::EmptyDialogue);
    }
    let mut utterances = 0;
    let mut tokens = [0usize; 2];
    let mut counts = [0usize; 2];
    for d in corpus.dialogues() {
        utterances += d.len();
        for u in d.utterances() {
            let slot = match u.speaker() {
                SpeakerId::S1 => 0,
                SpeakerId::S2 => 1,
            };
            tokens[slot] += u.len();
            counts[slot] += 1;
        }
    }
    Ok(CorpusStats {
        dialogues: corpus.len(),
        utterances_per_dialogue: mean(utterances, corpus.len()),
        s1_tokens: mean(tokens[0], counts[0]),
        s2_tokens: mean(tokens[1], counts[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{Dialogue, Split, Token, Utterance};

    fn utt(speaker: SpeakerId, n: usize) -> Utterance {
        let toks = (0..n).map(|i| Token::new(format!("w{i}")).unwrap()).collect();
        Utterance::new(speaker, toks, None, false).unwrap()
    }

    #[test]
    fn two_point_mean() {
        let d = Dialogue::new("d", vec![utt(SpeakerId::S1, 3), utt(SpeakerId::S1, 5)], vec![]).unwrap();
        let s = corpus_stats(&Corpus::new(vec![d], Split::Trn).unwrap()).unwrap();
        assert_eq!(s.s1_tokens, 4.0);
        assert_eq!(s.s2_tokens, 0.0);
        assert_eq!(s.utterances_per_dialogue, 2.0);
    }

    #[test]
    fn constant_s2() {
        let ds = (0..3)
            .map(|i| Dialogue::new(format!("d{i}"), vec![utt(SpeakerId::S1, i + 1), utt(SpeakerId::S2, 64)], vec![]).unwrap())
            .collect();
        let s = corpus_stats(&Corpus::new(ds, Split::Trn).unwrap()).unwrap();
        assert_eq!(s.s2_tokens, 64.0);
        assert_eq!(s.dialogues, 3);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(corpus_stats(&Corpus::new(vec![], Split::Trn).unwrap()).is_err());
    }
}
