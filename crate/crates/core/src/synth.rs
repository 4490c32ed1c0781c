//! Deterministic synthetic corpora.
//!
//! Two families are produced. Diarization dialogues alternate an
//! interviewer asking about everyday subjects with an interviewee answering,
//! and many turns open or close with a filler word so that error injection
//! has sites to work with. Interview dialogues follow a fixed topic order
//! with flagged interviewer turns (opening, topical question, follow-up,
//! closing) and feed the generator.
//!
//! Every utterance has at least two tokens. With one-token turns the
//! last-two-tokens labels of back-to-back short turns become ambiguous and a
//! perfect splitter could no longer recover the segmentation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par;
use crate::transcript::{tokenize, Corpus, Dialogue, FlagToken, SpeakerId, Split, TranscriptError, Utterance};

const SUBJECTS: &[&str] = &[
    "family", "work", "school", "hometown", "hobbies", "friends", "health", "travel", "music", "cooking",
    "garden", "neighborhood", "childhood", "weekends", "pets", "studies",
];

const QUESTIONS: &[&str] = &[
    "Can you tell me about your {}?",
    "How do you feel about your {}?",
    "What is the best part of your {}?",
    "How has your {} changed over the years?",
    "Why is your {} important to you?",
    "What would you change about your {}?",
    "Who do you share your {} with?",
];

const ACKS: &[&str] = &["Thank you.", "I see.", "That makes sense.", "Interesting.", "Got it.", "That is great.", "Wonderful."];

const ANSWERS: &[&str] = &[
    "I love my {} a lot.",
    "My {} has been hard for me.",
    "I think about my {} every day.",
    "We talked about the {} at dinner.",
    "It was busy but I enjoyed it.",
    "My mother always helped me with it.",
    "I don't know much about that.",
    "It's been a quiet year for us.",
    "I spend most evenings on my {}.",
    "My brother and I argue about it.",
    "There's a small park near our house.",
    "I'm trying to do better at it.",
];

const LEADS: &[&str] = &["Okay,", "Yeah,", "Right.", "Um", "So", "Uh", "Well,", "Like", "Oh,"];
const TRAILS: &[&str] = &[", okay.", ", yeah.", ", right?", ", um.", ", so.", ", uh.", ", well.", ", like.", ", oh."];

/// Knobs for diarization dialogues.
#[derive(Debug, Clone, PartialEq)]
pub struct DiarizationSynth {
    pub min_utterances: usize,
    pub max_utterances: usize,
    /// Probability that an utterance opens or closes with a filler.
    pub filler_rate: f64,
}

impl Default for DiarizationSynth {
    fn default() -> Self {
        DiarizationSynth { min_utterances: 8, max_utterances: 14, filler_rate: 0.6 }
    }
}

fn fill(template: &str, subject: &str) -> String {
    template.replace("{}", subject)
}

fn with_filler(rng: &mut ChaCha8Rng, body: String, rate: f64) -> String {
    if !rng.gen_bool(rate) {
        return body;
    }
    let i = rng.gen_range(0..LEADS.len());
    if rng.gen_bool(0.5) {
        format!("{} {}", LEADS[i], lowercase_first(&body))
    } else {
        let trimmed = body.trim_end_matches(['.', '?']);
        format!("{}{}", trimmed, TRAILS[i])
    }
}

fn lowercase_first(s: &str) -> String {
    // "I" stays capitalised.
    if s.starts_with("I ") || s.starts_with("I'") {
        return s.to_string();
    }
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn utterance(speaker: SpeakerId, text: &str) -> Result<Utterance, TranscriptError> {
    Utterance::new(speaker, tokenize(text), None, false)
}

pub fn diarization_dialogue(id: &str, cfg: &DiarizationSynth, seed: u64) -> Result<Dialogue, TranscriptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(cfg.min_utterances..=cfg.max_utterances.max(cfg.min_utterances));
    let mut utts = Vec::with_capacity(n);
    for i in 0..n {
        let subject = *SUBJECTS.choose(&mut rng).unwrap();
        let text = if i % 2 == 0 {
            let q = fill(QUESTIONS.choose(&mut rng).unwrap(), subject);
            let body = if i > 0 && rng.gen_bool(0.4) { format!("{} {}", ACKS.choose(&mut rng).unwrap(), q) } else { q };
            with_filler(&mut rng, body, cfg.filler_rate)
        } else {
            let sentences = rng.gen_range(1..=2);
            let body: Vec<String> = (0..sentences).map(|_| fill(ANSWERS.choose(&mut rng).unwrap(), subject)).collect();
            with_filler(&mut rng, body.join(" "), cfg.filler_rate)
        };
        let speaker = if i % 2 == 0 { SpeakerId::S1 } else { SpeakerId::S2 };
        utts.push(utterance(speaker, &text)?);
    }
    Dialogue::new(id.to_string(), utts, Vec::new())
}

pub fn diarization_corpus(count: usize, cfg: &DiarizationSynth, seed: u64, split: Split) -> Result<Corpus, TranscriptError> {
    let dialogues = (0..count)
        .map(|i| diarization_dialogue(&format!("dia-{i:05}"), cfg, par::sub_seed(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(dialogues, split)
}

/// Topical questions in the fixed order interviews visit them.
pub const TOPIC_QUESTIONS: &[&str] = &[
    "Where did you grow up?",
    "What do you do for work?",
    "Tell me about your family.",
    "What are your hobbies?",
    "How is your health these days?",
    "Do you have any pets?",
    "What music do you like?",
    "Where have you traveled?",
    "What is your favorite food?",
    "Do you play any sports?",
    "What books do you read?",
    "Who are your close friends?",
    "What was school like for you?",
    "What are your plans for the future?",
    "How do you spend your weekends?",
    "What makes you happy?",
];

const TOPIC_ANSWERS: &[&str] = &[
    "I grew up in a small town by the river.",
    "I work as a nurse at the city hospital.",
    "I have two sisters and a younger brother.",
    "I like painting and long walks.",
    "I feel healthy and I sleep well.",
    "We have an old dog named Max.",
    "I mostly listen to jazz and folk songs.",
    "I visited Spain and Japan last year.",
    "My favorite food is my mother's soup.",
    "I play tennis on Sunday mornings.",
    "I read mystery novels before bed.",
    "My close friends are from college.",
    "School was hard but I liked math.",
    "I hope to open a small bakery.",
    "I spend weekends with my children.",
    "Time with my family makes me happy.",
];

pub const OPENING: &str = "Hello and thank you for joining me today. Are you ready to begin?";
pub const CLOSING: &str = "That is all my questions. Thank you for your time. Goodbye.";
const READY: &[&str] = &["Yes, I am ready.", "Sure, let's begin.", "Yes, thank you for having me."];
const LEAD_INS: &[&str] = &["", "Okay.", "Great.", "Thanks."];
const FOLLOW_UPS: &[&str] = &["I see. Can you tell me more?", "That is interesting. Why is that?", "How did that make you feel?"];
const ELABORATIONS: &[&str] = &[
    "It has always been important to me.",
    "I think it shaped who I am.",
    "It makes me feel calm and happy.",
    "I am still learning about it.",
];
const GOODBYES: &[&str] = &["Thank you, goodbye.", "Thanks, it was nice talking."];

/// Knobs for flagged interview dialogues.
#[derive(Debug, Clone, PartialEq)]
pub struct InterviewSynth {
    pub min_topics: usize,
    pub max_topics: usize,
}

impl Default for InterviewSynth {
    fn default() -> Self {
        InterviewSynth { min_topics: 8, max_topics: 12 }
    }
}

/// An interview that opens (B), asks the first `t` topics in order, each as
/// a topical question (Q) followed by one follow-up (S1), then closes (E).
pub fn interview_dialogue(id: &str, cfg: &InterviewSynth, seed: u64) -> Result<Dialogue, TranscriptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = rng.gen_range(cfg.min_topics..=cfg.max_topics.max(cfg.min_topics)).min(TOPIC_QUESTIONS.len());
    let bot = |text: &str, flag: FlagToken, topical: bool| Utterance::new(SpeakerId::S1, tokenize(text), Some(flag), topical);
    let human = |text: &str| Utterance::new(SpeakerId::S2, tokenize(text), Some(FlagToken::S2), false);
    let mut utts = vec![bot(OPENING, FlagToken::B, false)?, human(READY.choose(&mut rng).unwrap())?];
    for t in 0..topics {
        let lead = LEAD_INS.choose(&mut rng).unwrap();
        let q = format!("{lead} {}", TOPIC_QUESTIONS[t]);
        utts.push(bot(q.trim(), FlagToken::Q, true)?);
        utts.push(human(TOPIC_ANSWERS[t])?);
        utts.push(bot(FOLLOW_UPS.choose(&mut rng).unwrap(), FlagToken::S1, false)?);
        utts.push(human(ELABORATIONS.choose(&mut rng).unwrap())?);
    }
    utts.push(bot(CLOSING, FlagToken::E, false)?);
    utts.push(human(GOODBYES.choose(&mut rng).unwrap())?);
    let questions = TOPIC_QUESTIONS[..topics].iter().map(|q| q.to_string()).collect();
    Dialogue::new(id.to_string(), utts, questions)
}

pub fn interview_corpus(count: usize, cfg: &InterviewSynth, seed: u64, split: Split) -> Result<Corpus, TranscriptError> {
    let dialogues = (0..count)
        .map(|i| interview_dialogue(&format!("int-{i:04}"), cfg, par::sub_seed(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(dialogues, split)
}

/// Generic interviewee replies for scripted sessions.
pub const SCRIPTED_REPLIES: &[&str] = &[
    "Yes, I am ready.",
    "That is a good question.",
    "I have thought about it a lot.",
    "It means a lot to me.",
    "I am not sure, but I will try.",
    "I think it shaped who I am.",
    "It has always been important to me.",
    "I am still learning about it.",
];
