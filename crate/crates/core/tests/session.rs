use std::sync::Arc;

use interviewkit::generator::{Decode, GenConfig, GeneratorModel};
use interviewkit::session::*;
use interviewkit::synth::{interview_corpus, InterviewSynth};
use interviewkit::transcript::{read_corpus, FlagToken, Split};
use interviewkit::vocab::Vocab;

/// Untrained desk model with fixed offsets on the flag logits, so tests can
/// force or forbid particular flags.
fn model_with(bias: &[(FlagToken, f64)]) -> GeneratorModel {
    let c = interview_corpus(3, &InterviewSynth::default(), 1, Split::Trn).unwrap();
    let mut m = GeneratorModel::new(GenConfig::desk(Vocab::build(&c)), 9).unwrap();
    let id = m.store.id("output.b").unwrap();
    for &(f, b) in bias {
        let col = m.config.vocab.flag_id(f);
        m.store.get_mut(id).value.set(0, col, b);
    }
    m
}

fn manager(bias: &[(FlagToken, f64)]) -> SessionManager {
    SessionManager::new(Arc::new(model_with(bias)), SessionOptions::default())
}

#[test]
fn opening_turn_is_b() {
    let m = manager(&[]);
    let (id, first) = m.create(None).unwrap();
    assert_eq!(first.flag, Some(FlagToken::B));
    assert_eq!(first.turn_index, 1);
    let view = m.transcript(&id).unwrap();
    assert_eq!(view.turns.len(), 1);
    assert_eq!(view.turns[0].record.flag, Some(FlagToken::B));
    assert!(view.metrics.is_none());
}

#[test]
fn ids_are_distinct_and_listed() {
    let m = manager(&[]);
    let (a, _) = m.create(None).unwrap();
    assert_eq!(m.list().len(), 1);
    let (b, _) = m.create(None).unwrap();
    assert_ne!(a, b);
    assert_eq!(m.list().len(), 2);
    m.delete(&a).unwrap();
    assert_eq!(m.list().len(), 1);
    assert!(matches!(m.delete(&a), Err(SessionError::NotFound(_))));
}

#[test]
fn cap_ends_session_at_thirty_turns() {
    let m = manager(&[(FlagToken::E, -100.0)]);
    let (id, _) = m.create(None).unwrap();
    let mut last = None;
    for i in 0..15 {
        let r = m.post(&id, "I see .").unwrap();
        assert_eq!(r.turn_index, if i < 14 { 2 * i + 3 } else { 30 });
        last = Some(r);
    }
    let last = last.unwrap();
    assert_eq!(last.session_status, SessionStatus::EndedByCap);
    assert!(last.bot_text.is_none());
    assert!(matches!(m.post(&id, "More ."), Err(SessionError::Ended(_))));
    let view = m.transcript(&id).unwrap();
    assert_eq!(view.turns.len(), 30);
    assert_eq!(view.metrics.unwrap().early_ending, 100.0);
}

#[test]
fn ending_flag_closes_session() {
    let m = manager(&[(FlagToken::E, 100.0)]);
    let (id, _) = m.create(None).unwrap();
    let r = m.post(&id, "Sure .").unwrap();
    assert_eq!(r.flag, Some(FlagToken::E));
    assert_eq!(r.session_status, SessionStatus::EndedByE);
    assert!(matches!(m.post(&id, "Wait ."), Err(SessionError::Ended(_))));
    let metrics = m.transcript(&id).unwrap().metrics.unwrap();
    assert!((metrics.early_ending - 100.0 * 3.0 / 30.0).abs() < 1e-12);
}

#[test]
fn questions_grow_the_topic_snapshot() {
    let m = manager(&[(FlagToken::Q, 100.0)]);
    let (id, first) = m.create(None).unwrap();
    assert!(first.topics_snapshot.is_empty());
    let r = m.post(&id, "Okay .").unwrap();
    assert_eq!(r.flag, Some(FlagToken::Q));
    assert_eq!(r.topics_snapshot.len(), 1);
    let r = m.post(&id, "Fine .").unwrap();
    assert_eq!(r.topics_snapshot.len(), 2);
}

#[test]
fn validation_and_lookup_errors() {
    let m = manager(&[]);
    let (id, _) = m.create(None).unwrap();
    assert!(matches!(m.post(&id, "   "), Err(SessionError::EmptyText)));
    assert!(matches!(m.post("nope", "hi"), Err(SessionError::NotFound(_))));
    assert!(matches!(m.transcript("nope"), Err(SessionError::NotFound(_))));
}

#[test]
fn export_reparses_as_corpus() {
    let m = manager(&[(FlagToken::E, -100.0)]);
    let (id, _) = m.create(Some(Decode::Sampled { seed: 3 })).unwrap();
    for _ in 0..4 {
        m.post(&id, "Well , I grew up by the sea .").unwrap();
    }
    let view = m.transcript(&id).unwrap();
    let corpus = read_corpus(view.export.as_bytes()).unwrap();
    let d = &corpus.dialogues()[0];
    assert_eq!(d.len(), 9);
    for (u, t) in d.utterances().iter().zip(&view.turns) {
        assert_eq!(u.flag(), t.record.flag);
        assert_eq!(u.speaker(), t.record.speaker);
    }
    // Reads do not change the session.
    assert_eq!(m.transcript(&id).unwrap(), view);
}

#[test]
fn sessions_do_not_share_state() {
    let m = manager(&[(FlagToken::Q, 100.0)]);
    let (a, _) = m.create(None).unwrap();
    let (b, _) = m.create(None).unwrap();
    m.post(&a, "One .").unwrap();
    m.post(&a, "Two .").unwrap();
    let rb = m.post(&b, "One .").unwrap();
    assert_eq!(rb.topics_snapshot.len(), 1);
    assert_eq!(m.transcript(&b).unwrap().turns.len(), 3);
}

#[test]
fn concurrent_posts_are_serialized_per_session() {
    let m = Arc::new(manager(&[(FlagToken::E, -100.0)]));
    let ids: Vec<String> = (0..2).map(|_| m.create(None).unwrap().0).collect();
    let handles: Vec<_> = (0..50)
        .map(|i| {
            let m = Arc::clone(&m);
            let id = ids[i % 2].clone();
            std::thread::spawn(move || m.post(&id, &format!("reply {i} .")))
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let ok = results.iter().filter(|r| r.is_ok()).count();
    let ended = results.iter().filter(|r| matches!(r, Err(SessionError::Ended(_)))).count();
    // 25 posts per session; the cap admits 15 each.
    assert_eq!(ok, 30);
    assert_eq!(ended, 20);
    for id in &ids {
        let view = m.transcript(id).unwrap();
        assert_eq!(view.turns.len(), 30);
        assert_eq!(view.status, SessionStatus::EndedByCap);
        for (i, t) in view.turns.iter().enumerate() {
            assert_eq!(t.index, i + 1);
            // Strict alternation shows no two posts interleaved inside one turn.
            let human = i % 2 == 1;
            assert_eq!(t.record.flag == Some(FlagToken::S2), human);
        }
    }
}

#[test]
fn log_dir_receives_every_turn() {
    let dir = tempfile::tempdir().unwrap();
    let m = SessionManager::new(Arc::new(model_with(&[(FlagToken::E, -100.0)])), SessionOptions::default()).with_log_dir(dir.path());
    let (id, _) = m.create(None).unwrap();
    m.post(&id, "Hello .").unwrap();
    let log = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["index"], 3);
}
