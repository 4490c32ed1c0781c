use interviewkit::eval::*;
use interviewkit::generator::{GenConfig, GeneratorModel};
use interviewkit::nn::Matrix;
use interviewkit::par::Execution;
use interviewkit::synth::{interview_corpus, InterviewSynth, SCRIPTED_REPLIES};
use interviewkit::transcript::{FlagToken, SpeakerId, Split, Utterance};
use interviewkit::vocab::Vocab;
use proptest::prelude::*;

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "the", "cat"]).prop_map(String::from), 1..12)
}

proptest! {
    #[test]
    fn bleu_of_self_is_one(x in words()) {
        prop_assert!((bleu(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_is_a_fraction(x in words(), y in words()) {
        let b = bleu(&x, &y).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
    }

    #[test]
    fn cosine_ignores_positive_scale(a in prop::collection::vec(-5.0f64..5.0, 6), b in prop::collection::vec(-5.0f64..5.0, 6), s in 0.01f64..100.0) {
        prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        prop_assert!((cosine(&scaled, &b).unwrap() - cosine(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn repetition_falls_as_threshold_rises(seed in 0u64..500, count in 0usize..10, lo in -1.0f64..1.0, gap in 0.0f64..1.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let topics: Vec<Matrix> = (0..count).map(|_| Matrix::from_fn(1, 3, |_, _| rng.gen_range(-1.0..1.0))).collect();
        prop_assert!(repetition_rate(&topics, lo + gap).unwrap() <= repetition_rate(&topics, lo).unwrap());
    }

    #[test]
    fn early_ending_is_monotone(a in 1usize..40, b in 1usize..40) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(early_ending(Some(lo)) <= early_ending(Some(hi)));
        prop_assert!(early_ending(Some(hi)) <= 100.0);
    }
}

fn flagged(speaker: SpeakerId, flag: FlagToken, text: &str) -> Utterance {
    Utterance::from_text(speaker, text).unwrap().with_flag(Some(flag)).unwrap()
}

#[test]
fn session_metric_cases() {
    let plain = vec![flagged(SpeakerId::S1, FlagToken::B, "Hi ."), flagged(SpeakerId::S2, FlagToken::S2, "Hello .")];
    let m = session_metrics(&plain, &[], DEFAULT_TAU).unwrap();
    assert_eq!(m.repetition_rate, 0.0);
    assert_eq!(m.early_ending, 100.0);
    assert_eq!(m.turn_count, 2);

    let mut with_q = plain.clone();
    with_q.push(flagged(SpeakerId::S1, FlagToken::Q, "Where did you grow up ?"));
    with_q.push(flagged(SpeakerId::S2, FlagToken::S2, "Here ."));
    with_q.push(flagged(SpeakerId::S1, FlagToken::Q, "Where did you grow up ?"));
    with_q.push(flagged(SpeakerId::S1, FlagToken::E, "Bye ."));
    let v = Matrix::row_vector(&[1.0, 2.0]);
    let m = session_metrics(&with_q, &[v.clone(), v.scale(3.0)], DEFAULT_TAU).unwrap();
    assert_eq!(m.repetition_rate, 50.0);
    assert!((m.early_ending - 20.0).abs() < 1e-12);
    assert!(matches!(session_metrics(&with_q, &[v], DEFAULT_TAU), Err(MetricError::TopicCount { .. })));
}

fn corpus() -> interviewkit::transcript::Corpus {
    interview_corpus(3, &InterviewSynth::default(), 5, Split::Tst).unwrap()
}

#[test]
fn echoing_gold_scores_perfect_bleu() {
    let c = corpus();
    let r = static_eval_with(&c, |d, i| Ok(d.utterances()[i].clone()), |u| Ok(Matrix::row_vector(&[u.len() as f64, 1.0])), Execution::Parallel).unwrap();
    assert_eq!(r.avg_bleu, 1.0);
    assert!((r.avg_cosine - 1.0).abs() < 1e-12);
    let interviewer_turns: usize = c.dialogues().iter().map(|d| d.utterances().iter().filter(|u| u.speaker() == SpeakerId::S1).count()).sum();
    assert_eq!(r.turns.len(), interviewer_turns);
}

#[test]
fn static_eval_runs_on_a_model() {
    let c = corpus();
    let model = GeneratorModel::new(GenConfig::desk(Vocab::build(&c)), 0).unwrap();
    let par = static_eval(&model, &c, Execution::Parallel).unwrap();
    let seq = static_eval(&model, &c, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
    assert!((0.0..=1.0).contains(&par.avg_bleu));
}

fn replies() -> Vec<String> {
    SCRIPTED_REPLIES.iter().map(|s| s.to_string()).collect()
}

#[test]
fn identical_models_give_identical_rows() {
    let model = GeneratorModel::new(GenConfig::desk(Vocab::build(&corpus())), 1).unwrap();
    let report = ablation_run(&[("BB", &model), ("SW", &model), ("CT", &model)], 3, &replies(), 7, DEFAULT_TAU, Execution::Parallel).unwrap();
    assert_eq!(report.rows[0].per_session, report.rows[1].per_session);
    assert_eq!(report.rows[1].per_session, report.rows[2].per_session);
    let table = report.table();
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().skip(1).all(|l| l.contains("n/a")));
}

#[test]
fn single_session_is_reproducible() {
    let model = GeneratorModel::new(GenConfig::desk(Vocab::build(&corpus())), 2).unwrap();
    let run = || serde_json::to_string(&ablation_run(&[("CT", &model)], 1, &replies(), 0, DEFAULT_TAU, Execution::Sequential).unwrap()).unwrap();
    assert_eq!(run(), run());
    assert!(matches!(scripted_session(&model, &[], Default::default()), Err(EvalError::NoReplies)));
}

#[test]
fn overfit_small_corpus() {
    // A desk model trained hard on five dialogues should reproduce them.
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/interviews.jsonl");
    let all = interviewkit::transcript::parse_corpus(path).unwrap();
    let five = interviewkit::transcript::Corpus::new(all.dialogues()[..5].to_vec(), Split::Trn).unwrap();
    let cfg = GenConfig::desk(Vocab::build(&five));
    let tc = interviewkit::nn::TrainConfig { epochs: 200, batch_size: 4, learning_rate: 3e-3, seed: 0, ..Default::default() };
    let (model, _) = interviewkit::generator::train_generator(&five, cfg, &tc, Execution::Parallel).unwrap();
    let acc = interviewkit::generator::teacher_forced_accuracy(&model, &five, Execution::Parallel).unwrap();
    assert!(acc >= 0.95, "teacher-forced accuracy {acc}");
    let r = static_eval(&model, &five, Execution::Parallel).unwrap();
    assert!(r.avg_bleu >= 0.5, "avg bleu {}", r.avg_bleu);
}
