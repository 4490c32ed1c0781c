use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use interviewkit::annotate::{analyze_taxonomy, inject_errors_with, load_labels, save_labels, ErrorDistribution, ErrorTaxonomyCount, FillerLexicon, LabelScheme};
use interviewkit::diarizer::{evaluate_f1, repair, train_diarizer, DiarizerConfig, DiarizerModel, FillerHeuristic, Variant, DEFAULT_THRESHOLD};
use interviewkit::eval::{ablation_run, static_eval, DEFAULT_TAU};
use interviewkit::generator::{annotate_flags, generate_turn, teacher_forced_accuracy, train_generator, Decode, GenConfig, GeneratorModel, TopicStore};
use interviewkit::nn::{ModelCheckpoint, TrainConfig};
use interviewkit::par::Execution;
use interviewkit::synth::{diarization_corpus, interview_corpus, DiarizationSynth, InterviewSynth};
use interviewkit::transcript::{corpus_stats, detokenize, parse_corpus, save_corpus, tokenize, Corpus, FlagToken, SpeakerId, Split, Utterance};
use interviewkit::vocab::Vocab;
use interviewkit_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "interviewkit", version, about = "Diarization repair and interview dialogue generation")]
struct Cli {
    /// Run data-parallel stages on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Diarization,
    Interview,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecodeMode {
    Greedy,
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a text file, one utterance per line.
    Tokenize { input: PathBuf, output: PathBuf },
    /// Print corpus shape statistics.
    Stats { corpus: PathBuf },
    /// Merge utterances at filler words and write gold boundary labels.
    Inject {
        #[arg(long)]
        dist: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-dialogue injection report here.
        #[arg(long)]
        report: Option<PathBuf>,
        input: PathBuf,
        out_corrupted: PathBuf,
        out_labels: PathBuf,
    },
    /// Count error types per class across a corpus.
    Taxonomy { corpus: PathBuf },
    /// Write a synthetic corpus.
    Synth {
        kind: SynthKind,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        output: PathBuf,
    },
    /// Add B/E/Q/S1/S2 flags derived from each dialogue's topic questions.
    Flag { input: PathBuf, output: PathBuf },
    TrainDiarizer {
        #[arg(long, default_value = "joint")]
        variant: Variant,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        corpus: PathBuf,
        labels: PathBuf,
        ckpt: PathBuf,
    },
    /// Print per-token boundary probabilities as JSON lines.
    Diarize { ckpt: PathBuf, corpus: PathBuf },
    /// Split merged utterances and reassign speakers.
    Repair {
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        ckpt: PathBuf,
        input: PathBuf,
        output: PathBuf,
    },
    EvalDiarizer { ckpt: PathBuf, corpus: PathBuf, labels: PathBuf },
    TrainGenerator {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
        #[arg(long, default_value_t = 3e-3)]
        lr: f64,
        /// Full-size windows (n=128, m=100, d=64) instead of the small default.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        no_windowing: bool,
        #[arg(long)]
        no_topic_store: bool,
        corpus: PathBuf,
        ckpt: PathBuf,
    },
    /// Interactive session in the terminal.
    Chat {
        #[arg(long)]
        seed: Option<u64>,
        ckpt: PathBuf,
    },
    /// Teacher-forced accuracy on a flagged corpus.
    GenEval { ckpt: PathBuf, corpus: PathBuf },
    EvalStatic { ckpt: PathBuf, corpus: PathBuf },
    /// Scripted sessions against three models.
    Ablate {
        #[arg(long, default_value_t = 10)]
        sessions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value = "ablation.json")]
        report: PathBuf,
        bb: PathBuf,
        sw: PathBuf,
        ct: PathBuf,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, env = "INTERVIEWKIT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "INTERVIEWKIT_CHECKPOINT")]
        checkpoint: PathBuf,
        #[arg(long, env = "INTERVIEWKIT_DECODE", value_enum, default_value = "greedy")]
        decode: DecodeMode,
        #[arg(long, env = "INTERVIEWKIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "INTERVIEWKIT_TAU", default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, env = "INTERVIEWKIT_LOG_DIR")]
        log_dir: Option<PathBuf>,
    },
}

fn corpus(path: &PathBuf) -> Result<Corpus> {
    parse_corpus(path).with_context(|| format!("reading {}", path.display()))
}

fn checkpoint(path: &PathBuf) -> Result<ModelCheckpoint> {
    ModelCheckpoint::load(path).with_context(|| format!("loading {}", path.display()))
}

fn diarizer(path: &PathBuf) -> Result<DiarizerModel> {
    Ok(DiarizerModel::from_checkpoint(&checkpoint(path)?)?)
}

fn generator(path: &PathBuf) -> Result<GeneratorModel> {
    Ok(GeneratorModel::from_checkpoint(&checkpoint(path)?)?)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Tokenize { input, output } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let lines: Vec<String> = text.lines().map(|l| tokenize(l).iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" ")).collect();
            fs::write(&output, lines.join("\n") + "\n")?;
        }
        Command::Stats { corpus: path } => print_json(&corpus_stats(&corpus(&path)?)?)?,
        Command::Inject { dist, seed, report, input, out_corrupted, out_labels } => {
            let dist = match dist {
                Some(p) => ErrorDistribution::parse(&fs::read_to_string(&p)?)?,
                None => ErrorDistribution::table3(),
            };
            let c = corpus(&input)?;
            let inj = inject_errors_with(&c, &dist, &FillerLexicon::default(), LabelScheme::LastTwo, seed, exec)?;
            save_corpus(&inj.corrupted, &out_corrupted)?;
            save_labels(&inj.corrupted, &inj.gold, &out_labels)?;
            if let Some(p) = report {
                fs::write(p, serde_json::to_string_pretty(&inj.report)?)?;
            }
            println!("merged-count shares (%): {:?}", inj.report.merged_count_shares());
        }
        Command::Taxonomy { corpus: path } => {
            let lex = FillerLexicon::default();
            let mut total = ErrorTaxonomyCount::default();
            for d in corpus(&path)?.dialogues() {
                total += analyze_taxonomy(d, &lex);
            }
            print_json(&total)?;
        }
        Command::Synth { kind, count, seed, output } => {
            let c = match kind {
                SynthKind::Diarization => diarization_corpus(count, &DiarizationSynth::default(), seed, Split::Trn)?,
                SynthKind::Interview => interview_corpus(count, &InterviewSynth::default(), seed, Split::Trn)?,
            };
            save_corpus(&c, &output)?;
        }
        Command::Flag { input, output } => {
            let c = corpus(&input)?;
            let flagged = c.dialogues().iter().map(annotate_flags).collect::<Result<Vec<_>, _>>()?;
            save_corpus(&Corpus::new(flagged, c.split())?, &output)?;
        }
        Command::TrainDiarizer { variant, k, d, seed, epochs, corpus: path, labels, ckpt } => {
            let c = corpus(&path)?;
            let gold = load_labels(&c, &labels)?;
            let mut cfg = DiarizerConfig::for_corpus(&c);
            cfg.variant = variant;
            cfg.k = k;
            cfg.d = d;
            let train = TrainConfig { epochs, seed, ..TrainConfig::default() };
            let (model, report) = train_diarizer(&c, &gold, cfg, &train, exec)?;
            model.to_checkpoint().save(&ckpt)?;
            log::info!("wrote {}", ckpt.display());
            println!("epoch losses: {:?}", report.epoch_losses);
        }
        Command::Diarize { ckpt, corpus: path } => {
            let model = diarizer(&ckpt)?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for d in corpus(&path)?.dialogues() {
                let probs: Vec<Vec<f64>> = model.predict_dialogue(d)?.iter().map(|p| p.boundary_probs()).collect();
                writeln!(out, "{}", serde_json::json!({ "id": d.id(), "probs": probs }))?;
            }
        }
        Command::Repair { threshold, ckpt, input, output } => {
            let model = diarizer(&ckpt)?;
            let c = corpus(&input)?;
            let fixed = c.dialogues().iter().map(|d| repair(d, &model, threshold, model.config.scheme)).collect::<Result<Vec<_>, _>>()?;
            save_corpus(&Corpus::new(fixed, c.split())?, &output)?;
        }
        Command::EvalDiarizer { ckpt, corpus: path, labels } => {
            let model = diarizer(&ckpt)?;
            let c = corpus(&path)?;
            let gold = load_labels(&c, &labels)?;
            let f1 = evaluate_f1(&model, &c, &gold, exec)?;
            let heuristic = evaluate_f1(&FillerHeuristic::default(), &c, &gold, exec)?;
            print_json(&serde_json::json!({ "model": f1, "filler_heuristic": heuristic }))?;
        }
        Command::TrainGenerator { k, seed, epochs, lr, full, no_windowing, no_topic_store, corpus: path, ckpt } => {
            let c = corpus(&path)?;
            let vocab = Vocab::build(&c);
            let mut cfg = if full { GenConfig::new(vocab) } else { GenConfig::desk(vocab) };
            cfg.k = k;
            let cfg = cfg.degraded(!no_windowing, !no_topic_store);
            let train = TrainConfig { epochs, seed, learning_rate: lr, batch_size: 4, ..TrainConfig::default() };
            let (model, report) = train_generator(&c, cfg, &train, exec)?;
            model.to_checkpoint().save(&ckpt)?;
            log::info!("wrote {}", ckpt.display());
            println!("epoch losses: {:?}", report.epoch_losses);
        }
        Command::Chat { seed, ckpt } => chat(&generator(&ckpt)?, seed)?,
        Command::GenEval { ckpt, corpus: path } => {
            let acc = teacher_forced_accuracy(&generator(&ckpt)?, &corpus(&path)?, exec)?;
            print_json(&serde_json::json!({ "teacher_forced_accuracy": acc }))?;
        }
        Command::EvalStatic { ckpt, corpus: path } => {
            let r = static_eval(&generator(&ckpt)?, &corpus(&path)?, exec)?;
            print_json(&serde_json::json!({ "avg_bleu": r.avg_bleu, "avg_cosine": r.avg_cosine, "turns": r.turns.len() }))?;
        }
        Command::Ablate { sessions, seed, script, tau, report, bb, sw, ct } => {
            let replies: Vec<String> = fs::read_to_string(&script)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            let (bb, sw, ct) = (generator(&bb)?, generator(&sw)?, generator(&ct)?);
            let r = ablation_run(&[("BB", &bb), ("SW", &sw), ("CT", &ct)], sessions, &replies, seed, tau, exec)?;
            print!("{}", r.table());
            fs::write(&report, serde_json::to_string_pretty(&r)?)?;
        }
        Command::Serve { port, checkpoint, decode, seed, tau, log_dir } => {
            let decode = match decode {
                DecodeMode::Greedy => Decode::Greedy,
                DecodeMode::Sampled => Decode::Sampled { seed },
            };
            let cfg = ServiceConfig { port, checkpoint, decode, tau, log_dir };
            tokio::runtime::Runtime::new()?.block_on(interviewkit_service::serve(cfg)).map_err(|e| anyhow::anyhow!(e))?;
        }
    }
    Ok(())
}

fn chat(model: &GeneratorModel, seed: Option<u64>) -> Result<()> {
    let decode = seed.map_or(Decode::Greedy, |seed| Decode::Sampled { seed });
    let mut history: Vec<Utterance> = Vec::new();
    let mut store = TopicStore::new(model.config.h, model.config.d);
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        let turn = generate_turn(model, &history, &mut store, decode)?;
        println!("[{}] {}", turn.flag.as_str(), detokenize(turn.utterance.tokens()));
        history.push(turn.utterance);
        if turn.flag == FlagToken::E || history.len() >= 30 {
            return Ok(());
        }
        print!("> ");
        io::stdout().flush()?;
        let Some(line) = lines.next() else { return Ok(()) };
        let tokens = tokenize(&line?);
        if tokens.is_empty() {
            bail!("empty reply");
        }
        history.push(Utterance::new(SpeakerId::S2, tokens, Some(FlagToken::S2), false)?);
        if history.len() >= 30 {
            return Ok(());
        }
    }
}
