//! The `gazeintent` command line.

pub mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use gazeintent::control::{simulate, Mode, SimConfig, SimReport};
use gazeintent::eval::{
    chance_level, compare_curves, cv_sweep, low_chance_subset, render_svg, sweep_accuracy, train_f1_baseline, AccuracyCurve, EvalError, PlotSeries,
};
use gazeintent::exec::Execution;
use gazeintent::intent::{train_predictors, IntentError, IntentModels, PickFeatureSet, TrainOptions, TrainReport};
use gazeintent::synth::{generate_corpus, read_corpus, write_corpus, Corpus, ScenarioMix, SynthError};
use gazeintent::world::ActionKind;
use gazeintent_session::log::LogError;
use gazeintent_session::{replay, Server, SessionLog, SessionSummary};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for bad or unusable data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidParams(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(IntentError, EvalError, LogError, std::io::Error, serde_json::Error);

#[derive(Debug, Parser)]
#[command(name = "gazeintent", version, about = "Gaze-based pick-and-place intention prediction")]
pub struct Cli {
    /// TOML or JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic corpus (JSONL).
    GenCorpus(GenCorpusArgs),
    /// Train the pick and place classifiers.
    Train(TrainArgs),
    /// Accuracy as a function of time before the action.
    EvalSweep(EvalSweepArgs),
    /// Closed-loop run of the behaviour modes against the synthetic user.
    Simulate(SimulateArgs),
    /// Serve live sessions over TCP.
    Serve(ServeArgs),
    /// Replay a session log and verify it reproduces.
    Replay(ReplayArgs),
    /// Print the effective configuration as TOML.
    PrintConfig,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Number of decisions (picks plus places).
    #[arg(long, default_value_t = 912)]
    pub n: usize,
    /// Generator seed [default: config seed]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Scenario weights, e.g. "OneDominant=1" or "Alternating=0.5,OneDominant=0.5".
    #[arg(long)]
    pub mix: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for pick.json, place.json and train_report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Select (C, gamma) by cross-validated grid search.
    #[arg(long)]
    pub grid: bool,
    /// Skip the k-fold accuracy report.
    #[arg(long)]
    pub no_cv: bool,
    /// Train the pick model on F1 only.
    #[arg(long)]
    pub f1_only: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalSweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Model directory; not needed with --cv.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: ActionKind,
    /// Largest anticipation offset, seconds.
    #[arg(long, default_value_t = 4.0)]
    pub tmax: f64,
    /// Curve CSV (t_prior_s, accuracy, n).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Also evaluate the F1-only pick baseline and report the difference.
    #[arg(long)]
    pub baseline: bool,
    /// Evaluate out of sample with K-fold training instead of loading models.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub models: PathBuf,
    /// follow, rebel or random; repeat for several [default: all three]
    #[arg(long, value_parser = parse_mode)]
    pub mode: Vec<Mode>,
    #[arg(long, default_value_t = 30)]
    pub boards: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7575")]
    pub addr: String,
    /// Write one replayable log per session here.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Exit after this many sessions.
    #[arg(long)]
    pub max_sessions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
}

fn parse_kind(s: &str) -> Result<ActionKind, String> {
    s.parse::<ActionKind>().map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(&cfg, a, exec, out),
        Command::Train(a) => train(&cfg, a, exec, out),
        Command::EvalSweep(a) => eval_sweep(&cfg, a, exec, out),
        Command::Simulate(a) => simulate_cmd(&cfg, a, exec, out),
        Command::Serve(a) => serve(&cfg, a, out),
        Command::Replay(a) => replay_cmd(a, out),
        Command::PrintConfig => {
            write!(out, "{}", cfg.to_toml())?;
            Ok(())
        }
    }
}

fn echo_config(out: &mut dyn Write, cfg: &RunConfig, seed: u64) -> Result<(), CliError> {
    writeln!(out, "# seed {seed}")?;
    writeln!(out, "# config {}", serde_json::to_string(cfg)?)?;
    Ok(())
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    read_corpus(BufReader::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_models(path: &Path) -> Result<IntentModels, CliError> {
    Ok(IntentModels::load(path)?)
}

fn gen_corpus(cfg: &RunConfig, a: GenCorpusArgs, exec: Execution, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(m) = &a.mix {
        cfg.user.mix = ScenarioMix::parse(m).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    echo_config(out, &cfg, seed)?;
    let corpus = generate_corpus(&cfg.user, a.n, seed, &cfg.layout, &cfg.attention, exec)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_corpus(&corpus, &mut w)?;
    w.flush()?;
    writeln!(out, "wrote {} episodes to {}", corpus.episodes.len(), a.out.display())?;
    for (s, n) in corpus.scenario_histogram() {
        writeln!(out, "  {:<16} {n}", s.name())?;
    }
    Ok(())
}

fn train(cfg: &RunConfig, a: TrainArgs, exec: Execution, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut opts: TrainOptions = cfg.train;
    opts.grid |= a.grid;
    opts.cross_validate &= !a.no_cv;
    if a.f1_only {
        opts.pick_features = PickFeatureSet::F1Only;
    }
    echo_config(out, cfg, seed)?;
    let corpus = load_corpus(&a.corpus)?;
    let (models, report) = train_predictors(&corpus.episodes, &corpus.layout, &opts, &cfg.attention, seed, exec)?;
    std::fs::create_dir_all(&a.out)?;
    models.save(&a.out)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(a.out.join("train_report.json"))?), &report)?;
    print_train_report(out, &report, opts.grid, &models)?;
    writeln!(out, "models written to {} (hash {})", a.out.display(), models.hash())?;
    Ok(())
}

fn print_train_report(out: &mut dyn Write, r: &TrainReport, grid: bool, models: &IntentModels) -> Result<(), CliError> {
    for (name, k, m) in [("pick", &r.pick, &models.pick), ("place", &r.place, &models.place)] {
        write!(out, "{name}: {} examples ({} positive), {} support vectors", k.examples, k.positives, k.support_vectors)?;
        if let Some(cv) = &k.cv {
            write!(out, ", {}-fold per-object accuracy {:.4}", cv.k, cv.mean_accuracy)?;
        }
        writeln!(out)?;
        if grid {
            writeln!(out, "  selected C={} gamma={}", k.params.c, m.kernel.gamma().map_or("n/a".into(), |g| format!("{g:.6}")))?;
        }
    }
    Ok(())
}

fn subset_chance(corpus: &Corpus) -> f64 {
    let n = corpus.episodes.len().max(1) as f64;
    corpus.episodes.iter().map(|e| chance_level(e.candidates.len())).sum::<f64>() / n
}

fn eval_sweep(cfg: &RunConfig, a: EvalSweepArgs, exec: Execution, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.tmax >= 0.0 && a.tmax.is_finite()) {
        return Err(CliError::Config("--tmax must be non-negative".into()));
    }
    if a.baseline && a.kind != ActionKind::Pick {
        return Err(CliError::Config("--baseline applies to pick sweeps only".into()));
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    echo_config(out, cfg, seed)?;
    let corpus = load_corpus(&a.corpus)?;
    let subset = low_chance_subset(&corpus, a.kind);
    let layout = &corpus.layout;
    let f1_opts = TrainOptions { pick_features: PickFeatureSet::F1Only, cross_validate: false, ..cfg.train };
    let (curve, base) = match a.cv {
        Some(k) => {
            let opts = TrainOptions { cross_validate: false, ..cfg.train };
            let curve = cv_sweep(&corpus.episodes, layout, a.kind, a.tmax, &opts, &cfg.attention, k, seed, exec)?;
            let base =
                if a.baseline { Some(cv_sweep(&corpus.episodes, layout, a.kind, a.tmax, &f1_opts, &cfg.attention, k, seed, exec)?) } else { None };
            (curve, base)
        }
        None => {
            let dir = a.models.as_ref().ok_or_else(|| CliError::Config("--models is required without --cv".into()))?;
            let models = load_models(dir)?;
            models.check(&cfg.attention)?;
            let curve = sweep_accuracy(models.model(a.kind), &subset.episodes, layout, a.kind, a.tmax, &cfg.attention, exec)?;
            let base = if a.baseline {
                let m = train_f1_baseline(&corpus.episodes, layout, &f1_opts, &cfg.attention, seed, exec)?;
                Some(sweep_accuracy(&m, &subset.episodes, layout, a.kind, a.tmax, &cfg.attention, exec)?)
            } else {
                None
            };
            (curve, base)
        }
    };
    curve.write_csv(BufWriter::new(File::create(&a.out)?))?;
    let chance = subset_chance(&subset);
    writeln!(out, "{} low-chance episodes: {} (chance {:.3})", a.kind.name(), subset.episodes.len(), chance)?;
    print_curve(out, "model", &curve, a.tmax)?;
    if let Some(b) = &base {
        print_curve(out, "F1-only", b, a.tmax)?;
        let path = a.out.with_extension("baseline.csv");
        b.write_csv(BufWriter::new(File::create(&path)?))?;
        let cmp = compare_curves(&curve, b)?.window(0.5, 2.0);
        writeln!(
            out,
            "difference over [0.5, 2.0] s: mean {:+.4}, better at {} / worse at {} / tied at {} points, sign test p = {:.3e}",
            cmp.mean_difference, cmp.a_better, cmp.b_better, cmp.ties, cmp.sign_test_p
        )?;
    }
    if let Some(svg) = &a.svg {
        let mut series = vec![PlotSeries { label: "F1‖F2", curve: &curve, color: "#1f77b4" }];
        if a.kind == ActionKind::Place {
            series[0].label = "F1";
        }
        if let Some(b) = &base {
            series.push(PlotSeries { label: "F1 only", curve: b, color: "#d62728" });
        }
        let title = format!("{} accuracy vs time before action", a.kind.name());
        std::fs::write(svg, render_svg(&series, Some(chance), None, &title))?;
    }
    Ok(())
}

fn print_curve(out: &mut dyn Write, label: &str, c: &AccuracyCurve, tmax: f64) -> Result<(), CliError> {
    write!(out, "{label}:")?;
    for t in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        if t <= tmax + 1e-9 {
            if let Some(v) = c.at(t) {
                write!(out, " t={t:.1}s {v:.3}")?;
            }
        }
    }
    writeln!(out, "  trend rho={:.3}", c.trend(0.0, tmax.min(3.0)))?;
    Ok(())
}

fn simulate_cmd(cfg: &RunConfig, a: SimulateArgs, exec: Execution, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = a.seed.unwrap_or(cfg.seed);
    echo_config(out, cfg, seed)?;
    let models = load_models(&a.models)?;
    let modes = if a.mode.is_empty() { Mode::ALL.to_vec() } else { a.mode.clone() };
    let sim =
        SimConfig { boards: a.boards, seed, controller: cfg.controller, correction_speed: cfg.simulation.correction_speed, user: cfg.user.clone() };
    let report = simulate(&models, &cfg.layout, &sim, &modes, &cfg.predictor(), exec)?;
    print_sim(out, &report)?;
    if let Some(p) = &a.report {
        serde_json::to_writer_pretty(BufWriter::new(File::create(p)?), &report)?;
    }
    Ok(())
}

fn print_sim(out: &mut dyn Write, r: &SimReport) -> Result<(), CliError> {
    writeln!(out, "{} boards", r.boards)?;
    writeln!(out, "{:<8} {:>7} {:>8} {:>11} {:>11} {:>15}", "mode", "cycles", "match", "corrective", "commit s", "board time s")?;
    for m in &r.modes {
        writeln!(
            out,
            "{:<8} {:>7} {:>8.3} {:>11} {:>11.3} {:>15.1}",
            m.mode.map_or("-", |m| m.name()),
            m.cycles,
            m.match_rate,
            m.corrective_moves,
            m.mean_time_to_commit,
            m.completion_time
        )?;
    }
    Ok(())
}

fn serve(cfg: &RunConfig, a: ServeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let models = Arc::new(load_models(&a.models)?);
    let scfg = cfg.session_config();
    models.check(&scfg.predictor.attention)?;
    let mut server = Server::bind(&a.addr, models, scfg).map_err(|e| CliError::Data(format!("bind {}: {e}", a.addr)))?;
    if let Some(d) = a.log_dir {
        std::fs::create_dir_all(&d)?;
        server = server.with_log_dir(d);
    }
    writeln!(out, "listening on {}", server.local_addr()?)?;
    out.flush()?;
    server.run(a.max_sessions)?;
    Ok(())
}

fn replay_cmd(a: ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let log = SessionLog::read(BufReader::new(File::open(&a.log)?))?;
    let models = Arc::new(load_models(&a.models)?);
    let r = replay(&log, models)?;
    print_summary(out, &r.summary)?;
    writeln!(out, "replayed {} inputs, {} outputs; telemetry hash {} matches the recording", log.inputs.len(), r.messages.len(), r.telemetry_hash)?;
    Ok(())
}

fn print_summary(out: &mut dyn Write, s: &SessionSummary) -> Result<(), CliError> {
    writeln!(out, "summary {}", serde_json::to_string(s)?)?;
    Ok(())
}
