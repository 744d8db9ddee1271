//! Single command-line entry point wiring the whole forecasting pipeline:
//! synthesize raw data, prepare the dataset, train, tune, evaluate, run
//! ablation studies, and serve predictions from a replayed feed.
//!
//! One JSON document configures every stage; flags override the file. Every
//! failure exits nonzero with one machine-readable JSON line on stderr, and
//! every success prints one JSON summary line on stdout.

mod commands;
mod config;
mod context;
mod error;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::config::{
    AppConfig, Effective, Family, FamilyChoice, NaiveArg, SinkChoice, SpeedSetting, Study, Sweep,
    TargetArg,
};
use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "parkcast",
    version,
    about = "Parking-garage occupancy and flux forecasting pipeline"
)]
struct Cli {
    /// JSON configuration document; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed override; every internal random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Verbose logging (repeat for more detail).
    #[arg(long, short = 'v', global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic city into the data directory.
    Synth(SynthArgs),
    /// Parse raw CSVs, clean, split chronologically, persist the dataset.
    Prepare(PrepareArgs),
    /// Fit the configured model families on every target; save artifacts.
    Train(TrainArgs),
    /// Run a hyperparameter sweep; export the heatmap and learning curves.
    Tune(TuneArgs),
    /// Score trained artifacts on the held-out test span.
    Evaluate(EvaluateArgs),
    /// Feature-elimination and data-halving studies.
    Ablate(AblateArgs),
    /// Replay the feed and emit prediction bundles to the selected sinks.
    Serve(ServeArgs),
    /// Replay a held-out window at full speed and score the bundles.
    #[command(name = "replay-eval")]
    ReplayEval(ReplayEvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Days of data to generate.
    #[arg(long)]
    days: Option<u32>,
    /// Garage capacity (parking spaces).
    #[arg(long)]
    capacity: Option<u32>,
    /// Number of traffic measurement loops.
    #[arg(long)]
    locations: Option<u32>,
    /// First minute of the run, ISO-8601 UTC.
    #[arg(long)]
    start: Option<String>,
    /// Busyness noise level (log-normal sigma).
    #[arg(long)]
    noise: Option<f64>,
}

impl SynthArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(days) = self.days {
            cfg.synth.days = days;
        }
        if let Some(capacity) = self.capacity {
            cfg.synth.capacity = capacity;
        }
        if let Some(locations) = self.locations {
            cfg.synth.locations = locations;
        }
        if let Some(start) = &self.start {
            cfg.synth.start = start.clone();
        }
        if let Some(noise) = self.noise {
            cfg.synth.noise_level = noise;
        }
    }
}

#[derive(Args)]
struct PrepareArgs {
    /// Low-pass cutoff for traffic smoothing (fraction of Nyquist).
    #[arg(long)]
    filter_cutoff: Option<f64>,
    /// Butterworth order for traffic smoothing (1 or 2).
    #[arg(long)]
    filter_order: Option<usize>,
    /// Occupancy feed cadence in minutes (spacing of the lag features).
    #[arg(long)]
    occupancy_cadence: Option<i64>,
    /// Training fraction of the chronological split.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Validation fraction of the chronological split.
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Test fraction of the chronological split.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Garage capacity override for state derivation.
    #[arg(long)]
    capacity: Option<u32>,
    /// Cars already inside at the first grid minute.
    #[arg(long)]
    initial_occupancy: Option<u32>,
    /// Grid length in days.
    #[arg(long)]
    days: Option<u32>,
}

impl PrepareArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(cutoff) = self.filter_cutoff {
            cfg.features.filter_cutoff = cutoff;
        }
        if let Some(order) = self.filter_order {
            cfg.features.filter_order = order;
        }
        if let Some(cadence) = self.occupancy_cadence {
            cfg.features.occupancy_cadence_min = cadence;
        }
        if let Some(f) = self.train_fraction {
            cfg.split.train = f;
        }
        if let Some(f) = self.validation_fraction {
            cfg.split.validation = f;
        }
        if let Some(f) = self.test_fraction {
            cfg.split.test = f;
        }
        if let Some(capacity) = self.capacity {
            cfg.prepare.capacity = Some(capacity);
        }
        if let Some(initial) = self.initial_occupancy {
            cfg.prepare.initial_occupancy = initial;
        }
        if let Some(days) = self.days {
            cfg.prepare.days = Some(days);
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Which model families to fit.
    #[arg(long, value_enum)]
    family: Option<FamilyChoice>,
    /// Targets to fit (repeatable); all three when omitted.
    #[arg(long, value_enum)]
    target: Vec<TargetArg>,
    /// Training epochs for the network family.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate for the network family.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Mini-batch size for the network family.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Ensemble size for the forest family.
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum tree depth for the forest family.
    #[arg(long)]
    depth: Option<usize>,
    /// Keep every n-th candidate training row.
    #[arg(long)]
    train_stride: Option<usize>,
    /// Keep every n-th candidate validation row.
    #[arg(long)]
    validation_stride: Option<usize>,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(choice) = self.family {
            cfg.train.families = choice.families();
        }
        if !self.target.is_empty() {
            cfg.train.targets = self.target.iter().map(|&t| t.into()).collect();
        }
        if let Some(epochs) = self.epochs {
            cfg.train.network.epochs = epochs;
        }
        if let Some(rate) = self.learning_rate {
            cfg.train.network.learning_rate = rate;
        }
        if let Some(batch) = self.batch_size {
            cfg.train.network.batch_size = batch;
        }
        if let Some(trees) = self.trees {
            cfg.train.forest.n_trees = trees;
        }
        if let Some(depth) = self.depth {
            cfg.train.forest.max_depth = depth;
        }
        if let Some(stride) = self.train_stride {
            cfg.train.train_stride = stride;
        }
        if let Some(stride) = self.validation_stride {
            cfg.train.validation_stride = stride;
        }
    }
}

#[derive(Args)]
struct TuneArgs {
    /// Which sweep to run.
    #[arg(long, value_enum)]
    sweep: Option<Sweep>,
    /// Target the sweep scores on.
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
}

impl TuneArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(sweep) = self.sweep {
            cfg.tune.sweep = sweep;
        }
        if let Some(target) = self.target {
            cfg.tune.target = target.into();
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Which model families to score.
    #[arg(long, value_enum)]
    family: Option<FamilyChoice>,
    /// Targets to score (repeatable); all three when omitted.
    #[arg(long, value_enum)]
    target: Vec<TargetArg>,
    /// Naive benchmark the scaled scores compare against.
    #[arg(long, value_enum)]
    naive: Option<NaiveArg>,
    /// Keep every n-th candidate test row.
    #[arg(long)]
    test_stride: Option<usize>,
    /// Measure single-row prediction latency and embed it in the report.
    #[arg(long)]
    measure_latency: bool,
    /// Repetitions for the latency measurement.
    #[arg(long)]
    latency_repeats: Option<usize>,
}

impl EvaluateArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(choice) = self.family {
            cfg.train.families = choice.families();
        }
        if !self.target.is_empty() {
            cfg.train.targets = self.target.iter().map(|&t| t.into()).collect();
        }
        if let Some(naive) = self.naive {
            cfg.evaluate.naive = naive;
        }
        if let Some(stride) = self.test_stride {
            cfg.evaluate.test_stride = stride;
        }
        if self.measure_latency {
            cfg.evaluate.measure_latency = true;
        }
        if let Some(repeats) = self.latency_repeats {
            cfg.evaluate.latency_repeats = repeats;
        }
    }
}

#[derive(Args)]
struct AblateArgs {
    /// Model family the studies train.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Which study to run.
    #[arg(long, value_enum)]
    study: Option<Study>,
    /// Target for the feature-elimination study.
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    /// Number of halving levels.
    #[arg(long)]
    levels: Option<usize>,
}

impl AblateArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(family) = self.family {
            cfg.ablate.family = family;
        }
        if let Some(study) = self.study {
            cfg.ablate.study = study;
        }
        if let Some(target) = self.target {
            cfg.ablate.elimination_target = target.into();
        }
        if let Some(levels) = self.levels {
            cfg.ablate.halving_levels = levels;
        }
    }
}

#[derive(Args)]
struct ServeArgs {
    /// Model family to serve.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Replay window length in days, taken from the end of the dataset.
    #[arg(long)]
    window_days: Option<f64>,
    /// Nominal occupancy feed cadence, minutes.
    #[arg(long)]
    cadence_min: Option<i64>,
    /// Uniform jitter on each occupancy gap, minutes.
    #[arg(long)]
    jitter_min: Option<i64>,
    /// Seed for the jitter sequence.
    #[arg(long)]
    jitter_seed: Option<u64>,
    /// Minutes between prediction ticks.
    #[arg(long)]
    tick_min: Option<i64>,
    /// Replay pacing: "instant" or a positive speed factor.
    #[arg(long, value_parser = SpeedSetting::parse_flag)]
    speed: Option<SpeedSetting>,
    /// Where bundles go.
    #[arg(long, value_enum)]
    sink: Option<SinkChoice>,
    /// Bind address for the HTTP sink (port 0 picks an ephemeral port).
    #[arg(long)]
    bind: Option<String>,
    /// Seconds to keep the HTTP endpoint up after the replay finishes.
    #[arg(long)]
    linger_s: Option<u64>,
}

impl ServeArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(family) = self.family {
            cfg.serve.family = family;
        }
        if let Some(days) = self.window_days {
            cfg.serve.window_days = days;
        }
        if let Some(cadence) = self.cadence_min {
            cfg.serve.occupancy_cadence_min = cadence;
        }
        if let Some(jitter) = self.jitter_min {
            cfg.serve.occupancy_jitter_min = jitter;
        }
        if let Some(seed) = self.jitter_seed {
            cfg.serve.jitter_seed = Some(seed);
        }
        if let Some(tick) = self.tick_min {
            cfg.serve.tick_interval_min = tick;
        }
        if let Some(speed) = self.speed {
            cfg.serve.speed = speed;
        }
        if let Some(sink) = self.sink {
            cfg.serve.sink = sink;
        }
        if let Some(bind) = &self.bind {
            cfg.serve.bind = bind.clone();
        }
        if let Some(linger) = self.linger_s {
            cfg.serve.linger_s = linger;
        }
    }
}

#[derive(Args)]
struct ReplayEvalArgs {
    /// Model family to serve and score.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Replay window length in days.
    #[arg(long)]
    window_days: Option<f64>,
    /// Nominal occupancy feed cadence, minutes.
    #[arg(long)]
    cadence_min: Option<i64>,
    /// Uniform jitter on each occupancy gap, minutes.
    #[arg(long)]
    jitter_min: Option<i64>,
    /// Seed for the jitter sequence.
    #[arg(long)]
    jitter_seed: Option<u64>,
}

impl ReplayEvalArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(family) = self.family {
            cfg.serve.family = family;
        }
        if let Some(days) = self.window_days {
            cfg.serve.window_days = days;
        }
        if let Some(cadence) = self.cadence_min {
            cfg.serve.occupancy_cadence_min = cadence;
        }
        if let Some(jitter) = self.jitter_min {
            cfg.serve.occupancy_jitter_min = jitter;
        }
        if let Some(seed) = self.jitter_seed {
            cfg.serve.jitter_seed = Some(seed);
        }
    }
}

fn run(cli: Cli) -> CliResult<serde_json::Value> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        cfg.paths.out_dir = dir;
    }
    match &cli.command {
        Command::Synth(args) => args.apply(&mut cfg),
        Command::Prepare(args) => args.apply(&mut cfg),
        Command::Train(args) => args.apply(&mut cfg),
        Command::Tune(args) => args.apply(&mut cfg),
        Command::Evaluate(args) => args.apply(&mut cfg),
        Command::Ablate(args) => args.apply(&mut cfg),
        Command::Serve(args) => args.apply(&mut cfg),
        Command::ReplayEval(args) => args.apply(&mut cfg),
    }
    let eff = Effective::resolve(cfg)?;
    match &cli.command {
        Command::Synth(_) => commands::synth::run(&eff),
        Command::Prepare(_) => commands::prepare::run(&eff),
        Command::Train(_) => commands::train::run(&eff),
        Command::Tune(_) => commands::tune::run(&eff),
        Command::Evaluate(_) => commands::evaluate::run(&eff),
        Command::Ablate(_) => commands::ablate::run(&eff),
        Command::Serve(_) => commands::serve::run(&eff),
        Command::ReplayEval(_) => commands::replay_eval::run(&eff),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
