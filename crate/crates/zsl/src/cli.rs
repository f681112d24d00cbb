//! The `zsl` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or IO error, 3 numeric
//! failure (divergence, non-finite values).

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use zsl_core::inference::Split;
use zsl_core::model::{
    DEFAULT_BATCH_SIZE, DEFAULT_EMBED_DIM, DEFAULT_EPOCHS, DEFAULT_LR, DEFAULT_M0, DEFAULT_ROUNDS,
};
use zsl_core::training::TrainOptions;
use zsl_core::transductive::default_pool;
use zsl_core::{
    evaluate, init_model, predict_all, train_with, transduce, Dataset, HyperParams, LabelSpace,
    Metrics, TrainSet,
};

use crate::data::{
    generate_synthetic, load_checkpoint, load_dataset, resolve_manifest_path, save_checkpoint,
    save_dataset, Checkpoint, DataError, SynthConfig,
};
use crate::report::{append_pseudo, write_predictions, MetricsRecord, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Default checkpoint file name, placed next to the manifest.
pub const DEFAULT_CHECKPOINT: &str = "model.zslc";

#[derive(Debug, Parser)]
#[command(name = "zsl", version, about = "Zero-shot learning with a two-branch joint embedding")]
pub struct Cli {
    /// Cap on worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the seeded synthetic benchmark.
    Synth(SynthArgs),
    /// Train an inductive model.
    Train(TrainArgs),
    /// Train, then run pseudo-label calibration rounds on the test pool.
    Transduce(TransduceArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingArg {
    Conventional,
    Generalized,
}

impl From<SettingArg> for zsl_core::Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Conventional => zsl_core::Setting::Conventional,
            SettingArg::Generalized => zsl_core::Setting::Generalized,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives manifest.json and its data files.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 15)]
    pub seen_classes: usize,
    #[arg(long, default_value_t = 5)]
    pub unseen_classes: usize,
    #[arg(long, default_value_t = 100)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub visual_dim: usize,
    #[arg(long, default_value_t = 16)]
    pub semantic_dim: usize,
    /// Per-entry standard deviation of the feature noise.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct HpArgs {
    /// Weight of the classification term (required).
    #[arg(long)]
    pub lambda: f64,
    /// Weight of the L2 penalty (required).
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    /// Outer alternating iterations.
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_EMBED_DIM)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl HpArgs {
    fn hyperparams(&self) -> HyperParams {
        HyperParams {
            lr: self.lr,
            epochs: self.epochs,
            embed_dim: self.embed_dim,
            batch_size: self.batch,
            seed: self.seed,
            ..HyperParams::new(self.lambda, self.eta)
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest (file, directory, or path without `.json`).
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub hp: HpArgs,
    /// Setting for the metrics computed after training.
    #[arg(long, value_enum, default_value_t = SettingArg::Conventional)]
    pub setting: SettingArg,
    /// Where to write the checkpoint [default: model.zslc beside the manifest].
    #[arg(long)]
    pub checkpoint_out: Option<PathBuf>,
    /// Continue a run from a checkpoint, Adam state included.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// JSON Lines report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// JSON Lines training log, one record per outer iteration.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransduceArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub hp: HpArgs,
    /// Calibration rounds.
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    pub rounds: usize,
    /// Per-class pseudo-label budget of the first round.
    #[arg(long, default_value_t = DEFAULT_M0)]
    pub m0: usize,
    #[arg(long, value_enum, default_value_t = SettingArg::Conventional)]
    pub setting: SettingArg,
    #[arg(long)]
    pub checkpoint_out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// JSON Lines training log covering every round.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// CSV of every round's pseudo-labelled samples.
    #[arg(long)]
    pub pseudo_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint to evaluate [default: model.zslc beside the manifest].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SettingArg::Conventional)]
    pub setting: SettingArg,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// CSV of per-sample predictions.
    #[arg(long)]
    pub predictions_out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<zsl_core::Error> for CliError {
    fn from(e: zsl_core::Error) -> Self {
        match e {
            zsl_core::Error::Divergence { .. } | zsl_core::Error::NonFinite { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Core(inner) => inner.into(),
            DataError::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Diagnostics go to stderr as a single line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("zsl: {}", e.message().replace('\n', " "));
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        // Fails only if a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Transduce(a) => transduce_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    }
}

fn validate(hp: &HyperParams) -> Result<(), CliError> {
    hp.validate().map_err(|e| CliError::Usage(e.to_string()))
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn run_id(command: &str, seed: u64) -> String {
    format!("{command}-{seed:016x}")
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    resolve_manifest_path(manifest)
        .parent()
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Opens the report path early so an unwritable location fails before any
/// training happens.
fn probe_writable(path: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::File::create(p)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn needs_splits(ds: &Dataset, setting: zsl_core::Setting) -> bool {
    let s = ds.splits();
    !s.test_unseen.is_empty()
        && (setting == zsl_core::Setting::Conventional || !s.test_seen.is_empty())
}

fn print_metrics(m: &Metrics) {
    let rec = MetricsRecord::from(m);
    println!(
        "{}",
        serde_json::json!({ "setting": rec.setting, "ts": rec.ts, "tr": rec.tr, "H": rec.h })
    );
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        seen_classes: a.seen_classes,
        unseen_classes: a.unseen_classes,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        visual_dim: a.visual_dim,
        semantic_dim: a.semantic_dim,
        sigma: a.sigma,
        seed: a.seed,
    };
    let ds = generate_synthetic(&cfg)?;
    let path = save_dataset(&a.out, &ds)?;
    println!("{}", path.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let hp = a.hp.hyperparams();
    validate(&hp)?;
    probe_writable(a.report.as_deref())?;
    probe_writable(a.log.as_deref())?;
    let ds = load_dataset(&a.manifest)?;
    let setting: zsl_core::Setting = a.setting.into();

    let (params, start) = match &a.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            ckpt.check_dataset(&ds, path)?;
            if ckpt.params.embed_dim() != hp.embed_dim {
                return Err(CliError::Usage(format!(
                    "--embed-dim {} does not match checkpoint embed_dim {}",
                    hp.embed_dim,
                    ckpt.params.embed_dim()
                )));
            }
            if ckpt.completed_iterations > hp.epochs {
                return Err(CliError::Usage(format!(
                    "checkpoint already ran {} iterations, more than --epochs {}",
                    ckpt.completed_iterations, hp.epochs
                )));
            }
            (ckpt.params, ckpt.completed_iterations)
        }
        None => (
            init_model(ds.visual_dim(), ds.semantic_dim(), ds.num_classes(), &hp, hp.seed)?,
            0,
        ),
    };

    let started = Instant::now();
    let clock = || started.elapsed().as_secs_f64();
    let opts = TrainOptions {
        start_iteration: start,
        clock: Some(&clock),
    };
    let (params, log) = train_with(&ds, &TrainSet::labeled(&ds), &hp, params, opts)?;

    let ckpt_path = a
        .checkpoint_out
        .unwrap_or_else(|| manifest_dir(&a.manifest).join(DEFAULT_CHECKPOINT));
    let ckpt = Checkpoint {
        hp: hp.clone(),
        params,
        completed_iterations: hp.epochs,
    };
    save_checkpoint(&ckpt_path, &ckpt)?;

    let mut report = Report::new(run_id("train", hp.seed));
    report.config("train", &a.manifest, Some(setting.as_str()), &hp, unix_time());
    report.train_log(0, &log);
    if let Some(p) = &a.log {
        let mut lines = Report::new(report.run_id.clone());
        lines.train_log(0, &log);
        lines.write(p)?;
    }
    if needs_splits(&ds, setting) {
        let m = evaluate(&ckpt.params, &ds, setting)?;
        print_metrics(&m);
        report.metrics(0, &m);
    }
    if let Some(p) = &a.report {
        report.write(p)?;
    }
    Ok(())
}

fn transduce_cmd(a: TransduceArgs) -> Result<(), CliError> {
    let hp = HyperParams {
        rounds: a.rounds,
        m0: a.m0,
        ..a.hp.hyperparams()
    };
    validate(&hp)?;
    probe_writable(a.report.as_deref())?;
    probe_writable(a.log.as_deref())?;
    if let Some(p) = &a.pseudo_out {
        // Rounds are appended; start from an empty file.
        probe_writable(Some(p))?;
        std::fs::remove_file(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    }
    let ds = load_dataset(&a.manifest)?;
    let setting: zsl_core::Setting = a.setting.into();
    let pool = default_pool(&ds, setting);

    let started = Instant::now();
    let clock = || started.elapsed().as_secs_f64();
    let run = transduce(&ds, &hp, &pool, setting, Some(&clock))?;

    let ckpt_path = a
        .checkpoint_out
        .unwrap_or_else(|| manifest_dir(&a.manifest).join(DEFAULT_CHECKPOINT));
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            hp: hp.clone(),
            params: run.params.clone(),
            completed_iterations: hp.epochs,
        },
    )?;

    let mut report = Report::new(run_id("transduce", hp.seed));
    report.config("transduce", &a.manifest, Some(setting.as_str()), &hp, unix_time());
    report.train_log(0, &run.inductive_log);
    report.metrics(0, &run.inductive_metrics);
    for r in &run.rounds {
        report.train_log(r.round, &r.train_log);
        report.round(r);
        if let Some(p) = &a.pseudo_out {
            append_pseudo(p, &r.pseudo)?;
        }
    }
    if let Some(p) = &a.log {
        let mut lines = Report::new(report.run_id.clone());
        lines.train_log(0, &run.inductive_log);
        for r in &run.rounds {
            lines.train_log(r.round, &r.train_log);
        }
        lines.write(p)?;
    }
    let last = run.rounds.last();
    let final_metrics = last.map_or(&run.inductive_metrics, |r| &r.metrics);
    report.metrics(last.map_or(0, |r| r.round), final_metrics);
    print_metrics(final_metrics);
    if let Some(p) = &a.report {
        report.write(p)?;
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<(), CliError> {
    probe_writable(a.report.as_deref())?;
    probe_writable(a.predictions_out.as_deref())?;
    let ds = load_dataset(&a.manifest)?;
    let ckpt_path = a
        .checkpoint
        .clone()
        .unwrap_or_else(|| manifest_dir(&a.manifest).join(DEFAULT_CHECKPOINT));
    let ckpt = load_checkpoint(&ckpt_path)?;
    ckpt.check_dataset(&ds, &ckpt_path)?;
    let setting: zsl_core::Setting = a.setting.into();
    let m = evaluate(&ckpt.params, &ds, setting)?;

    if let Some(p) = &a.predictions_out {
        let space = LabelSpace::for_dataset(&ds, setting)?;
        let split = match setting {
            zsl_core::Setting::Conventional => Split::TestUnseen,
            zsl_core::Setting::Generalized => Split::TestAll,
        };
        let preds = predict_all(&ckpt.params, &ds, split, &space)?;
        write_predictions(p, &preds, ds.labels())?;
    }

    let mut report = Report::new(run_id("eval", ckpt.hp.seed));
    report.config("eval", &a.manifest, Some(setting.as_str()), &ckpt.hp, unix_time());
    report.metrics(0, &m);
    print_metrics(&m);
    if let Some(p) = &a.report {
        report.write(p)?;
    }
    Ok(())
}
