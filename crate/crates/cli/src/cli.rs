//! Command-line driver.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lachesis_core::experiment::{self, Checkpoint, EpochSelection, ExperimentConfig};
use lachesis_core::nn::{self, Hyperparameters, ModelKind};
use lachesis_core::synth::{self, SynthConfig};
use lachesis_core::trace::Benchmark;
use lachesis_core::{Scheme, metrics};

use crate::error::CliError;
use crate::{io, report, runner};

/// Number of seeded problems `gradcheck` runs.
pub const GRADCHECK_CONFIGS: u64 = 5;
/// `gradcheck` fails above this maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "lachesis",
    version,
    about = "Predict whether self-consistency voting over agent reasoning traces lands on the right answer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a trace file against the schema and trace invariants.
    Validate {
        /// Trace file (JSON).
        #[arg(value_name = "TRACES", required_unless_present = "traces_flag")]
        traces: Option<PathBuf>,
        /// Trace file, as a flag.
        #[arg(long = "traces", value_name = "PATH", conflicts_with = "traces")]
        traces_flag: Option<PathBuf>,
    },
    /// Generate a synthetic trace file with a planted convergence signal.
    Synth {
        /// Generator configuration (JSON).
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory; receives `traces.json`.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Cross-validate a model and train a checkpoint on all bugs.
    Train(TrainArgs),
    /// Score a trace file with a trained checkpoint.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        traces: PathBuf,
        /// Decision threshold on the predicted probability.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output directory for `scores.csv` and `eval.json`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Voting-confidence and all-positive baselines.
    Baseline {
        #[arg(long, value_name = "PATH")]
        traces: PathBuf,
        /// Confidence threshold; a bug is predicted correct when confidence >= threshold.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output directory for `baseline.json` and `baseline.csv`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Score bugs from the first few steps of every run, before any answer exists.
    Predict {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        traces: PathBuf,
        /// Steps kept from the start of every run.
        #[arg(long, value_name = "INT")]
        prefix_steps: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output directory for `predictions.csv`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed; falls back to LACHESIS_SEED.
    #[arg(long, env = "LACHESIS_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment configuration (JSON); without it the tuned preset for
    /// --model and --scheme is used.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["model", "scheme"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub traces: PathBuf,
    /// Output directory for metrics.json, metrics.csv, roc.csv and checkpoint.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub epoch_selection: Option<SelectionArg>,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Lstm,
    Gcn,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Lstm => ModelKind::Lstm,
            ModelArg::Gcn => ModelKind::Gcn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    S,
    F,
    Fa,
    Faa,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::S => Scheme::S,
            SchemeArg::F => Scheme::F,
            SchemeArg::Fa => Scheme::FA,
            SchemeArg::Faa => Scheme::FAA,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    Paper,
    Final,
}

/// Parses `args` and runs the command. Returns the process exit code;
/// `stdout`/`stderr` receive the human-readable summary and diagnostics.
pub fn run<I, T>(args: I, stdout: &mut String, stderr: &mut String) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                stderr.push_str(&text);
                2
            } else {
                stdout.push_str(&text);
                0
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            stderr.push_str(&format!("error: {e}\n"));
            e.exit_code()
        }
    }
}

fn check_threshold(threshold: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(CliError::Config(format!("threshold {threshold} is outside [0, 1]")))
    }
}

fn dispatch(command: Command, stdout: &mut String) -> Result<(), CliError> {
    match command {
        Command::Validate { traces, traces_flag } => {
            let path = traces.or(traces_flag).expect("clap requires one of them");
            let file = io::ingest(&path)?;
            stdout.push_str(&format!(
                "{} bugs OK (R={}, N={}; {} bugsinpy, {} defects4j; {} labeled correct)\n",
                file.bugs.len(),
                file.runs_per_bug,
                file.max_steps,
                file.count_by_benchmark(Benchmark::BugsInPy),
                file.count_by_benchmark(Benchmark::Defects4J),
                file.positive_count()
            ));
        }
        Command::Synth { config, out, seed } => {
            let mut cfg: SynthConfig = io::read_json(&config)?;
            if let Some(s) = seed.seed {
                cfg.seed = s;
            }
            let file = synth::generate(&cfg)?;
            let path = out.join("traces.json");
            io::write(&path, &io::traces_to_string(&file))?;
            stdout.push_str(&format!(
                "wrote {} bugs ({} labeled correct) to {}\n",
                file.bugs.len(),
                file.positive_count(),
                path.display()
            ));
        }
        Command::Train(args) => train(args, stdout)?,
        Command::Eval {
            checkpoint,
            traces,
            threshold,
            out,
        } => {
            check_threshold(threshold)?;
            let ckpt: Checkpoint = io::read_json(&checkpoint)?;
            let file = io::ingest(&traces)?;
            let scores = experiment::score_with_checkpoint(&ckpt, &file, threshold, None)?;
            let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
            let labels: Vec<bool> = scores.iter().map(|s| s.label).collect();
            let cls = metrics::evaluate(&values, &labels, threshold)?;
            let auc = metrics::roc_auc(&values, &labels).ok().map(|r| r.auc);
            let summary = experiment::MethodMetrics {
                method: format!("{} {}", ckpt.hyperparameters.model, ckpt.scheme),
                accuracy: cls.accuracy,
                roc_auc: auc,
                precision: cls.precision,
                recall: cls.recall,
            };
            stdout.push_str(&format!(
                "{}: {} bugs, accuracy {:.4}, roc_auc {}, precision {:.4}, recall {:.4}\n",
                summary.method,
                scores.len(),
                summary.accuracy,
                auc.map_or_else(|| "-".into(), |a| format!("{a:.4}")),
                summary.precision,
                summary.recall
            ));
            if let Some(dir) = out {
                io::write(&dir.join("scores.csv"), &report::scores_csv(&scores))?;
                io::write(&dir.join("eval.json"), &io::to_json(&summary))?;
            }
        }
        Command::Baseline { traces, threshold, out } => {
            check_threshold(threshold)?;
            let file = io::ingest(&traces)?;
            let rep = experiment::baseline_report(&file, threshold)?;
            stdout.push_str(&report::baseline_table(&rep));
            if let Some(dir) = out {
                io::write(&dir.join("baseline.json"), &io::to_json(&rep))?;
                io::write(&dir.join("baseline.csv"), &report::baseline_csv(&rep))?;
            }
        }
        Command::Gradcheck { model, seed } => {
            let kind = ModelKind::from(model);
            let base = seed.seed.unwrap_or(0);
            let mut worst = 0.0f64;
            for i in 0..GRADCHECK_CONFIGS {
                let hp = gradcheck_config(kind, i);
                let r = nn::grad_check(kind, &hp, base + i)?;
                stdout.push_str(&format!(
                    "{kind} layers={} hidden={} seed={}: {} values, max relative error {:.3e} at {}\n",
                    hp.layers, hp.hidden_dim, r.seed, r.values_checked, r.max_relative_error, r.worst_parameter
                ));
                worst = worst.max(r.max_relative_error);
            }
            if worst >= GRADCHECK_TOLERANCE {
                return Err(CliError::Numeric(format!(
                    "gradient check failed: max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"
                )));
            }
            stdout.push_str(&format!(
                "OK: max relative error {worst:.3e} < {GRADCHECK_TOLERANCE:e}\n"
            ));
        }
        Command::Predict {
            checkpoint,
            traces,
            prefix_steps,
            threshold,
            out,
        } => {
            check_threshold(threshold)?;
            let ckpt: Checkpoint = io::read_json(&checkpoint)?;
            if !matches!(ckpt.scheme, Scheme::F | Scheme::FA) {
                return Err(CliError::Config(format!(
                    "prefix prediction needs a checkpoint trained with scheme F or F+A, not {}",
                    ckpt.scheme
                )));
            }
            let file = io::ingest(&traces)?;
            let scores = experiment::score_with_checkpoint(&ckpt, &file, threshold, Some(prefix_steps))?;
            let predicted = scores.iter().filter(|s| s.predicted).count();
            stdout.push_str(&format!(
                "scored {} bugs from the first {prefix_steps} steps; {predicted} predicted correct\n",
                scores.len()
            ));
            if let Some(dir) = out {
                io::write(&dir.join("predictions.csv"), &report::scores_csv(&scores))?;
            }
        }
    }
    Ok(())
}

/// Small configurations cycled through by `gradcheck`.
pub fn gradcheck_config(model: ModelKind, index: u64) -> Hyperparameters {
    let (layers, hidden_dim) = [(1, 4), (2, 4), (1, 3), (2, 2), (3, 4)][(index % 5) as usize];
    Hyperparameters {
        model,
        layers,
        hidden_dim,
        batch: 1,
        dropout: 0.0,
        epochs: 1,
        learning_rate: 1e-3,
    }
}

pub fn experiment_config(args: &TrainArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => io::read_json::<ExperimentConfig>(path)?,
        None => {
            let model = args.model.map_or(ModelKind::Gcn, ModelKind::from);
            let scheme = args.scheme.map_or(Scheme::FA, Scheme::from);
            ExperimentConfig::preset(model, scheme)?
        }
    };
    if let Some(seed) = args.seed.seed {
        config.seed = seed;
    }
    if let Some(t) = args.threshold {
        config.threshold = t;
    }
    if let Some(sel) = args.epoch_selection {
        config.epoch_selection = match sel {
            SelectionArg::Paper => EpochSelection::PaperPeakTest,
            SelectionArg::Final => EpochSelection::FinalEpoch,
        };
    }
    config.validate()?;
    Ok(config)
}

fn train(args: TrainArgs, stdout: &mut String) -> Result<(), CliError> {
    let config = experiment_config(&args)?;
    let file = io::ingest(&args.traces)?;
    let (prepared, rep) = runner::run_experiment(&config, &file, args.jobs)?;
    let model = experiment::train_full(&config, &prepared)?;
    if !model.params().all_finite() {
        return Err(CliError::Numeric("training produced non-finite parameters".into()));
    }
    let checkpoint = Checkpoint::new(&config, &prepared, &model);

    io::write(&args.out.join("metrics.json"), &io::to_json(&rep))?;
    io::write(&args.out.join("metrics.csv"), &report::metrics_csv(&rep))?;
    io::write(&args.out.join("roc.csv"), &report::roc_csv(&rep))?;
    io::write(&args.out.join("checkpoint.json"), &io::to_json(&checkpoint))?;

    let auc = rep.mean.roc_auc.map_or_else(|| "-".into(), |a| format!("{a:.4}"));
    stdout.push_str(&format!(
        "{} ({} folds, seed {}): accuracy {:.4}, roc_auc {auc}, precision {:.4}, recall {:.4}\nwrote metrics and checkpoint to {}\n",
        rep.method,
        rep.folds.len(),
        config.seed,
        rep.mean.accuracy,
        rep.mean.precision,
        rep.mean.recall,
        args.out.display()
    ));
    Ok(())
}
