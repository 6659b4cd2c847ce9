//! The `wqnet` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use wqnet_core::data::{generate_synthetic, Sample, SyntheticConfig, Task, WqiClass};
use wqnet_core::evaluation::{nested_cv, stratified_kfold_cv, GridSpec, ScoreKind};
use wqnet_core::models::{default_hyper, evaluate, train_pipeline, HeldOutReport, PipelineConfig, PipelineRecipe};
use wqnet_core::resample::SmoteConfig;
use wqnet_core::training::TrainConfig;

use crate::artifact::{load_artifact, save_artifact};
use crate::io::{load_csv, write_csv};
use crate::report;
use crate::service;

pub const HISTORY_FILE: &str = "history.csv";
pub const CV_FILE: &str = "cv.csv";

#[derive(Debug, Parser)]
#[command(name = "wqnet", version, about = "Water-quality index models: data, training, evaluation and serving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Classify,
    Regress,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Classify => Task::Classification,
            TaskArg::Regress => Task::Regression,
        }
    }
}

#[derive(Debug, clap::Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    temperature: f64,
    #[arg(long, allow_negative_numbers = true)]
    ph: f64,
    #[arg(long, allow_negative_numbers = true)]
    ec: f64,
    #[arg(long = "do", allow_negative_numbers = true)]
    dissolved_oxygen: f64,
}

impl SampleArgs {
    fn sample(&self) -> Sample {
        Sample::new(self.temperature, self.ph, self.ec, self.dissolved_oxygen)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset in the canonical CSV format.
    GenData {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write its artifact directory.
    Train {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Oversample minority classes (classification only).
        #[arg(long)]
        smote: bool,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 15)]
        patience: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Score a saved model on a labelled CSV file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// k-fold cross-validation; writes cv.csv beside the data file.
    Cv {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Nested cross-validation over the default hyperparameter grid.
    NestedCv {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        outer: usize,
        #[arg(long, default_value_t = 3)]
        inner: usize,
    },
    /// Predict the WQI of one sample with a regression model.
    Predict(SampleArgs),
    /// Classify one sample with a classification model.
    Classify(SampleArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        regressor: Option<PathBuf>,
        #[arg(long)]
        addr: Option<String>,
    },
}

const CV_SEED: u64 = 42;

/// Runs the CLI and returns the process exit code: 0 on success, 2 for
/// usage errors, 1 for anything else.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn class_counts(codes: &[u8]) -> String {
    WqiClass::ALL
        .iter()
        .map(|c| format!("{} {}", c.label(), codes.iter().filter(|&&x| x == c.code()).count()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn print_held_out(out: &mut dyn Write, report: &HeldOutReport) -> anyhow::Result<()> {
    match report {
        HeldOutReport::Regression { metrics } => write!(out, "{}", report::regression_summary(metrics))?,
        HeldOutReport::Classification { confusion, report: r } => {
            write!(out, "{}", report::classification_table(r))?;
            writeln!(out)?;
            write!(out, "{}", report::confusion_table(confusion))?;
        }
    }
    Ok(())
}

fn beside(data: &Path, name: &str) -> PathBuf {
    data.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}

fn execute(command: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::GenData { n, seed, out: path } => {
            let ds = generate_synthetic(&SyntheticConfig { n, seed, ..SyntheticConfig::default() })?;
            write_csv(&path, &ds)?;
            let codes = ds.to_classification()?.class_codes();
            writeln!(out, "wrote {} rows to {} ({})", ds.len(), path.display(), class_counts(&codes))?;
        }
        Command::Train { task, data, out: dir, smote, epochs, batch, patience, seed } => {
            let task = Task::from(task);
            if smote && task != Task::Classification {
                bail!("--smote applies to classification only");
            }
            let ds = load_csv(&data, task)?;
            let config = PipelineConfig {
                smote: smote.then(|| SmoteConfig { seed, ..SmoteConfig::default() }),
                train: TrainConfig { epochs, batch_size: batch, patience, ..TrainConfig::default() },
                ..PipelineConfig::default()
            }
            .seeded(seed);
            let (artifact, history) = train_pipeline(&ds, task, &config)?;
            save_artifact(&artifact, &dir)?;
            let hpath = dir.join(HISTORY_FILE);
            std::fs::write(&hpath, report::history_csv(&history)).with_context(|| hpath.display().to_string())?;
            let t = artifact.training;
            writeln!(out, "task        {task:?}")?;
            writeln!(out, "epochs run  {} (best {}{})", t.epochs_run, t.best_epoch, if t.stopped_early { ", stopped early" } else { "" })?;
            writeln!(out, "artifact    {}", dir.display())?;
            writeln!(out)?;
            if let Some(r) = &artifact.held_out {
                writeln!(out, "held-out evaluation")?;
                print_held_out(out, r)?;
            }
        }
        Command::Eval { model, data } => {
            let artifact = load_artifact(&model)?;
            let ds = load_csv(&data, artifact.task)?;
            print_held_out(out, &evaluate(&artifact, &ds)?)?;
        }
        Command::Cv { task, data, folds, seed } => {
            let task = Task::from(task);
            let ds = load_csv(&data, task)?;
            let (score, smote) = match task {
                Task::Classification => (ScoreKind::Accuracy, Some(SmoteConfig { seed, ..SmoteConfig::default() })),
                Task::Regression => (ScoreKind::R2, None),
            };
            let recipe = PipelineRecipe { config: PipelineConfig { smote, ..PipelineConfig::default().seeded(seed) } };
            let rep = stratified_kfold_cv(&ds, folds, seed, &default_hyper(task), &recipe, score)?;
            let name = if score == ScoreKind::Accuracy { "Accuracy" } else { "R2" };
            write!(out, "{}", report::cv_table(&rep.summary, name))?;
            let path = beside(&data, CV_FILE);
            std::fs::write(&path, report::cv_csv(&rep.summary, score.name())).with_context(|| path.display().to_string())?;
        }
        Command::NestedCv { task, data, outer, inner } => {
            if task != TaskArg::Regress {
                bail!("nested-cv supports --task regress only");
            }
            let ds = load_csv(&data, Task::Regression)?;
            let recipe = PipelineRecipe { config: PipelineConfig::default().seeded(CV_SEED) };
            let rep = nested_cv(&ds, outer, inner, &GridSpec::default(), CV_SEED, &recipe, ScoreKind::R2)?;
            write!(out, "{}", report::nested_table(&rep))?;
            let path = beside(&data, CV_FILE);
            std::fs::write(&path, report::nested_csv(&rep)).with_context(|| path.display().to_string())?;
        }
        Command::Predict(args) => {
            let artifact = load_artifact(&args.model)?;
            let r = service::predict_response(&artifact, &args.sample())?;
            writeln!(out, "{}", serde_json::to_string(&r)?)?;
        }
        Command::Classify(args) => {
            let artifact = load_artifact(&args.model)?;
            let r = service::classify_response(&artifact, &args.sample())?;
            writeln!(out, "{}", serde_json::to_string(&r)?)?;
        }
        Command::Serve { classifier, regressor, addr } => {
            let state = service::AppState::load(classifier.as_deref(), regressor.as_deref())?;
            let addr = service::resolve_addr(addr.as_deref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state, addr))?;
        }
    }
    Ok(())
}
