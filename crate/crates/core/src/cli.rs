//! The `taskprior` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::data_io::{load_features, save_report, DatasetManifest, FeatureFormat, FeatureMatrix, Report};
use crate::eval::{compare_models, ComparisonReport};
use crate::kernel::centered_cosine_kernel;
use crate::prior::{TaskPrior, DEFAULT_TEMPERATURE};
use crate::probe::{evaluate_over_tasks, DEFAULT_SPLIT};
use crate::sampler::prefix_sample;

#[derive(Debug, Parser)]
#[command(name = "taskprior", version, about = "Evaluate representations over a prior of downstream tasks")]
pub struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "TASKPRIOR_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form mean and variance of kernel alignment under the prior.
    Analyze(AnalyzeArgs),
    /// Draw one labeling from the prior with the prefix sampler.
    Sample(SampleArgs),
    /// Train linear probes on tasks sampled from the prior.
    ProbeEval(ProbeEvalArgs),
    /// Score every model in a manifest against one model's prior.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Features that define the task prior (.npy or .csv).
    #[arg(long)]
    pub prior: PathBuf,
    /// Prior temperature.
    #[arg(short = 'T', long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    /// Feature file format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<FeatureFormat>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Features of the model being evaluated.
    #[arg(long)]
    pub model: PathBuf,
    /// Include the i = j terms of the trace.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub include_diagonal: bool,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Number of classes.
    #[arg(short = 'q', long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Visit samples in a seeded random order instead of row order.
    #[arg(long)]
    pub shuffle: bool,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Number of classes per task.
    #[arg(short = 'q', long, default_value_t = 2)]
    pub classes: usize,
    /// Number of sampled tasks.
    #[arg(long, default_value_t = 100)]
    pub n_tasks: usize,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = DEFAULT_SPLIT)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProbeEvalArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Features the probes are trained on.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub tasks: TaskArgs,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// JSON manifest listing the model feature files.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model whose features define the prior.
    #[arg(long)]
    pub prior_model: String,
    /// Prior temperature.
    #[arg(short = 'T', long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[command(flatten)]
    pub tasks: TaskArgs,
    /// Output JSON path.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Parses `args` and runs the command. Usage errors and failures exit 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Sample(a) => sample(a),
        Command::ProbeEval(a) => probe_eval(a),
        Command::Compare(a) => compare(a),
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        bail!("temperature must be positive and finite, got {t}");
    }
    Ok(())
}

fn check_tasks(tasks: &TaskArgs) -> Result<()> {
    if tasks.classes < 1 {
        bail!("--classes must be at least 1");
    }
    if tasks.n_tasks == 0 {
        bail!("--n-tasks must be at least 1");
    }
    if !(tasks.split > 0.0 && tasks.split < 1.0) {
        bail!("--split must lie strictly between 0 and 1, got {}", tasks.split);
    }
    Ok(())
}

fn read_features(path: &Path, format: Option<FeatureFormat>) -> Result<FeatureMatrix> {
    let format = match format.or_else(|| FeatureFormat::from_path(path)) {
        Some(f) => f,
        None => bail!("cannot tell the format of {}; pass --format", path.display()),
    };
    load_features(path, format).with_context(|| format!("loading {}", path.display()))
}

fn read_pair(prior: &PriorArgs, model: &Path) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let p = read_features(&prior.prior, prior.format)?;
    let m = read_features(model, prior.format)?;
    if p.n_samples() != m.n_samples() {
        bail!(
            "sample count mismatch: prior {} has shape {}x{} but model {} has shape {}x{}",
            prior.prior.display(),
            p.n_samples(),
            p.dim(),
            model.display(),
            m.n_samples(),
            m.dim()
        );
    }
    Ok((p, m))
}

fn build_prior(features: &FeatureMatrix, temperature: f64) -> Result<TaskPrior> {
    let kernel = centered_cosine_kernel(features).with_context(|| format!("kernel of {}", features.model_id()))?;
    Ok(TaskPrior::new(kernel, temperature)?)
}

/// Writes next to the target and renames, so a failed run leaves no file.
fn write_report(report: Report, path: &Path) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    save_report(&report, &tmp).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    check_temperature(a.prior.temperature)?;
    let (p, m) = read_pair(&a.prior, &a.model)?;
    let prior = build_prior(&p, a.prior.temperature)?;
    let model_kernel = centered_cosine_kernel(&m).with_context(|| format!("kernel of {}", m.model_id()))?;
    let stats = prior.task_stats(&model_kernel, a.include_diagonal)?;
    println!("mean\t{:e}", stats.mean);
    println!("variance\t{:e}", stats.variance);
    write_report(Report::TaskStats(stats), &a.output)
}

fn sample(a: SampleArgs) -> Result<()> {
    check_temperature(a.prior.temperature)?;
    if a.classes < 1 {
        bail!("--classes must be at least 1");
    }
    let p = read_features(&a.prior.prior, a.prior.format)?;
    let prior = build_prior(&p, a.prior.temperature)?.with_factor();
    let labeling = prefix_sample(&prior, a.classes, a.seed, a.shuffle)?;
    println!("samples\t{}", labeling.len());
    println!("distinct classes\t{}", labeling.distinct_classes());
    write_report(Report::Labeling(labeling), &a.output)
}

fn probe_eval(a: ProbeEvalArgs) -> Result<()> {
    check_temperature(a.prior.temperature)?;
    check_tasks(&a.tasks)?;
    let (p, m) = read_pair(&a.prior, &a.model)?;
    let prior = build_prior(&p, a.prior.temperature)?;
    let t = &a.tasks;
    let report = evaluate_over_tasks(&m, &prior, t.classes, t.n_tasks, t.split, t.seed)?;
    println!("model\tmean accuracy\tvariance\tvalid tasks");
    println!(
        "{}\t{:.4}\t{:.3e}\t{}",
        m.model_id(),
        report.mean_accuracy,
        report.accuracy_variance,
        report.per_task_accuracy.len()
    );
    write_report(Report::ProbeReport(report), &a.output)
}

fn print_comparison(report: &ComparisonReport) {
    println!("model\tmean\tvariance\tprobe accuracy\tprobe variance");
    for row in &report.rows {
        let marker = if row.is_prior { " (prior)" } else { "" };
        println!(
            "{}{}\t{:.4e}\t{:.4e}\t{:.4}\t{:.3e}",
            row.model_id,
            marker,
            row.stats.mean,
            row.stats.variance,
            row.probe.mean_accuracy,
            row.probe.accuracy_variance
        );
    }
    let c = &report.correlations.mean_vs_probe_mean;
    match (&c.estimate, &c.reason) {
        (Some(est), _) => println!("pearson r (mean vs accuracy)\t{:.4}", est.r),
        (None, Some(reason)) => println!("pearson r (mean vs accuracy)\tn/a: {reason}"),
        (None, None) => {}
    }
}

fn compare(a: CompareArgs) -> Result<()> {
    check_temperature(a.temperature)?;
    check_tasks(&a.tasks)?;
    let manifest =
        DatasetManifest::load(&a.manifest).with_context(|| format!("reading manifest {}", a.manifest.display()))?;
    let t = &a.tasks;
    let report = compare_models(&manifest, &a.prior_model, a.temperature, t.classes, t.n_tasks, t.split, t.seed)?;
    print_comparison(&report);
    write_report(Report::ComparisonReport(report), &a.output)
}
