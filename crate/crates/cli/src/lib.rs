//! Command-line workflows: generate synthetic tasks, estimate `theta`,
//! cross-validate, fit, evaluate and run the benchmark harnesses.
//!
//! Every command writes plain-text artifacts into `--out` and echoes its
//! configuration into each JSON file. Identical flags give identical files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use eulac::data::{
    bayes_risk_oracle, load_libsvm, load_unlabeled, read_libsvm, sample_synthetic, write_csv_features, write_libsvm,
    ClassConfiguration, SyntheticSpec,
};
use eulac::evalbench::{
    default_unlabeled_sizes, run_theorem2_check, run_theta_sweep, run_unlabeled_scaling, BenchSettings,
    ConfusionMatrix, ExperimentReport, Metric, TaskSource, ThetaMode, DEFAULT_NEW_CLASS_RATIOS,
};
use eulac::mixture::{estimate_theta_median, theta_override, ThetaEstimate, ThetaOptions};
use eulac::modelsel::{cross_validate, fit_with_selection, CvReport, HyperGrid};
use eulac::{DualModel, Label, LabeledDataset, SurrogateLoss, UnlabeledDataset};

/// Resolution of the Bayes-risk quadrature written into manifests.
pub const MANIFEST_QUADRATURE_RESOLUTION: usize = 400;

#[derive(Debug, Parser)]
#[command(name = "eulac", version, about = "Learning with augmented classes from unlabeled data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for sampling, folds and solvers.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "eulac-out")]
    pub out: PathBuf,
    /// Surrogate loss: square, logistic or double-hinge.
    #[arg(long, global = true, default_value = "square")]
    pub loss: SurrogateLoss,
    /// Known-class proportion of the test distribution; estimated when absent.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Fix the regularization instead of cross-validating it.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Fix the bandwidth multiplier of the median distance instead of
    /// cross-validating it.
    #[arg(long = "sigma-mult", global = true)]
    pub sigma_mult: Option<f64>,
    #[arg(long, global = true, default_value_t = 5)]
    pub folds: usize,
    /// Slope threshold constant of the theta estimator.
    #[arg(long = "theta-threshold", global = true)]
    pub theta_threshold: Option<f64>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Labeled training data (LIBSVM).
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Unlabeled data (features-only CSV, or LIBSVM with ignored labels).
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    /// Synthetic task (TOML) to sample from instead of files.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long = "n-labeled", default_value_t = 500)]
    pub n_labeled: usize,
    #[arg(long = "n-unlabeled", default_value_t = 1000)]
    pub n_unlabeled: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Harness {
    Scaling,
    ThetaSweep,
    Theorem2,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic task into labeled, unlabeled and test files.
    Gen {
        /// Synthetic task (TOML); the bundled 2-D task when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long = "n-labeled", default_value_t = 500)]
        n_labeled: usize,
        #[arg(long = "n-unlabeled", default_value_t = 1000)]
        n_unlabeled: usize,
        #[arg(long = "n-test", default_value_t = 10_000)]
        n_test: usize,
    },
    /// Estimate theta, cross-validate and write the final model.
    Fit {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Evaluate a model on a LIBSVM test file where label 0 marks new classes.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Estimate the known-class proportion.
    Theta {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Cross-validate the hyperparameter grid without the final fit.
    Cv {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run an experiment harness.
    Bench {
        #[arg(value_enum)]
        harness: Harness,
        /// Synthetic task (TOML); the bundled 2-D task when neither this nor
        /// `--dataset` is given.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Labeled dataset (LIBSVM) to split into known and new classes.
        #[arg(long, conflicts_with = "spec")]
        dataset: Option<PathBuf>,
        /// Class configuration (TOML) for `--dataset`; half of the classes
        /// become new when absent.
        #[arg(long, requires = "dataset")]
        classes: Option<PathBuf>,
        /// Number of seeds, starting at `--seed`.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long = "n-labeled", default_value_t = 500)]
        n_labeled: usize,
        #[arg(long = "n-unlabeled", default_value_t = 1000)]
        n_unlabeled: usize,
        #[arg(long = "n-test", default_value_t = 10_000)]
        n_test: usize,
        /// Unlabeled sizes for `scaling`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// New-class ratios for `theta-sweep`.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        /// Estimate theta in every run instead of using the true value.
        #[arg(long = "estimate-theta")]
        estimate_theta: bool,
        /// Also evaluate the one-vs-rest reject baseline.
        #[arg(long)]
        baseline: bool,
    },
}

/// Result of a command that did not fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Finished, but a solver stopped before its tolerance.
    ConvergenceWarning,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::ConvergenceWarning => 2,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen {
            spec,
            n_labeled,
            n_unlabeled,
            n_test,
        } => cmd_gen(g, spec.as_deref(), *n_labeled, *n_unlabeled, *n_test),
        Command::Fit { data } => cmd_fit(g, data),
        Command::Eval { model, test } => cmd_eval(g, model, test),
        Command::Theta { data } => cmd_theta(g, data),
        Command::Cv { data } => cmd_cv(g, data),
        Command::Bench {
            harness,
            spec,
            dataset,
            classes,
            seeds,
            n_labeled,
            n_unlabeled,
            n_test,
            sizes,
            ratios,
            estimate_theta,
            baseline,
        } => {
            let source = bench_source(spec.as_deref(), dataset.as_deref(), classes.as_deref(), g.seed)?;
            let settings = BenchSettings {
                n_labeled: *n_labeled,
                n_unlabeled: *n_unlabeled,
                n_test: *n_test,
                grid: grid(g),
                theta_mode: if *estimate_theta {
                    ThetaMode::Estimated {
                        options: theta_options(g),
                    }
                } else {
                    ThetaMode::Known
                },
                with_baseline: *baseline,
            };
            let seeds: Vec<u64> = (g.seed..g.seed + (*seeds).max(1)).collect();
            cmd_bench(g, *harness, &source, &settings, &seeds, sizes.as_deref(), ratios.as_deref())
        }
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

fn load_spec(path: Option<&Path>) -> Result<SyntheticSpec> {
    match path {
        Some(p) => Ok(SyntheticSpec::load(p)?),
        None => Ok(SyntheticSpec::reference_2d()),
    }
}

fn global_echo(g: &GlobalArgs) -> serde_json::Value {
    json!({
        "seed": g.seed,
        "loss": g.loss,
        "theta": g.theta,
        "lambda": g.lambda,
        "sigma_mult": g.sigma_mult,
        "folds": g.folds,
        "theta_threshold": g.theta_threshold,
    })
}

pub fn grid(g: &GlobalArgs) -> HyperGrid {
    let mut grid = HyperGrid {
        loss: g.loss,
        folds: g.folds,
        ..HyperGrid::default()
    };
    grid.solver.seed = g.seed;
    if let Some(l) = g.lambda {
        grid.lambdas = vec![l];
    }
    if let Some(s) = g.sigma_mult {
        grid.sigma_multipliers = vec![s];
    }
    grid
}

fn theta_options(g: &GlobalArgs) -> ThetaOptions {
    let mut options = ThetaOptions::default();
    if let Some(t) = g.theta_threshold {
        options.tau = t;
    }
    options
}

/// Writes labeled (LIBSVM), unlabeled (CSV) and test (LIBSVM, new classes as
/// label 0) files plus `manifest.json`.
pub fn cmd_gen(g: &GlobalArgs, spec: Option<&Path>, n_labeled: usize, n_unlabeled: usize, n_test: usize) -> Result<Outcome> {
    let mut spec = load_spec(spec)?.with_seed(g.seed);
    if let Some(t) = g.theta {
        spec = spec.with_theta(t);
    }
    let split = sample_synthetic(&spec, n_labeled, n_unlabeled, n_test)?;
    create_out(&g.out)?;
    write_libsvm(&g.out.join("labeled.libsvm"), split.labeled.features(), &split.labeled.original_labels())?;
    write_csv_features(&g.out.join("unlabeled.csv"), split.unlabeled.features())?;
    let test_labels: Vec<i64> = split
        .test
        .labels()
        .iter()
        .map(|l| match l {
            Label::Known(k) => *k as i64,
            Label::New => 0,
        })
        .collect();
    write_libsvm(&g.out.join("test.libsvm"), split.test.features(), &test_labels)?;
    let bayes_risk = if spec.dim <= 2 {
        Some(bayes_risk_oracle(&spec, MANIFEST_QUADRATURE_RESOLUTION)?)
    } else {
        None
    };
    let manifest = json!({
        "command": "gen",
        "config": global_echo(g),
        "spec": spec,
        "theta": spec.theta,
        "bayes_risk": bayes_risk,
        "bayes_risk_resolution": bayes_risk.map(|_| MANIFEST_QUADRATURE_RESOLUTION),
        "n_labeled": n_labeled,
        "n_unlabeled": n_unlabeled,
        "n_test": n_test,
        "files": {
            "labeled": "labeled.libsvm",
            "unlabeled": "unlabeled.csv",
            "test": "test.libsvm",
        },
    });
    write_json(&g.out.join("manifest.json"), &manifest)?;
    println!("wrote {} (theta {})", g.out.display(), spec.theta);
    Ok(Outcome::Success)
}

/// Training data from exactly one source: files or a synthetic spec.
fn load_training(g: &GlobalArgs, data: &DataArgs) -> Result<(LabeledDataset, UnlabeledDataset, serde_json::Value)> {
    match (&data.spec, &data.labeled, &data.unlabeled) {
        (Some(spec_path), None, None) => {
            let spec = load_spec(Some(spec_path))?.with_seed(g.seed);
            let split = sample_synthetic(&spec, data.n_labeled, data.n_unlabeled, 1)?;
            let echo = json!({
                "spec": spec_path,
                "n_labeled": data.n_labeled,
                "n_unlabeled": data.n_unlabeled,
            });
            Ok((split.labeled, split.unlabeled, echo))
        }
        (None, Some(l), Some(u)) => {
            let labeled = load_libsvm(l)?;
            let unlabeled = load_unlabeled(u)?;
            let dim = labeled.dim().max(unlabeled.dim());
            let labeled = LabeledDataset::new(
                labeled.features().padded(dim)?,
                labeled.labels().to_vec(),
                labeled.label_table().to_vec(),
            )?;
            let unlabeled = UnlabeledDataset::new(unlabeled.features().padded(dim)?)?;
            Ok((labeled, unlabeled, json!({ "labeled": l, "unlabeled": u })))
        }
        (None, Some(_), None) => bail!("--unlabeled is required with --labeled"),
        (None, None, Some(_)) => bail!("--labeled is required with --unlabeled"),
        (None, None, None) => bail!("give either --labeled and --unlabeled, or --spec"),
        (Some(_), _, _) => bail!("--spec cannot be combined with --labeled/--unlabeled"),
    }
}

fn obtain_theta(g: &GlobalArgs, labeled: &LabeledDataset, unlabeled: &UnlabeledDataset) -> Result<ThetaEstimate> {
    Ok(match g.theta {
        Some(t) => theta_override(t)?,
        None => estimate_theta_median(labeled.features(), unlabeled.features(), &theta_options(g))?,
    })
}

#[derive(Serialize)]
struct FitArtifact<'a> {
    command: &'static str,
    config: serde_json::Value,
    data: serde_json::Value,
    theta: &'a ThetaEstimate,
    cv: &'a CvReport,
    model_file: &'static str,
    converged: bool,
}

pub fn cmd_fit(g: &GlobalArgs, data: &DataArgs) -> Result<Outcome> {
    let (labeled, unlabeled, data_echo) = load_training(g, data)?;
    let theta = obtain_theta(g, &labeled, &unlabeled)?;
    let (model, report) = fit_with_selection(&labeled, &unlabeled, theta.theta, &grid(g), g.seed)?;
    create_out(&g.out)?;
    model.save(&g.out.join("model.txt"))?;
    let converged = model.record().converged;
    write_json(
        &g.out.join("cv_report.json"),
        &FitArtifact {
            command: "fit",
            config: global_echo(g),
            data: data_echo,
            theta: &theta,
            cv: &report,
            model_file: "model.txt",
            converged,
        },
    )?;
    println!(
        "theta {:.4}, sigma {:.4} (x{}), lambda {}, validation risk {:.4}",
        theta.theta, report.selected_sigma, report.selected_sigma_multiplier, report.selected_lambda, report.selected_mean_risk
    );
    if converged {
        Ok(Outcome::Success)
    } else {
        log::warn!(
            "final fit stopped after {} iterations with gradient norm {:.3e}",
            model.record().iterations,
            model.record().gradient_norm
        );
        Ok(Outcome::ConvergenceWarning)
    }
}

#[derive(Debug, Serialize)]
pub struct EvalMetrics {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub model: PathBuf,
    pub test: PathBuf,
    pub samples: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub zero_one_risk: f64,
    pub confusion: ConfusionMatrix,
    /// Test labels outside the model's label table, counted as new classes.
    pub unmapped_labels: Vec<i64>,
}

/// Test labels: 0 is the new class, other ids are looked up in the model's
/// label table; ids the model never saw are treated as new.
pub fn map_test_labels(labels: &[i64], table: &[i64]) -> Result<(Vec<Label>, Vec<i64>)> {
    let mut unmapped = BTreeSet::new();
    let mut any_known = false;
    let mapped: Vec<Label> = labels
        .iter()
        .map(|&y| {
            if y == 0 {
                return Label::New;
            }
            match table.iter().position(|&t| t == y) {
                Some(i) => {
                    any_known = true;
                    Label::Known(i + 1)
                }
                None => {
                    unmapped.insert(y);
                    Label::New
                }
            }
        })
        .collect();
    if !any_known {
        bail!(
            "no test label matches the model's known classes {:?}; label spaces do not intersect",
            table
        );
    }
    Ok((mapped, unmapped.into_iter().collect()))
}

pub fn cmd_eval(g: &GlobalArgs, model_path: &Path, test_path: &Path) -> Result<Outcome> {
    let model = DualModel::load(model_path)?;
    let raw = read_libsvm(test_path)?;
    if raw.features.dim() > model.dim() {
        bail!(
            "test data has {} features but the model was trained on {}",
            raw.features.dim(),
            model.dim()
        );
    }
    let features = raw.features.padded(model.dim())?;
    let (truths, unmapped) = map_test_labels(&raw.labels, model.label_table())?;
    let predictions = model.predict(&features)?;
    let k = model.label_table().len();
    let confusion = ConfusionMatrix::from_labels(k, &truths, &predictions)?;
    let metrics = EvalMetrics {
        command: "eval",
        config: global_echo(g),
        model: model_path.to_path_buf(),
        test: test_path.to_path_buf(),
        samples: confusion.total(),
        accuracy: confusion.accuracy()?,
        macro_f1: confusion.macro_f1()?,
        zero_one_risk: eulac::risk::zero_one_risk(&predictions, &truths)?,
        confusion,
        unmapped_labels: unmapped,
    };
    create_out(&g.out)?;
    write_json(&g.out.join("metrics.json"), &metrics)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(Outcome::Success)
}

pub fn cmd_theta(g: &GlobalArgs, data: &DataArgs) -> Result<Outcome> {
    let (labeled, unlabeled, data_echo) = load_training(g, data)?;
    let estimate = obtain_theta(g, &labeled, &unlabeled)?;
    create_out(&g.out)?;
    write_json(
        &g.out.join("theta.json"),
        &json!({
            "command": "theta",
            "config": global_echo(g),
            "options": theta_options(g),
            "data": data_echo,
            "estimate": estimate,
        }),
    )?;
    println!("theta {:.4}{}", estimate.theta, if estimate.detected { "" } else { " (no crossing)" });
    Ok(Outcome::Success)
}

pub fn cmd_cv(g: &GlobalArgs, data: &DataArgs) -> Result<Outcome> {
    let (labeled, unlabeled, data_echo) = load_training(g, data)?;
    let theta = obtain_theta(g, &labeled, &unlabeled)?;
    let report = cross_validate(&labeled, &unlabeled, theta.theta, &grid(g), g.seed)?;
    create_out(&g.out)?;
    write_json(
        &g.out.join("cv_report.json"),
        &json!({
            "command": "cv",
            "config": global_echo(g),
            "data": data_echo,
            "theta": theta,
            "cv": report,
        }),
    )?;
    println!("{:>12} {:>10} {:>12} {:>10}", "sigma_mult", "lambda", "risk", "stderr");
    for c in &report.cells {
        println!(
            "{:>12} {:>10} {:>12.5} {:>10.5}",
            c.sigma_multiplier, c.lambda, c.mean_risk, c.std_error
        );
    }
    println!(
        "selected sigma_mult {} lambda {}",
        report.selected_sigma_multiplier, report.selected_lambda
    );
    let converged = report.cells.iter().all(|c| c.converged);
    Ok(if converged { Outcome::Success } else { Outcome::ConvergenceWarning })
}

fn bench_source(spec: Option<&Path>, dataset: Option<&Path>, classes: Option<&Path>, seed: u64) -> Result<TaskSource> {
    match dataset {
        Some(path) => {
            let raw = read_libsvm(path)?;
            let config = match classes {
                Some(c) => ClassConfiguration::load(c)?,
                None => ClassConfiguration::half_new(&raw.labels, seed)?,
            };
            let full = LabeledDataset::from_original_labels(raw.features, &raw.labels)?;
            Ok(TaskSource::Dataset { full, config })
        }
        None => Ok(TaskSource::Synthetic(load_spec(spec)?)),
    }
}

fn write_report(dir: &Path, report: &ExperimentReport, metrics: &[Metric]) -> Result<()> {
    write_file(&dir.join(format!("{}.json", report.name)), &(report.to_json() + "\n"))?;
    for &m in metrics {
        write_file(&dir.join(format!("{}_{}.csv", report.name, m.name())), &report.csv(m))?;
    }
    Ok(())
}

fn print_aggregates(report: &ExperimentReport) {
    println!("{:>8} {:>10} {:>10} {:>10}", "x", "macro_f1", "std", "accuracy");
    for a in &report.aggregates {
        println!(
            "{:>8} {:>10.4} {:>10.4} {:>10.4}",
            a.x, a.macro_f1.mean, a.macro_f1.std, a.accuracy.mean
        );
    }
}

pub fn cmd_bench(
    g: &GlobalArgs,
    harness: Harness,
    source: &TaskSource,
    settings: &BenchSettings,
    seeds: &[u64],
    sizes: Option<&[usize]>,
    ratios: Option<&[f64]>,
) -> Result<Outcome> {
    create_out(&g.out)?;
    let mut metrics = vec![Metric::MacroF1, Metric::Accuracy];
    if settings.with_baseline {
        metrics.extend([Metric::BaselineMacroF1, Metric::BaselineAccuracy]);
    }
    let all_converged = |r: &ExperimentReport| r.runs.iter().all(|run| run.converged);
    match harness {
        Harness::Scaling => {
            let sizes = sizes.map(<[usize]>::to_vec).unwrap_or_else(default_unlabeled_sizes);
            let report = run_unlabeled_scaling(source, settings, &sizes, seeds)?;
            write_report(&g.out, &report, &metrics)?;
            print_aggregates(&report);
            match report.spearman {
                Some(rho) => println!("spearman(n_u, macro_f1) = {rho:.3}"),
                None => println!("spearman(n_u, macro_f1) undefined"),
            }
            Ok(if all_converged(&report) { Outcome::Success } else { Outcome::ConvergenceWarning })
        }
        Harness::ThetaSweep => {
            let ratios = ratios.map(<[f64]>::to_vec).unwrap_or_else(|| DEFAULT_NEW_CLASS_RATIOS.to_vec());
            let report = run_theta_sweep(source, settings, &ratios, seeds)?;
            write_report(&g.out, &report, &metrics)?;
            print_aggregates(&report);
            Ok(if all_converged(&report) { Outcome::Success } else { Outcome::ConvergenceWarning })
        }
        Harness::Theorem2 => {
            let TaskSource::Synthetic(spec) = source else {
                bail!("the theorem2 harness needs a synthetic task");
            };
            if settings.grid.loss != SurrogateLoss::Square {
                bail!("the theorem2 harness applies to the square loss only");
            }
            let mut checks = Vec::new();
            let mut all_hold = true;
            for &seed in seeds {
                let split = sample_synthetic(&spec.clone().with_seed(seed), settings.n_labeled, settings.n_unlabeled, 1)?;
                let theta = g.theta.unwrap_or(spec.theta);
                let (model, _) = fit_with_selection(&split.labeled, &split.unlabeled, theta, &settings.grid, seed)?;
                let check = run_theorem2_check(spec, &model, settings.n_test, seed, 200)?;
                println!(
                    "seed {seed}: lhs {:.4} <= rhs {:.4} + 3 se ({:.4}): {}",
                    check.lhs,
                    check.rhs,
                    3.0 * check.std_error,
                    if check.holds { "holds" } else { "VIOLATED" }
                );
                all_hold &= check.holds;
                checks.push(json!({ "seed": seed, "check": check }));
            }
            write_json(
                &g.out.join("theorem2.json"),
                &json!({
                    "command": "bench theorem2",
                    "config": global_echo(g),
                    "settings": settings,
                    "spec": spec,
                    "checks": checks,
                    "all_hold": all_hold,
                }),
            )?;
            println!("verdict: {}", if all_hold { "lhs <= rhs on every seed" } else { "violated" });
            Ok(Outcome::Success)
        }
    }
}
