use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nilab::experiments::{
    grid, run_minimax_report, run_phase_experiment, to_tsv, IngestedData, MinimaxGrid, OutputFormat, PhaseConfig,
};
use nilab::io::{read_features, read_labels, write_features, write_labels, Dtype, LabelFormat, LabelSet};
use nilab_core::bounds::{lower_bound_general, lower_bound_zero_error, smooth_margin_bound, upper_bound_ni_erm, BoundQuery};
use nilab_core::immunity::{find_counterexample, is_diagonally_dominant, universal_form_decompose, FORM_TOL};
use nilab_core::noise::{
    flip_labels, gaussian_mixture, mc_excess_risk, GeneralSpec, Learner, MinimaxInstanceSpec, NoiseSpec, ZeroErrorSpec,
    DEFAULT_CENTERS,
};
use nilab_core::posterior::ESTIMATED_TIE_TOL;
use nilab_core::rss::region_masses;
use nilab_core::{rss, FinitePosteriorTriple, SimplexVector, TransitionMatrix};
use nilab_erm::cv::{DEFAULT_FOLDS, DEFAULT_ITER_GRID, DEFAULT_LAMBDA_GRID};
use nilab_erm::rss_estimate::{estimate_report, DEFAULT_ALPHA_GRID};
use nilab_erm::{accuracy, cross_validate, fit_smooth_margin, Loss, TrainConfig};
use serde::Serialize;
use serde_json::json;

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "nilab", version, about = "Label-noise analysis toolkit")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Tsv => OutputFormat::Tsv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Signal-region masses of a triple, or the RSS of one posterior pair.
    Rss(RssArgs),
    /// Immunity checks for a transition matrix given as JSON rows.
    Immunity {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Evaluate one excess-risk bound.
    Bounds(BoundsArgs),
    /// Generate Gaussian-mixture data or flip labels.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Monte-Carlo excess risk on an adversarial instance.
    MinimaxSim(MinimaxArgs),
    /// Cross-validated training on a feature file.
    Train(TrainArgs),
    /// Empirical RSS from clean- and noisy-label models.
    EstimateRss(EstimateArgs),
    /// Test accuracy across a grid of uniform flip rates.
    Phase(PhaseArgs),
}

#[derive(Args)]
struct RssArgs {
    /// Triple JSON with k, support, px, eta, eta_tilde.
    #[arg(long, conflicts_with_all = ["eta", "eta_tilde"])]
    triple: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',', requires = "eta_tilde")]
    eta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "eta")]
    eta_tilde: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    tie_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Upper,
    LowerZero,
    LowerGeneral,
    Smooth,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long)]
    v: u64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c_alpha: Option<f64>,
    #[arg(long, value_enum)]
    which: Which,
}

#[derive(Subcommand)]
enum Simulate {
    /// Two-dimensional Gaussian mixture written as feature and label files.
    Gaussian {
        #[arg(long, default_value_t = nilab_core::noise::DEFAULT_PER_CLASS)]
        n_per_class: usize,
        #[arg(long)]
        features_out: PathBuf,
        #[arg(long)]
        labels_out: PathBuf,
        /// Also write uniformly flipped labels at this rate.
        #[arg(long, requires = "noisy_out")]
        rho: Option<f64>,
        #[arg(long)]
        noisy_out: Option<PathBuf>,
    },
    /// Uniformly flip a label file.
    Flip {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        labels_out: PathBuf,
        #[arg(long, default_value_t = false)]
        binary: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    ZeroError,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Plurality,
    RandomGuess,
    NoisyBayes,
    CleanBayes,
}

impl From<LearnerArg> for Learner {
    fn from(l: LearnerArg) -> Self {
        match l {
            LearnerArg::Plurality => Learner::Plurality,
            LearnerArg::RandomGuess => Learner::RandomGuess,
            LearnerArg::NoisyBayes => Learner::NoisyBayes,
            LearnerArg::CleanBayes => Learner::CleanBayes,
        }
    }
}

#[derive(Args)]
struct MinimaxArgs {
    #[arg(long, value_enum, default_value_t = Variant::ZeroError)]
    variant: Variant,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long)]
    v: usize,
    #[arg(long)]
    k: usize,
    /// Training sample size, also used to design the instance.
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, value_enum, default_value_t = LearnerArg::Plurality)]
    learner: LearnerArg,
    /// Noisy Bayes-risk level of the general construction.
    #[arg(long, default_value_t = 0.25)]
    l_level: f64,
    /// Emit a bounds-versus-simulation table over these comma-separated grids
    /// instead of a single run.
    #[arg(long, default_value_t = false)]
    report: bool,
}

#[derive(Args)]
struct TrainOpts {
    #[arg(long, default_value = "cross_entropy")]
    loss: Loss,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDA_GRID)]
    lambda_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ITER_GRID)]
    iter_grid: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = nilab_erm::optimizer::DEFAULT_GRAD_TOL)]
    grad_tol: f64,
}

impl TrainOpts {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            lambda_grid: self.lambda_grid.clone(),
            max_iter_grid: self.iter_grid.clone(),
            folds: self.folds,
            seed,
            grad_tol: self.grad_tol,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    train: TrainOpts,
    #[arg(long, requires = "eval_labels")]
    eval_features: Option<PathBuf>,
    #[arg(long, requires = "eval_features")]
    eval_labels: Option<PathBuf>,
    /// Model JSON destination; defaults to `model.json`.
    #[arg(long, default_value = "model.json")]
    model_out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    train_features: PathBuf,
    #[arg(long)]
    clean_labels: PathBuf,
    #[arg(long)]
    noisy_labels: PathBuf,
    #[arg(long)]
    eval_features: PathBuf,
    /// Accepted for bookkeeping; accuracy of both models is reported when given.
    #[arg(long)]
    eval_clean_labels: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    train: TrainOpts,
    #[arg(long, default_value_t = ESTIMATED_TIE_TOL)]
    tie_tol: f64,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHA_GRID)]
    alpha_grid: Vec<f64>,
    /// Sample size plugged into the smooth-margin bound; defaults to the training size.
    #[arg(long)]
    n_for_scoring: Option<u64>,
    /// Natarajan dimension for scoring; defaults to `(d + 1) (K - 1)`.
    #[arg(long)]
    v: Option<u64>,
    #[arg(long, default_value_t = 20)]
    histogram_bins: usize,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, default_value_t = 0.0)]
    rho_start: f64,
    #[arg(long, default_value_t = 1.0)]
    rho_stop: f64,
    #[arg(long, default_value_t = 0.05)]
    rho_step: f64,
    #[arg(long, default_value_t = 5)]
    trials: u64,
    #[arg(long, default_value_t = nilab_core::noise::DEFAULT_PER_CLASS)]
    n_per_class: usize,
    #[arg(long, default_value_t = 1000)]
    test_per_class: usize,
    #[command(flatten)]
    train: TrainOpts,
    #[arg(long, requires_all = ["train_labels", "test_features", "test_labels"])]
    train_features: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_features: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Print only the per-rate summary.
    #[arg(long, default_value_t = false)]
    summary_only: bool,
}

struct Output {
    format: OutputFormat,
    out: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: String) -> CliResult<()> {
        match &self.out {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, value: &T) -> CliResult<()> {
        self.emit(serde_json::to_string_pretty(value)? + "\n")
    }

    /// JSON document, or TSV of `rows` when requested.
    fn table<T: Serialize, R: Serialize>(&self, value: &T, rows: &[R]) -> CliResult<()> {
        match self.format {
            OutputFormat::Json => self.json(value),
            OutputFormat::Tsv => self.emit(to_tsv(rows)?),
        }
    }
}

fn run_rss(args: RssArgs, out: &Output) -> CliResult<bool> {
    if let (Some(eta), Some(eta_tilde)) = (args.eta, args.eta_tilde) {
        let m = rss(&SimplexVector::new(eta)?, &SimplexVector::new(eta_tilde)?, args.tie_tol)?;
        out.json(&json!({ "rss": m }))?;
        return Ok(true);
    }
    let path = args.triple.ok_or("either --triple or --eta/--eta-tilde is required")?;
    let t = FinitePosteriorTriple::from_json(&fs::read_to_string(path)?)?;
    let report = region_masses(&t, &args.kappa, args.tie_tol)?;
    let rows: Vec<_> = report
        .kappa
        .iter()
        .zip(&report.mass)
        .map(|(k, m)| json!({ "kappa": k, "mass": m, "epsilon0": report.epsilon0 }))
        .collect();
    out.table(&report, &rows)?;
    Ok(true)
}

fn run_immunity(matrix: PathBuf, out: &Output) -> CliResult<bool> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&fs::read_to_string(matrix)?)?;
    let e = TransitionMatrix::from_rows(rows)?;
    let off = universal_form_decompose(&e, FORM_TOL);
    let mut doc = json!({
        "diag_dominant": is_diagonally_dominant(&e, 0.0),
        "universal_form": off.is_some(),
    });
    if let Some(v) = off {
        doc["e_offdiag"] = json!(v);
    }
    if let Some(c) = find_counterexample(&e, FORM_TOL) {
        doc["counterexample"] = json!(c);
    }
    out.json(&doc)?;
    Ok(true)
}

fn run_bounds(a: BoundsArgs, out: &Output) -> CliResult<bool> {
    let mut q = BoundQuery::new(a.epsilon, a.kappa, a.v, a.n, a.k);
    if let Some(l) = a.l {
        q = q.with_l_level(l);
    }
    if let (Some(alpha), Some(c)) = (a.alpha, a.c_alpha) {
        q = q.with_margin(alpha, c);
    }
    let r = match a.which {
        Which::Upper => upper_bound_ni_erm(&q)?,
        Which::LowerZero => lower_bound_zero_error(&q)?,
        Which::LowerGeneral => lower_bound_general(&q)?,
        Which::Smooth => smooth_margin_bound(&q)?,
    };
    out.json(&r)?;
    Ok(true)
}

fn run_simulate(cmd: Simulate, seed: u64, out: &Output) -> CliResult<bool> {
    match cmd {
        Simulate::Gaussian {
            n_per_class,
            features_out,
            labels_out,
            rho,
            noisy_out,
        } => {
            let centers: Vec<Vec<f64>> = DEFAULT_CENTERS.iter().map(|c| c.to_vec()).collect();
            let s = gaussian_mixture(n_per_class, &centers, seed)?;
            write_features(&s.features, Dtype::F64, &features_out)?;
            let clean = LabelSet::new(s.labels.clone(), centers.len())?;
            write_labels(&clean, LabelFormat::Csv, &labels_out)?;
            let mut flipped = None;
            if let (Some(rho), Some(path)) = (rho, noisy_out) {
                let noisy = flip_labels(&s.labels, &NoiseSpec::UniformFlip(rho), centers.len(), seed.wrapping_add(1))?;
                let disagree = noisy.iter().zip(&s.labels).filter(|(a, b)| a != b).count();
                write_labels(&LabelSet::new(noisy, centers.len())?, LabelFormat::Csv, path)?;
                flipped = Some(disagree);
            }
            out.json(&json!({ "rows": s.labels.len(), "cols": s.features.ncols(), "seed": seed, "flipped": flipped }))?;
        }
        Simulate::Flip {
            labels,
            rate,
            k,
            labels_out,
            binary,
        } => {
            let set = read_labels(labels, k)?;
            let noisy = flip_labels(&set.labels, &NoiseSpec::UniformFlip(rate), set.k, seed)?;
            let disagree = noisy.iter().zip(&set.labels).filter(|(a, b)| a != b).count();
            let format = if binary { LabelFormat::Binary } else { LabelFormat::Csv };
            write_labels(&LabelSet::new(noisy, set.k)?, format, labels_out)?;
            out.json(&json!({ "rows": set.labels.len(), "k": set.k, "flipped": disagree, "seed": seed }))?;
        }
    }
    Ok(true)
}

fn run_minimax(a: MinimaxArgs, seed: u64, out: &Output) -> CliResult<bool> {
    if a.report {
        let grid = MinimaxGrid {
            k: vec![a.k],
            epsilon: vec![a.epsilon],
            kappa: vec![a.kappa],
            v: vec![a.v],
            n: vec![a.n],
            trials: a.trials,
            seed,
            learner: a.learner.into(),
            l_level: a.l_level,
        };
        let rows = run_minimax_report(&grid)?;
        out.table(&rows, &rows)?;
        return Ok(rows.iter().all(|r| r.error.is_none()));
    }
    let spec = match a.variant {
        Variant::ZeroError => MinimaxInstanceSpec::ZeroError(ZeroErrorSpec::new(a.epsilon, a.kappa, a.v, a.k, a.n)),
        Variant::General => {
            MinimaxInstanceSpec::General(GeneralSpec::preset(a.epsilon, a.kappa, a.v, a.k, a.n, a.l_level)?)
        }
    };
    let report = mc_excess_risk(&spec, a.learner.into(), a.n as usize, a.trials, seed)?;
    out.table(&json!({ "spec": spec, "report": report }), &report.records)?;
    Ok(true)
}

fn run_train(a: TrainArgs, seed: u64, out: &Output) -> CliResult<bool> {
    let x = read_features(&a.features)?;
    let labels = read_labels(&a.labels, a.k)?;
    let config = a.train.config(seed);
    let cv = cross_validate(x.view(), &labels.labels, labels.k, &config)?;
    fs::write(&a.model_out, serde_json::to_string_pretty(cv.model())? + "\n")?;
    let mut metrics = json!({
        "k": labels.k,
        "n": labels.labels.len(),
        "d": x.ncols(),
        "loss": config.loss,
        "chosen_lambda": cv.chosen_lambda,
        "chosen_max_iter": cv.chosen_max_iter,
        "train_accuracy": accuracy(cv.model(), x.view(), &labels.labels)?,
        "converged": cv.fit.converged,
        "iterations": cv.fit.iterations,
        "cells": cv.cells,
        "model_file": a.model_out,
    });
    if let (Some(f), Some(l)) = (a.eval_features, a.eval_labels) {
        let ex = read_features(f)?;
        let el = read_labels(l, Some(labels.k))?;
        metrics["eval_accuracy"] = json!(accuracy(cv.model(), ex.view(), &el.labels)?);
    }
    out.json(&metrics)?;
    Ok(true)
}

fn histogram(values: &[f64], bins: usize) -> serde_json::Value {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let infinite = values.len() - finite.len();
    let hi = finite.iter().copied().fold(0.0, f64::max);
    let bins = bins.max(1);
    let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in &finite {
        counts[((v / width) as usize).min(bins - 1)] += 1;
    }
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    json!({ "edges": edges, "counts": counts, "infinite": infinite })
}

fn run_estimate(a: EstimateArgs, seed: u64, out: &Output) -> CliResult<bool> {
    let x = read_features(&a.train_features)?;
    let clean = read_labels(&a.clean_labels, a.k)?;
    let k = a.k.unwrap_or(clean.k);
    let noisy = read_labels(&a.noisy_labels, Some(k))?;
    let clean = LabelSet::new(clean.labels, k)?;
    let ex = read_features(&a.eval_features)?;
    let config = a.train.config(seed);
    let mut report = estimate_report(x.view(), &clean.labels, &noisy.labels, ex.view(), k, &config, a.tie_tol)?;
    let n = a.n_for_scoring.unwrap_or(x.nrows() as u64);
    let v = a.v.unwrap_or(((x.ncols() + 1) * (k - 1)) as u64);
    let fit_error = match fit_smooth_margin(&report, &a.alpha_grid, n, v, k as u64) {
        Ok(fit) => {
            report.fit = Some(fit);
            None
        }
        Err(e) => Some(e.to_string()),
    };
    let values: Vec<f64> = report.m_values.iter().map(|m| m.to_f64()).collect();
    let mut doc = serde_json::to_value(&report)?;
    doc["histogram"] = histogram(&values, a.histogram_bins);
    if let Some(e) = fit_error {
        doc["fit_error"] = json!(e);
    }
    if let Some(path) = a.eval_clean_labels {
        let el = read_labels(path, Some(k))?;
        doc["eval_labels"] = json!(el.labels.len());
    }
    match out.format {
        OutputFormat::Json => out.json(&doc)?,
        OutputFormat::Tsv => {
            let rows: Vec<_> = report.cdf.iter().map(|p| json!({ "kappa": p.kappa, "cdf": p.cdf })).collect();
            out.emit(to_tsv(&rows)?)?;
        }
    }
    Ok(true)
}

fn run_phase(a: PhaseArgs, seed: u64, out: &Output) -> CliResult<bool> {
    let config = PhaseConfig {
        rho_grid: grid(a.rho_start, a.rho_stop, a.rho_step),
        trials: a.trials,
        seed,
        n_per_class: a.n_per_class,
        test_per_class: a.test_per_class,
        train: a.train.config(seed),
        ..Default::default()
    };
    let data = match (a.train_features, a.train_labels, a.test_features, a.test_labels) {
        (Some(tf), Some(tl), Some(ef), Some(el)) => {
            let train_y = read_labels(tl, a.k)?;
            let k = train_y.k;
            let test_y = read_labels(el, Some(k))?;
            Some(IngestedData {
                train_x: read_features(tf)?,
                train_y: train_y.labels,
                test_x: read_features(ef)?,
                test_y: test_y.labels,
                k,
            })
        }
        _ => None,
    };
    let table = run_phase_experiment(&config, data.as_ref())?;
    if a.summary_only {
        out.table(&table.summary, &table.summary)?;
    } else {
        out.table(&table, &table.rows)?;
    }
    for r in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell rho={} trial={} failed: {}", r.rho, r.trial, r.error.as_deref().unwrap_or(""));
    }
    Ok(table.failures() == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output {
        format: cli.format.into(),
        out: cli.out,
    };
    let seed = cli.seed;
    let result = match cli.command {
        Command::Rss(a) => run_rss(a, &out),
        Command::Immunity { matrix } => run_immunity(matrix, &out),
        Command::Bounds(a) => run_bounds(a, &out),
        Command::Simulate(s) => run_simulate(s, seed, &out),
        Command::MinimaxSim(a) => run_minimax(a, seed, &out),
        Command::Train(a) => run_train(a, seed, &out),
        Command::EstimateRss(a) => run_estimate(a, seed, &out),
        Command::Phase(a) => run_phase(a, seed, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
