//! Noise-rate sweeps and minimax bound-versus-simulation tables.

use ndarray::Array2;
use nilab_core::bounds::{lower_bound_general, lower_bound_zero_error, upper_bound_ni_erm, BoundQuery};
use nilab_core::noise::{flip_labels, gaussian_mixture, mc_excess_risk, Learner, MinimaxInstanceSpec, NoiseSpec, ZeroErrorSpec};
use nilab_core::rng::derive_seed;
use nilab_erm::{accuracy, cross_validate, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Tsv,
}

/// Evenly spaced grid `start, start + step, ...` up to `stop`, rounded to 12
/// decimals so that e.g. 0.05 steps land on 0.6 exactly.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((start + step * i as f64) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub rho_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub n_per_class: usize,
    pub test_per_class: usize,
    pub centers: Vec<Vec<f64>>,
    pub train: TrainConfig,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            rho_grid: grid(0.0, 1.0, 0.05),
            trials: 5,
            seed: 0,
            n_per_class: nilab_core::noise::DEFAULT_PER_CLASS,
            test_per_class: 1000,
            centers: nilab_core::noise::DEFAULT_CENTERS.iter().map(|c| c.to_vec()).collect(),
            train: TrainConfig::default(),
        }
    }
}

/// Fixed train/test features supplied by the caller instead of the generator.
#[derive(Debug, Clone)]
pub struct IngestedData {
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub rho: f64,
    pub trial: u64,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub lambda: Option<f64>,
    pub max_iter: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub rho: f64,
    pub mean: f64,
    pub std: f64,
    pub succeeded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub rows: Vec<PhaseRow>,
    pub summary: Vec<PhaseSummary>,
}

impl PhaseTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

struct CellData {
    train_x: Array2<f64>,
    train_y: Vec<usize>,
    test_x: Array2<f64>,
    test_y: Vec<usize>,
    k: usize,
}

fn cell_data(config: &PhaseConfig, data: Option<&IngestedData>, trial_seed: u64) -> Result<CellData, String> {
    if let Some(d) = data {
        return Ok(CellData {
            train_x: d.train_x.clone(),
            train_y: d.train_y.clone(),
            test_x: d.test_x.clone(),
            test_y: d.test_y.clone(),
            k: d.k,
        });
    }
    let train = gaussian_mixture(config.n_per_class, &config.centers, derive_seed(trial_seed, 0)).map_err(|e| e.to_string())?;
    let test = gaussian_mixture(config.test_per_class, &config.centers, derive_seed(trial_seed, 1)).map_err(|e| e.to_string())?;
    Ok(CellData {
        train_x: train.features,
        train_y: train.labels,
        test_x: test.features,
        test_y: test.labels,
        k: config.centers.len(),
    })
}

fn run_cell(config: &PhaseConfig, data: Option<&IngestedData>, rho_idx: usize, trial: u64) -> PhaseRow {
    let rho = config.rho_grid[rho_idx];
    let trial_seed = derive_seed(config.seed, trial);
    let mut row = PhaseRow {
        rho,
        trial,
        seed: trial_seed,
        accuracy: None,
        lambda: None,
        max_iter: None,
        error: None,
    };
    let outcome = (|| -> Result<(f64, f64, usize), String> {
        let d = cell_data(config, data, trial_seed)?;
        let noisy = flip_labels(&d.train_y, &NoiseSpec::UniformFlip(rho), d.k, derive_seed(trial_seed, 2)).map_err(|e| e.to_string())?;
        let train = TrainConfig {
            seed: derive_seed(trial_seed, 3),
            ..config.train.clone()
        };
        let cv = cross_validate(d.train_x.view(), &noisy, d.k, &train).map_err(|e| e.to_string())?;
        let acc = accuracy(cv.model(), d.test_x.view(), &d.test_y).map_err(|e| e.to_string())?;
        Ok((acc, cv.chosen_lambda, cv.chosen_max_iter))
    })();
    match outcome {
        Ok((acc, lambda, max_iter)) => {
            row.accuracy = Some(acc);
            row.lambda = Some(lambda);
            row.max_iter = Some(max_iter);
        }
        Err(e) => row.error = Some(e),
    }
    row
}

fn summarize(rho: f64, values: &[f64]) -> PhaseSummary {
    let n = values.len();
    let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    PhaseSummary {
        rho,
        mean,
        std,
        succeeded: n,
    }
}

/// Test accuracy of cross-validated training on uniformly flipped labels for
/// every `(rho, trial)` cell. Failing cells are recorded and the sweep goes on.
pub fn run_phase_experiment(config: &PhaseConfig, data: Option<&IngestedData>) -> Result<PhaseTable, String> {
    if config.rho_grid.is_empty() || config.trials == 0 {
        return Err("noise grid and trial count must be nonempty".into());
    }
    if let Some(r) = config.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(format!("noise rate {r} is outside [0, 1]"));
    }
    config.train.validate().map_err(|e| e.to_string())?;
    let cells: Vec<(usize, u64)> = (0..config.rho_grid.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let rows: Vec<PhaseRow> = cells.par_iter().map(|&(i, t)| run_cell(config, data, i, t)).collect();
    let summary = config
        .rho_grid
        .iter()
        .map(|&rho| {
            let accs: Vec<f64> = rows.iter().filter(|r| r.rho == rho).filter_map(|r| r.accuracy).collect();
            summarize(rho, &accs)
        })
        .collect();
    Ok(PhaseTable { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxGrid {
    pub k: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub kappa: Vec<f64>,
    pub v: Vec<usize>,
    pub n: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub learner: Learner,
    /// Noisy Bayes-risk level for the general lower bound.
    pub l_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxRow {
    pub k: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub v: usize,
    pub n: u64,
    pub lower_zero: Option<f64>,
    pub lower_zero_valid: Option<bool>,
    pub lower_general: Option<f64>,
    pub lower_general_valid: Option<bool>,
    /// Upper bound with `V` set to the support size of the instance.
    pub upper: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub x0_mean: Option<f64>,
    /// `mc_mean + 3 stderr >= lower_zero`.
    pub flag: Option<bool>,
    /// `upper >= mc_mean - 3 stderr`, recorded only.
    pub upper_holds: Option<bool>,
    pub error: Option<String>,
}

fn minimax_cell(grid: &MinimaxGrid, k: usize, epsilon: f64, kappa: f64, v: usize, n: u64, seed: u64) -> MinimaxRow {
    let mut row = MinimaxRow {
        k,
        epsilon,
        kappa,
        v,
        n,
        lower_zero: None,
        lower_zero_valid: None,
        lower_general: None,
        lower_general_valid: None,
        upper: None,
        mc_mean: None,
        mc_stderr: None,
        x0_mean: None,
        flag: None,
        upper_holds: None,
        error: None,
    };
    let q = BoundQuery::new(epsilon, kappa, v as u64, n, k as u64);
    let result = (|| -> Result<(), String> {
        let lz = lower_bound_zero_error(&q).map_err(|e| e.to_string())?;
        row.lower_zero = Some(lz.value);
        row.lower_zero_valid = Some(lz.valid);
        if let Ok(lg) = lower_bound_general(&q.with_l_level(grid.l_level)) {
            row.lower_general = Some(lg.value);
            row.lower_general_valid = Some(lg.valid);
        }
        let up = upper_bound_ni_erm(&BoundQuery { v: v as u64 + 1, ..q }).map_err(|e| e.to_string())?;
        row.upper = Some(up.value);
        let spec = MinimaxInstanceSpec::ZeroError(ZeroErrorSpec::new(epsilon, kappa, v, k, n));
        let mc = mc_excess_risk(&spec, grid.learner, n as usize, grid.trials, seed).map_err(|e| e.to_string())?;
        row.mc_mean = Some(mc.mean);
        row.mc_stderr = Some(mc.stderr);
        row.x0_mean = Some(mc.region.x0_mean);
        row.flag = Some(mc.mean + 3.0 * mc.stderr >= lz.value);
        row.upper_holds = Some(up.value >= mc.mean - 3.0 * mc.stderr);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e);
    }
    row
}

/// Analytic bounds next to simulated excess risk on zero-error instances over
/// the Cartesian product of the grid.
pub fn run_minimax_report(grid: &MinimaxGrid) -> Result<Vec<MinimaxRow>, String> {
    if grid.k.is_empty() || grid.epsilon.is_empty() || grid.kappa.is_empty() || grid.v.is_empty() || grid.n.is_empty() {
        return Err("every grid axis must be nonempty".into());
    }
    if grid.trials == 0 {
        return Err("trials must be positive".into());
    }
    let mut cells = Vec::new();
    for &k in &grid.k {
        for &epsilon in &grid.epsilon {
            for &kappa in &grid.kappa {
                for &v in &grid.v {
                    for &n in &grid.n {
                        cells.push((k, epsilon, kappa, v, n));
                    }
                }
            }
        }
    }
    Ok(cells
        .iter()
        .enumerate()
        .map(|(i, &(k, e, kp, v, n))| minimax_cell(grid, k, e, kp, v, n, derive_seed(grid.seed, i as u64)))
        .collect())
}

/// Tab-separated rows with a header line.
pub fn to_tsv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 output"))
}
