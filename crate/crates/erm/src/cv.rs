//! Stratified k-fold grid search over (lambda, iteration cap) on noisy labels.

use ndarray::{Array2, ArrayView2, Axis};
use nilab_core::rng::{derive_seed, seeded_rng};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{check_batch, Loss};
use crate::model::{accuracy, LinearModel};
use crate::optimizer::{fit, fit_path, FitResult, DEFAULT_GRAD_TOL};

pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_ITER_GRID: [usize; 4] = [10, 20, 50, 100];
pub const DEFAULT_FOLDS: usize = 5;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub lambda_grid: Vec<f64>,
    pub max_iter_grid: Vec<usize>,
    pub folds: usize,
    /// Seeds the fold shuffle.
    pub seed: u64,
    pub grad_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::CrossEntropy,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            max_iter_grid: DEFAULT_ITER_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            grad_tol: DEFAULT_GRAD_TOL,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.max_iter_grid.is_empty() {
            return Err(Error::InvalidConfig("grids must be nonempty".into()));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!("lambda {l} must be finite and >= 0")));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("folds = {} must be >= 2", self.folds)));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda: f64,
    pub max_iter: usize,
    pub mean_accuracy: f64,
    pub fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Lambda-major, in grid order.
    pub cells: Vec<CvCell>,
    pub chosen_lambda: f64,
    pub chosen_max_iter: usize,
    pub fit: FitResult,
}

impl CvReport {
    pub fn model(&self) -> &LinearModel {
        &self.fit.model
    }
}

/// Fold index per example. Each class is shuffled with a seeded RNG and dealt
/// round-robin, continuing where the previous class stopped.
pub fn stratified_folds(labels: &[usize], k: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("folds = {folds} must be >= 2")));
    }
    let mut by_class = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::InvalidLabel { label: y, k });
        }
        by_class[y].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < folds {
            return Err(Error::Stratification {
                class,
                count: members.len(),
                folds,
            });
        }
    }
    let mut rng = seeded_rng(seed);
    let mut assign = vec![0; labels.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assign[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(assign)
}

fn take_rows(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// True if `a` should be preferred over `b`: higher accuracy, then larger
/// lambda, then smaller cap.
fn better(a: &CvCell, b: &CvCell) -> bool {
    if (a.mean_accuracy - b.mean_accuracy).abs() > TIE_TOL {
        return a.mean_accuracy > b.mean_accuracy;
    }
    if a.lambda != b.lambda {
        return a.lambda > b.lambda;
    }
    a.max_iter < b.max_iter
}

pub fn cross_validate(x: ArrayView2<f64>, labels: &[usize], k: usize, config: &TrainConfig) -> Result<CvReport> {
    config.validate()?;
    check_batch(x, labels, k)?;
    let assign = stratified_folds(labels, k, config.folds, derive_seed(config.seed, 0))?;
    let mut caps = config.max_iter_grid.clone();
    caps.sort_unstable();
    caps.dedup();

    // accuracy[fold][lambda][cap]
    let jobs: Vec<(usize, usize)> = (0..config.folds)
        .flat_map(|f| (0..config.lambda_grid.len()).map(move |l| (f, l)))
        .collect();
    let results: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(fold, li)| {
            let (tr, va): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assign[i] != fold);
            let xt = take_rows(x, &tr);
            let yt: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
            let xv = take_rows(x, &va);
            let yv: Vec<usize> = va.iter().map(|&i| labels[i]).collect();
            let path = fit_path(xt.view(), &yt, k, config.loss, config.lambda_grid[li], &caps, config.grad_tol)?;
            path.iter().map(|r| accuracy(&r.model, xv.view(), &yv)).collect()
        })
        .collect();
    let mut acc = vec![vec![Vec::new(); config.lambda_grid.len()]; config.folds];
    for (&(fold, li), r) in jobs.iter().zip(results) {
        acc[fold][li] = r?;
    }

    let mut cells = Vec::with_capacity(config.lambda_grid.len() * config.max_iter_grid.len());
    for (li, &lambda) in config.lambda_grid.iter().enumerate() {
        for &max_iter in &config.max_iter_grid {
            let ci = caps.binary_search(&max_iter).expect("cap in sorted grid");
            let fold_accuracy: Vec<f64> = (0..config.folds).map(|f| acc[f][li][ci]).collect();
            let mean_accuracy = fold_accuracy.iter().sum::<f64>() / config.folds as f64;
            cells.push(CvCell {
                lambda,
                max_iter,
                mean_accuracy,
                fold_accuracy,
            });
        }
    }
    let best = cells
        .iter()
        .skip(1)
        .fold(&cells[0], |b, c| if better(c, b) { c } else { b });
    let (chosen_lambda, chosen_max_iter) = (best.lambda, best.max_iter);
    let fit = fit(x, labels, k, config.loss, chosen_lambda, chosen_max_iter, config.grad_tol)?;
    Ok(CvReport {
        cells,
        chosen_lambda,
        chosen_max_iter,
        fit,
    })
}
