//! Full-batch L-BFGS with Armijo backtracking.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{check_batch, loss_and_gradient, Loss};
use crate::model::LinearModel;

const MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

pub const DEFAULT_GRAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: LinearModel,
    /// Accepted steps taken.
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Objective before the first step and after every accepted step.
    pub objective_trace: Vec<f64>,
}

struct Objective<'a> {
    x: ArrayView2<'a, f64>,
    labels: &'a [usize],
    k: usize,
    loss: Loss,
    lambda: f64,
}

impl Objective<'_> {
    fn eval(&self, theta: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        let model = LinearModel::from_flat(self.k, self.x.ncols(), theta);
        let (f, g) = loss_and_gradient(&model, self.x, self.labels, self.loss, self.lambda)?;
        Ok((f, g.to_flat()))
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// `-H g` from the stored curvature pairs (two-loop recursion).
fn lbfgs_direction(g: &Array1<f64>, pairs: &VecDeque<(Array1<f64>, Array1<f64>, f64)>) -> Array1<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * s.dot(&q);
        q.scaled_add(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.scaled_add(a - b, s);
    }
    -q
}

/// Minimizes the regularized empirical risk from the zero model and returns a
/// snapshot after each iteration cap in `caps` (sorted ascending; a run that
/// converges early repeats its final state).
///
/// Snapshots are identical to separate fits with each cap, since the iterates
/// do not depend on the cap.
pub fn fit_path(
    x: ArrayView2<f64>,
    labels: &[usize],
    k: usize,
    loss: Loss,
    lambda: f64,
    caps: &[usize],
    grad_tol: f64,
) -> Result<Vec<FitResult>> {
    check_batch(x, labels, k)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda {lambda} must be >= 0")));
    }
    if caps.is_empty() || caps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("iteration caps must be nonempty and sorted".into()));
    }
    let obj = Objective {
        x,
        labels,
        k,
        loss,
        lambda,
    };
    let d = x.ncols();
    let mut theta = Array1::zeros(k * d + k);
    let (mut f, mut g) = obj.eval(&theta)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            value: f,
            lambda,
        });
    }
    let mut trace = vec![f];
    let mut pairs: VecDeque<(Array1<f64>, Array1<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut out = Vec::with_capacity(caps.len());
    let last_cap = *caps.last().expect("caps nonempty");

    let snapshot = |theta: &Array1<f64>, iterations, converged, g: &Array1<f64>, trace: &Vec<f64>| FitResult {
        model: LinearModel::from_flat(k, d, theta),
        iterations,
        converged,
        grad_norm: norm(g),
        objective_trace: trace.clone(),
    };

    let mut cap_idx = 0;
    loop {
        while cap_idx < caps.len() && (caps[cap_idx] <= iterations || converged) {
            out.push(snapshot(&theta, iterations, converged, &g, &trace));
            cap_idx += 1;
        }
        if cap_idx == caps.len() || iterations >= last_cap {
            break;
        }
        if norm(&g) <= grad_tol {
            converged = true;
            continue;
        }

        let mut dir = lbfgs_direction(&g, &pairs);
        let mut slope = g.dot(&dir);
        if pairs.is_empty() || !(slope < 0.0) {
            pairs.clear();
            dir = -&g / norm(&g).max(1.0);
            slope = g.dot(&dir);
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let mut step = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                let trial = &theta + &(&dir * step);
                let (ft, gt) = obj.eval(&trial)?;
                if ft.is_finite() && ft <= f + ARMIJO_C1 * step * slope && gt.iter().all(|v| v.is_finite()) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || pairs.is_empty() {
                break;
            }
            // quasi-Newton direction failed: retry along steepest descent
            pairs.clear();
            dir = -&g / norm(&g).max(1.0);
            slope = g.dot(&dir);
        }
        let Some((new_theta, new_f, new_g)) = accepted else {
            // no decrease representable at this precision
            converged = norm(&g) <= grad_tol;
            break;
        };
        let s = &new_theta - &theta;
        let y = &new_g - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        theta = new_theta;
        f = new_f;
        g = new_g;
        iterations += 1;
        trace.push(f);
        if !f.is_finite() {
            return Err(Error::NonFinite {
                iteration: iterations,
                value: f,
                lambda,
            });
        }
    }
    while out.len() < caps.len() {
        out.push(snapshot(&theta, iterations, converged, &g, &trace));
    }
    Ok(out)
}

/// Single fit with at most `max_iter` accepted steps.
pub fn fit(
    x: ArrayView2<f64>,
    labels: &[usize],
    k: usize,
    loss: Loss,
    lambda: f64,
    max_iter: usize,
    grad_tol: f64,
) -> Result<FitResult> {
    Ok(fit_path(x, labels, k, loss, lambda, &[max_iter], grad_tol)?
        .pop()
        .expect("one cap"))
}
