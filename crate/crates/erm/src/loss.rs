//! Per-example losses on softmax scores and the regularized empirical objective.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_sum_exp, softmax, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `-ln p_y`.
    CrossEntropy,
    /// `sum_j |p_j - 1{j = y}| = 2 (1 - p_y)`.
    Mae,
    /// `1 / (1 + exp(m))` with margin `m = s_y - ln sum_{j != y} exp(s_j)`.
    Sigmoid,
}

impl Loss {
    pub const ALL: [Loss; 3] = [Loss::CrossEntropy, Loss::Mae, Loss::Sigmoid];

    pub fn name(self) -> &'static str {
        match self {
            Loss::CrossEntropy => "cross_entropy",
            Loss::Mae => "mae",
            Loss::Sigmoid => "sigmoid",
        }
    }

    /// Loss at one example and its derivative with respect to the scores.
    pub fn eval(self, scores: ArrayView1<f64>, y: usize) -> (f64, Array1<f64>) {
        let k = scores.len();
        match self {
            Loss::CrossEntropy => {
                let lse = log_sum_exp(scores.iter().copied());
                let mut g = softmax(scores);
                g[y] -= 1.0;
                (lse - scores[y], g)
            }
            Loss::Mae => {
                let p = softmax(scores);
                let py = p[y];
                // d p_y / d s_j = p_y (1{j = y} - p_j)
                let g = Array1::from_shape_fn(k, |j| {
                    let own = if j == y { 1.0 } else { 0.0 };
                    -2.0 * py * (own - p[j])
                });
                (2.0 * (1.0 - py), g)
            }
            Loss::Sigmoid => {
                let others = scores
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != y)
                    .map(|(_, &s)| s);
                let lse = log_sum_exp(others);
                let m = scores[y] - lse;
                let loss = if m >= 0.0 {
                    let e = (-m).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + m.exp())
                };
                let dm = -loss * (1.0 - loss);
                let g = Array1::from_shape_fn(k, |j| {
                    if j == y {
                        dm
                    } else {
                        -dm * (scores[j] - lse).exp()
                    }
                });
                (loss, g)
            }
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cross_entropy" | "ce" => Ok(Loss::CrossEntropy),
            "mae" => Ok(Loss::Mae),
            "sigmoid" => Ok(Loss::Sigmoid),
            other => Err(Error::InvalidConfig(format!("unknown loss {other:?}"))),
        }
    }
}

pub(crate) fn check_batch(x: ArrayView2<f64>, labels: &[usize], k: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::InvalidLabel { label, k });
    }
    Ok(())
}

/// Mean loss plus `lambda ||W||^2 / 2` (bias unregularized) and its gradient.
pub fn loss_and_gradient(
    model: &LinearModel,
    x: ArrayView2<f64>,
    labels: &[usize],
    loss: Loss,
    lambda: f64,
) -> Result<(f64, LinearModel)> {
    check_batch(x, labels, model.k())?;
    let scores = model.scores(x)?;
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut g_scores = Array2::zeros(scores.raw_dim());
    for ((row, mut g_row), &y) in scores.rows().into_iter().zip(g_scores.rows_mut()).zip(labels) {
        let (l, g) = loss.eval(row, y);
        total += l;
        g_row.assign(&g);
    }
    g_scores /= n;
    let grad_w = g_scores.t().dot(&x) + &(&model.weights * lambda);
    let grad_b = g_scores.sum_axis(ndarray::Axis(0));
    let penalty = 0.5 * lambda * model.weights.iter().map(|w| w * w).sum::<f64>();
    Ok((
        total / n + penalty,
        LinearModel {
            weights: grad_w,
            bias: grad_b,
        },
    ))
}
