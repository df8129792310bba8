//! Empirical RSS from plug-in posteriors of a clean-label and a noisy-label model.

use ndarray::ArrayView2;
use nilab_core::bounds::{smooth_margin_bound, BoundQuery};
use nilab_core::{rss, RssValue};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{cross_validate, TrainConfig};
use crate::error::{Error, Result};
use crate::model::LinearModel;

pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// `(kappa, F(kappa))` with `F(kappa)` the fraction of values `<= kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub kappa: RssValue,
    pub cdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginFit {
    pub alpha: f64,
    pub c_alpha: f64,
    pub epsilon: f64,
    /// Smooth-margin bound value at the fitted parameters.
    pub bound: f64,
    pub kappa_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssEstimateReport {
    pub m_values: Vec<RssValue>,
    pub epsilon_hat: f64,
    /// One point per distinct value, ascending; infinite values form the last point.
    pub cdf: Vec<CdfPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<MarginFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean_choice: Option<Hyperparams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noisy_choice: Option<Hyperparams>,
}

impl RssEstimateReport {
    pub fn from_values(m_values: Vec<RssValue>) -> Result<Self> {
        if m_values.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = m_values.len() as f64;
        let zeros = m_values.iter().filter(|m| m.is_zero()).count();
        let mut finite: Vec<f64> = m_values.iter().filter_map(|m| m.finite()).collect();
        finite.sort_by(f64::total_cmp);
        let mut cdf = Vec::new();
        let mut i = 0;
        while i < finite.len() {
            let v = finite[i];
            while i < finite.len() && finite[i] == v {
                i += 1;
            }
            cdf.push(CdfPoint {
                kappa: RssValue::Finite(v),
                cdf: i as f64 / n,
            });
        }
        if finite.len() < m_values.len() {
            cdf.push(CdfPoint {
                kappa: RssValue::Infinite,
                cdf: 1.0,
            });
        }
        Ok(Self {
            m_values,
            epsilon_hat: zeros as f64 / n,
            cdf,
            fit: None,
            clean_choice: None,
            noisy_choice: None,
        })
    }

    /// Empirical CDF at `kappa`.
    pub fn cdf_at(&self, kappa: f64) -> f64 {
        let count = self.m_values.iter().filter(|m| !m.exceeds(kappa)).count();
        count as f64 / self.m_values.len() as f64
    }
}

/// Estimated RSS at each row of `eval_x`.
pub fn estimate_from_models(
    clean: &LinearModel,
    noisy: &LinearModel,
    eval_x: ArrayView2<f64>,
    tie_tol: f64,
) -> Result<Vec<RssValue>> {
    if clean.k() != noisy.k() {
        return Err(Error::DimensionMismatch {
            expected: clean.k(),
            got: noisy.k(),
        });
    }
    let p = clean.predict_proba_batch(eval_x)?;
    let q = noisy.predict_proba_batch(eval_x)?;
    p.par_iter()
        .zip(q.par_iter())
        .map(|(a, b)| Ok(rss(a, b, tie_tol)?))
        .collect()
}

/// Trains clean and noisy models with the same configuration and reports the
/// distribution of estimated RSS over `eval_x`.
pub fn estimate_report(
    train_x: ArrayView2<f64>,
    clean_labels: &[usize],
    noisy_labels: &[usize],
    eval_x: ArrayView2<f64>,
    k: usize,
    config: &TrainConfig,
    tie_tol: f64,
) -> Result<RssEstimateReport> {
    if clean_labels.len() != noisy_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: clean_labels.len(),
            got: noisy_labels.len(),
        });
    }
    let (clean, noisy) = rayon::join(
        || cross_validate(train_x, clean_labels, k, config),
        || cross_validate(train_x, noisy_labels, k, config),
    );
    let (clean, noisy) = (clean?, noisy?);
    let values = estimate_from_models(clean.model(), noisy.model(), eval_x, tie_tol)?;
    let mut report = RssEstimateReport::from_values(values)?;
    report.clean_choice = Some(Hyperparams {
        lambda: clean.chosen_lambda,
        max_iter: clean.chosen_max_iter,
    });
    report.noisy_choice = Some(Hyperparams {
        lambda: noisy.chosen_lambda,
        max_iter: noisy.chosen_max_iter,
    });
    Ok(report)
}

/// Smallest `C` with `F(kappa) - eps <= C kappa^alpha` at every positive
/// finite value in the report.
pub fn envelope_constant(report: &RssEstimateReport, alpha: f64) -> Option<f64> {
    report
        .cdf
        .iter()
        .filter_map(|p| p.kappa.finite().filter(|&k| k > 0.0).map(|k| (k, p.cdf)))
        .filter(|&(_, f)| f > report.epsilon_hat)
        .map(|(k, f)| (f - report.epsilon_hat) / k.powf(alpha))
        .reduce(f64::max)
}

/// Chooses the `(alpha, C_alpha)` envelope minimizing the smooth-margin bound
/// at `(epsilon_hat, n, v, k)`. Ties keep the earlier grid entry.
pub fn fit_smooth_margin(
    report: &RssEstimateReport,
    alpha_grid: &[f64],
    n_for_scoring: u64,
    v: u64,
    k: u64,
) -> Result<MarginFit> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidConfig("alpha grid must be nonempty".into()));
    }
    let mut best: Option<MarginFit> = None;
    for &alpha in alpha_grid {
        let c_alpha = envelope_constant(report, alpha)
            .ok_or_else(|| Error::Degenerate("no positive finite RSS values".into()))?;
        let b = smooth_margin_bound(&BoundQuery::new(report.epsilon_hat, 1.0, v, n_for_scoring, k).with_margin(alpha, c_alpha))?;
        if best.is_none_or(|f| b.value < f.bound) {
            best = Some(MarginFit {
                alpha,
                c_alpha,
                epsilon: report.epsilon_hat,
                bound: b.value,
                kappa_star: b.detail.kappa_star.expect("smooth bound reports kappa*"),
            });
        }
    }
    Ok(best.expect("nonempty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use RssValue::{Finite, Infinite};

    #[test]
    fn cdf_layout() {
        let r = RssValue::Finite;
        let rep = RssEstimateReport::from_values(vec![r(0.0), r(2.0), Infinite, r(0.5), r(2.0)]).unwrap();
        assert_eq!(rep.epsilon_hat, 0.2);
        let pts: Vec<(RssValue, f64)> = rep.cdf.iter().map(|p| (p.kappa, p.cdf)).collect();
        assert_eq!(
            pts,
            vec![(Finite(0.0), 0.2), (Finite(0.5), 0.4), (Finite(2.0), 0.8), (Infinite, 1.0)]
        );
        assert_eq!(rep.cdf_at(1.0), 0.4);
        assert!(RssEstimateReport::from_values(vec![]).is_err());
    }

    #[test]
    fn single_atom_envelope() {
        let rep = RssEstimateReport::from_values(vec![Finite(0.0), Finite(0.5), Finite(0.5), Finite(0.5)]).unwrap();
        for alpha in DEFAULT_ALPHA_GRID {
            let c = envelope_constant(&rep, alpha).unwrap();
            assert!((c - 0.75 / 0.5f64.powf(alpha)).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_values_are_rejected() {
        let rep = RssEstimateReport::from_values(vec![Finite(0.0), Infinite]).unwrap();
        assert!(matches!(
            fit_smooth_margin(&rep, &DEFAULT_ALPHA_GRID, 1000, 2, 2),
            Err(Error::Degenerate(_))
        ));
    }
}
