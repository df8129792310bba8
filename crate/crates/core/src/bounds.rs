//! Excess-risk bounds for learning from noisy labels, with explicit constants.
//!
//! Logarithms are natural throughout.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::posterior::{ClassifierTable, FinitePosteriorTriple, Which};
use crate::rss::pointwise_rss;

/// Parameters shared by the bound formulas. Optional fields are only read by
/// the formulas that need them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub epsilon: f64,
    pub kappa: f64,
    /// Natarajan dimension of the hypothesis class.
    pub v: u64,
    pub n: u64,
    pub k: u64,
    /// Noisy Bayes-risk level, general lower bound only.
    pub l_level: Option<f64>,
    pub alpha: Option<f64>,
    pub c_alpha: Option<f64>,
}

impl BoundQuery {
    pub fn new(epsilon: f64, kappa: f64, v: u64, n: u64, k: u64) -> Self {
        Self {
            epsilon,
            kappa,
            v,
            n,
            k,
            l_level: None,
            alpha: None,
            c_alpha: None,
        }
    }

    pub fn with_l_level(mut self, l: f64) -> Self {
        self.l_level = Some(l);
        self
    }

    pub fn with_margin(mut self, alpha: f64, c_alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self.c_alpha = Some(c_alpha);
        self
    }

    fn validate_common(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", format!("{} is outside [0, 1]", self.epsilon)));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        if self.k < 2 {
            return Err(invalid("k", format!("need K >= 2, got {}", self.k)));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa", format!("{} must be positive", self.kappa)));
        }
        if self.v == 0 {
            return Err(invalid("v", "must be positive"));
        }
        Ok(())
    }

    fn irreducible(&self) -> f64 {
        (self.k as f64 - 1.0) / self.k as f64 * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDetail {
    /// Term that does not shrink with `n`.
    pub irreducible: f64,
    /// Sample-size dependent term.
    pub estimation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    /// Whether the sample-size precondition of the bound holds.
    pub valid: bool,
    pub clamped: f64,
    pub detail: BoundDetail,
}

impl BoundReport {
    fn new(irreducible: f64, estimation: f64, valid: bool, kappa_star: Option<f64>) -> Self {
        let value = irreducible + estimation;
        Self {
            value,
            valid,
            clamped: value.min(1.0),
            detail: BoundDetail {
                irreducible,
                estimation,
                kappa_star,
            },
        }
    }
}

/// `ln(n^V K^(2V)) = V ln n + 2 V ln K`.
pub fn log_shatter_bound(n: u64, v: u64, k: u64) -> f64 {
    let v = v as f64;
    v * (n as f64).ln() + 2.0 * v * (k as f64).ln()
}

/// `16 sqrt((V ln n + 2 V ln K + 4) / (2n))`.
pub fn estimation_term(n: u64, v: u64, k: u64) -> f64 {
    16.0 * ((log_shatter_bound(n, v, k) + 4.0) / (2.0 * n as f64)).sqrt()
}

/// `min_kappa P_X(X \ A_kappa) + (R_noisy(f) - R_noisy*) / kappa` over the grid.
///
/// The detail records the minimizing `kappa` and its two terms.
pub fn oracle_rhs(
    t: &FinitePosteriorTriple,
    f: &ClassifierTable,
    kappa_grid: &[f64],
) -> Result<BoundReport> {
    if kappa_grid.is_empty() {
        return Err(invalid("kappa_grid", "is empty"));
    }
    if let Some(bad) = kappa_grid.iter().find(|k| !(**k > 0.0)) {
        return Err(invalid("kappa_grid", format!("{bad} must be positive")));
    }
    let noisy_excess = t.excess_risk(f, Which::Noisy)?.max(0.0);
    let values = pointwise_rss(t, 0.0);
    let mut best: Option<BoundReport> = None;
    for &kappa in kappa_grid {
        let outside: f64 = t
            .px()
            .iter()
            .zip(&values)
            .filter(|(_, m)| !m.exceeds(kappa))
            .map(|(w, _)| w)
            .sum();
        let r = BoundReport::new(outside, noisy_excess / kappa, true, Some(kappa));
        if best.is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    best.ok_or(Error::InvalidParameter {
        name: "kappa_grid",
        reason: "is empty".into(),
    })
}

/// Upper bound for noise-ignorant ERM: `epsilon + estimation_term / kappa`.
pub fn upper_bound_ni_erm(q: &BoundQuery) -> Result<BoundReport> {
    q.validate()?;
    Ok(BoundReport::new(
        q.epsilon,
        estimation_term(q.n, q.v, q.k) / q.kappa,
        true,
        None,
    ))
}

/// Minimax lower bound when the noisy Bayes risk is zero:
/// `(K-1)/K epsilon + (V-1)(1-epsilon) / (8 e n kappa)`, valid for `n > max(V-1, 2)`.
pub fn lower_bound_zero_error(q: &BoundQuery) -> Result<BoundReport> {
    q.validate()?;
    let (v, n) = (q.v as f64, q.n as f64);
    let est = (v - 1.0) * (1.0 - q.epsilon) / (8.0 * std::f64::consts::E * n) / q.kappa;
    let valid = q.n > (q.v - 1).max(2);
    Ok(BoundReport::new(q.irreducible(), est, valid, None))
}

/// Sample size from which the general lower bound holds:
/// `(V-1)/(2L) max{16, 1/(1-2L)^2}`.
pub fn general_lower_threshold(v: u64, l: f64) -> f64 {
    (v as f64 - 1.0) / (2.0 * l) * f64::max(16.0, 1.0 / (1.0 - 2.0 * l).powi(2))
}

/// Minimax lower bound at noisy Bayes risk `L`:
/// `(K-1)/K epsilon + (1-epsilon)/kappa sqrt((V-1) L / (2n)) e^-7`.
pub fn lower_bound_general(q: &BoundQuery) -> Result<BoundReport> {
    q.validate()?;
    let l = q.l_level.ok_or_else(|| invalid("l_level", "is required"))?;
    if !(l > 0.0 && l < 0.5) {
        return Err(invalid("l_level", format!("{l} is outside (0, 1/2)")));
    }
    let (v, n) = (q.v as f64, q.n as f64);
    let est = (1.0 - q.epsilon) / q.kappa * ((v - 1.0) * l / (2.0 * n)).sqrt() * (-7.0f64).exp();
    let valid = n >= general_lower_threshold(q.v, l);
    Ok(BoundReport::new(q.irreducible(), est, valid, None))
}

/// Minimizer over `kappa > 0` of `c kappa^alpha + u / kappa`.
pub fn smooth_kappa_star(u: f64, alpha: f64, c_alpha: f64) -> f64 {
    (u / (alpha * c_alpha)).powf(1.0 / (alpha + 1.0))
}

/// Bound under the smooth margin condition `P_X(M <= kappa) <= C kappa^alpha + epsilon`,
/// evaluated at the optimal `kappa*`. `q.kappa` is ignored.
pub fn smooth_margin_bound(q: &BoundQuery) -> Result<BoundReport> {
    q.validate_common()?;
    if q.v == 0 {
        return Err(invalid("v", "must be positive"));
    }
    let alpha = q.alpha.ok_or_else(|| invalid("alpha", "is required"))?;
    let c = q.c_alpha.ok_or_else(|| invalid("c_alpha", "is required"))?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("{alpha} must be positive")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c_alpha", format!("{c} must be positive")));
    }
    let u = estimation_term(q.n, q.v, q.k);
    Ok(smooth_margin_from_term(q.epsilon, u, alpha, c))
}

pub(crate) fn smooth_margin_from_term(epsilon: f64, u: f64, alpha: f64, c: f64) -> BoundReport {
    let ks = smooth_kappa_star(u, alpha, c);
    BoundReport::new(epsilon, c * ks.powf(alpha) + u / ks, true, Some(ks))
}
