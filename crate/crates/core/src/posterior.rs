//! Exact probability algebra for label-noise problems on a finite support.
//!
//! A problem is the triple `(P_X, eta, eta_tilde)`: a weight per support point,
//! the clean class posterior and the noisy class posterior at every point. The
//! noise-transition view is recovered through [`TransitionMatrix::compose`],
//! which maps a clean posterior to `E^T eta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|sum - 1|` accepted when validating a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default tie tolerance for posteriors estimated from data.
pub const ESTIMATED_TIE_TOL: f64 = 1e-9;

/// Validates a probability vector and renormalizes it when its sum drifts from
/// one by more than accumulated rounding.
///
/// Vectors whose sum is within a few ulps of one are kept bit-for-bit so that
/// decimal literals survive a parse/serialize round trip unchanged.
fn checked_probs(mut probs: Vec<f64>, min_len: usize, what: &str) -> Result<Vec<f64>> {
    if probs.len() < min_len {
        return Err(Error::InvalidSimplex(format!(
            "{what} needs at least {min_len} entries, got {}",
            probs.len()
        )));
    }
    for (i, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidSimplex(format!("{what}[{i}] is not finite")));
        }
        if *p < 0.0 {
            if *p < -SIMPLEX_TOL {
                return Err(Error::InvalidSimplex(format!("{what}[{i}] = {p} is negative")));
            }
            *p = 0.0;
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidSimplex(format!("{what} sums to {sum}, not 1")));
    }
    let rounding = 2.0 * probs.len() as f64 * f64::EPSILON;
    if (sum - 1.0).abs() > rounding {
        for p in probs.iter_mut() {
            *p /= sum;
        }
    }
    Ok(probs)
}

/// Dot product with error-free transformations of every product and partial
/// sum, accurate to about one rounding of the final result.
fn compensated_dot(a: &[f64], b: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (&x, y) in a.iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        let s_err = (s - (t - z)) + (p - z);
        s = t;
        c += p_err + s_err;
    }
    s + c
}

/// A class-probability vector on `K >= 2` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(v: SimplexVector) -> Self {
        v.0
    }
}

impl SimplexVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        checked_probs(probs, 2, "class probability vector").map(Self)
    }

    pub fn one_hot(k: usize, class: usize) -> Result<Self> {
        if class >= k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: class + 1,
            });
        }
        let mut probs = vec![0.0; k];
        probs[class] = 1.0;
        Self::new(probs)
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// All classes whose probability is within `tie_tol` of the maximum, in
    /// increasing order. Never empty.
    pub fn argmax_set(&self, tie_tol: f64) -> Vec<usize> {
        let tie_tol = tie_tol.max(0.0);
        let max = self.max();
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= max - tie_tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Lowest-index maximizer.
    pub fn argmax(&self) -> usize {
        let max = self.max();
        self.0.iter().position(|&p| p == max).unwrap_or(0)
    }
}

impl std::ops::Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-stochastic `K x K` matrix; entry `(i, j)` is `P(noisy = j | clean = i, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    rows: Vec<SimplexVector>,
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.rows.into_iter().map(Vec::from).collect()
    }
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        let rows = rows
            .into_iter()
            .map(|r| {
                if r.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: r.len(),
                    });
                }
                SimplexVector::new(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn identity(k: usize) -> Result<Self> {
        let rows = (0..k)
            .map(|i| SimplexVector::one_hot(k, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// The matrix `1 eta_tilde^T`: every row equals `eta_tilde`. Composing it
    /// with any clean posterior yields `eta_tilde`, so any posterior-drift
    /// triple can be written in transition form.
    pub fn rank_one(eta_tilde: &SimplexVector) -> Self {
        Self {
            rows: vec![eta_tilde.clone(); eta_tilde.k()],
        }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &SimplexVector {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SimplexVector] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    /// Noisy posterior `E^T eta`.
    pub fn compose(&self, eta: &SimplexVector) -> Result<SimplexVector> {
        let k = self.k();
        if eta.k() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: eta.k(),
            });
        }
        let out = (0..k)
            .map(|j| compensated_dot(eta.as_slice(), self.rows.iter().map(|r| r[j])))
            .collect();
        SimplexVector::new(out)
    }
}

/// Selects the clean or the noisy posterior of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Clean,
    Noisy,
}

/// A classifier on a finite support: one class index per support point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassifierTable {
    pub labels: Vec<usize>,
}

impl ClassifierTable {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn constant(len: usize, class: usize) -> Self {
        Self {
            labels: vec![class; len],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TripleDoc {
    k: usize,
    support: Vec<u64>,
    px: Vec<f64>,
    eta: Vec<SimplexVector>,
    eta_tilde: Vec<SimplexVector>,
}

/// A label-noise problem `(P_X, eta, eta_tilde)` on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TripleDoc", into = "TripleDoc")]
pub struct FinitePosteriorTriple {
    k: usize,
    support: Vec<u64>,
    px: Vec<f64>,
    eta: Vec<SimplexVector>,
    eta_tilde: Vec<SimplexVector>,
}

impl TryFrom<TripleDoc> for FinitePosteriorTriple {
    type Error = Error;

    fn try_from(doc: TripleDoc) -> Result<Self> {
        Self::with_support(doc.k, doc.support, doc.px, doc.eta, doc.eta_tilde)
    }
}

impl From<FinitePosteriorTriple> for TripleDoc {
    fn from(t: FinitePosteriorTriple) -> Self {
        TripleDoc {
            k: t.k,
            support: t.support,
            px: t.px,
            eta: t.eta,
            eta_tilde: t.eta_tilde,
        }
    }
}

impl FinitePosteriorTriple {
    /// Builds a triple whose support identifiers are `0..px.len()`.
    pub fn new(
        k: usize,
        px: Vec<f64>,
        eta: Vec<SimplexVector>,
        eta_tilde: Vec<SimplexVector>,
    ) -> Result<Self> {
        let support = (0..px.len() as u64).collect();
        Self::with_support(k, support, px, eta, eta_tilde)
    }

    pub fn with_support(
        k: usize,
        support: Vec<u64>,
        px: Vec<f64>,
        eta: Vec<SimplexVector>,
        eta_tilde: Vec<SimplexVector>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidSimplex(format!("need K >= 2 classes, got {k}")));
        }
        let px = checked_probs(px, 1, "P_X")?;
        let m = px.len();
        for (name, len) in [("support", support.len()), ("eta", eta.len()), ("eta_tilde", eta_tilde.len())] {
            if len != m {
                return Err(Error::InvalidSimplex(format!(
                    "{name} has {len} entries but P_X has {m}"
                )));
            }
        }
        for v in eta.iter().chain(&eta_tilde) {
            if v.k() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: v.k(),
                });
            }
        }
        Ok(Self {
            k,
            support,
            px,
            eta,
            eta_tilde,
        })
    }

    /// Builds the triple whose noisy posterior at each point is `E(x)^T eta(x)`.
    pub fn from_transitions(
        px: Vec<f64>,
        eta: Vec<SimplexVector>,
        transitions: &[TransitionMatrix],
    ) -> Result<Self> {
        if transitions.len() != eta.len() {
            return Err(Error::DimensionMismatch {
                expected: eta.len(),
                got: transitions.len(),
            });
        }
        let k = eta.first().map_or(0, SimplexVector::k);
        let eta_tilde = eta
            .iter()
            .zip(transitions)
            .map(|(e, m)| m.compose(e))
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, px, eta, eta_tilde)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.px.len()
    }

    pub fn is_empty(&self) -> bool {
        self.px.is_empty()
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn eta(&self) -> &[SimplexVector] {
        &self.eta
    }

    pub fn eta_tilde(&self) -> &[SimplexVector] {
        &self.eta_tilde
    }

    pub fn posteriors(&self, which: Which) -> &[SimplexVector] {
        match which {
            Which::Clean => &self.eta,
            Which::Noisy => &self.eta_tilde,
        }
    }

    fn check_classifier(&self, f: &ClassifierTable) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::InvalidClassifier(format!(
                "{} labels for a support of {} points",
                f.len(),
                self.len()
            )));
        }
        if let Some(&bad) = f.labels.iter().find(|&&c| c >= self.k) {
            return Err(Error::InvalidClassifier(format!(
                "label {bad} out of range for K = {}",
                self.k
            )));
        }
        Ok(())
    }

    /// `R(f) = sum_x P_X(x) (1 - [posterior(x)]_{f(x)})`.
    pub fn risk_of(&self, f: &ClassifierTable, which: Which) -> Result<f64> {
        self.check_classifier(f)?;
        Ok(self
            .px
            .iter()
            .zip(self.posteriors(which))
            .zip(&f.labels)
            .map(|((&w, post), &c)| w * (1.0 - post[c]))
            .sum())
    }

    /// `R* = sum_x P_X(x) (1 - max posterior(x))`.
    pub fn bayes_risk(&self, which: Which) -> f64 {
        self.px
            .iter()
            .zip(self.posteriors(which))
            .map(|(&w, post)| w * (1.0 - post.max()))
            .sum()
    }

    pub fn excess_risk(&self, f: &ClassifierTable, which: Which) -> Result<f64> {
        Ok(self.risk_of(f, which)? - self.bayes_risk(which))
    }

    /// Bayes classifier with the lowest-index tie-break.
    pub fn bayes_classifier(&self, which: Which) -> ClassifierTable {
        ClassifierTable::new(self.posteriors(which).iter().map(SimplexVector::argmax).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("triple serialization is infallible")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
