//! Adversarial instances behind the minimax lower bounds.
//!
//! Both constructions live on `V + 1` points `x_0, ..., x_V`. At `x_0` the noisy
//! label is always class 0 while the clean label is an arbitrary class `j`, so
//! the noisy data carries no information there. At `x_1, ..., x_{V-1}` the clean
//! and noisy posteriors lean toward class `b_t` in `{0, 1}`, and at `x_V` both
//! lean toward class 0.
//!
//! For `K = 2` the RSS at `x_1, ..., x_V` is exactly `kappa + delta`. For `K >= 3`
//! the classes outside `{0, 1}` shrink it to
//! `min(kappa + delta, (1/2 + c) / (1/2 + c / (kappa + delta)))`, which still
//! exceeds `kappa` near `kappa = 1`. The builders check class membership and
//! reject parameter choices that fall outside it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::posterior::{FinitePosteriorTriple, SimplexVector};
use crate::rss::pi_membership;

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Instance whose noisy posterior is one-hot everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroErrorSpec {
    pub epsilon: f64,
    pub kappa: f64,
    pub delta: f64,
    pub v: usize,
    pub k: usize,
    /// Sample size entering the point weights.
    pub n_design: u64,
    /// Clean class at `x_0`.
    pub j: usize,
    /// Leaning class at `x_1, ..., x_{V-1}`.
    pub b: Vec<usize>,
}

/// Instance with noisy posteriors separated by `2c` at `x_1, ..., x_{V-1}`,
/// each of which has weight `(1 - epsilon) p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralSpec {
    pub epsilon: f64,
    pub kappa: f64,
    pub delta: f64,
    pub v: usize,
    pub k: usize,
    pub c: f64,
    pub p: f64,
    pub j: usize,
    pub b: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MinimaxInstanceSpec {
    ZeroError(ZeroErrorSpec),
    General(GeneralSpec),
}

impl ZeroErrorSpec {
    /// Spec with `j = 0`, `b = 0` and the default slack.
    pub fn new(epsilon: f64, kappa: f64, v: usize, k: usize, n_design: u64) -> Self {
        Self {
            epsilon,
            kappa,
            delta: DEFAULT_DELTA,
            v,
            k,
            n_design,
            j: 0,
            b: vec![0; v.saturating_sub(1)],
        }
    }

    pub fn clean_gap(&self) -> f64 {
        1.0 / (2.0 * (self.kappa + self.delta))
    }
}

impl GeneralSpec {
    /// Noisy Bayes-risk level `(V-1) p (1/2 - c)`.
    pub fn l_level(&self) -> f64 {
        (self.v as f64 - 1.0) * self.p * (0.5 - self.c)
    }

    /// Noise gap `c = sqrt((V-1) / (8 n L))` and the matching `p`, with `j = 0`,
    /// `b = 0`.
    pub fn preset(epsilon: f64, kappa: f64, v: usize, k: usize, n: u64, l_level: f64) -> Result<Self> {
        if !(l_level > 0.0 && l_level < 0.5) {
            return Err(invalid("l_level", format!("{l_level} is outside (0, 1/2)")));
        }
        if v < 2 || n == 0 {
            return Err(invalid("v", "preset needs V >= 2 and n >= 1"));
        }
        let vm1 = v as f64 - 1.0;
        let c = (vm1 / (8.0 * n as f64 * l_level)).sqrt();
        if c >= 0.5 {
            return Err(invalid("n", format!("too small: noise gap {c} >= 1/2")));
        }
        Ok(Self {
            epsilon,
            kappa,
            delta: DEFAULT_DELTA,
            v,
            k,
            c,
            p: l_level / (vm1 * (0.5 - c)),
            j: 0,
            b: vec![0; v - 1],
        })
    }

    pub fn clean_gap(&self) -> f64 {
        self.c / (self.kappa + self.delta)
    }
}

impl MinimaxInstanceSpec {
    pub fn epsilon(&self) -> f64 {
        match self {
            Self::ZeroError(s) => s.epsilon,
            Self::General(s) => s.epsilon,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            Self::ZeroError(s) => s.kappa,
            Self::General(s) => s.kappa,
        }
    }

    pub fn v(&self) -> usize {
        match self {
            Self::ZeroError(s) => s.v,
            Self::General(s) => s.v,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::ZeroError(s) => s.k,
            Self::General(s) => s.k,
        }
    }

    /// Same spec with the adversary's choices replaced.
    pub fn with_assignment(&self, j: usize, b: Vec<usize>) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::ZeroError(s) => {
                s.j = j;
                s.b = b;
            }
            Self::General(s) => {
                s.j = j;
                s.b = b;
            }
        }
        out
    }

    pub fn build(&self) -> Result<FinitePosteriorTriple> {
        match self {
            Self::ZeroError(s) => build_zero_error_instance(s),
            Self::General(s) => build_general_instance(s),
        }
    }
}

fn check_common(
    epsilon: f64,
    kappa: f64,
    delta: f64,
    v: usize,
    k: usize,
    j: usize,
    b: &[usize],
) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid("epsilon", format!("{epsilon} is outside [0, 1]")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid("kappa", format!("{kappa} must be positive")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    if v < 2 {
        return Err(invalid("v", format!("need V >= 2, got {v}")));
    }
    if k < 2 {
        return Err(invalid("k", format!("need K >= 2, got {k}")));
    }
    if j >= k {
        return Err(invalid("j", format!("class {j} out of range for K = {k}")));
    }
    if b.len() != v - 1 {
        return Err(Error::DimensionMismatch {
            expected: v - 1,
            got: b.len(),
        });
    }
    if let Some(bad) = b.iter().find(|&&x| x > 1) {
        return Err(invalid("b", format!("entries must be 0 or 1, got {bad}")));
    }
    Ok(())
}

/// Two-class leaning vector: `1/2 + gap` on `lead`, `1/2 - gap` on the other of
/// classes `{0, 1}`, zero elsewhere.
fn leaning(k: usize, lead: usize, gap: f64) -> Result<SimplexVector> {
    let mut v = vec![0.0; k];
    v[lead] = 0.5 + gap;
    v[1 - lead] = 0.5 - gap;
    SimplexVector::new(v)
}

fn check_gap(gap: f64) -> Result<()> {
    if gap > 0.5 {
        return Err(invalid(
            "kappa",
            format!("clean gap {gap} exceeds 1/2; the construction needs kappa + delta >= 1"),
        ));
    }
    Ok(())
}

fn finish(t: FinitePosteriorTriple, epsilon: f64, kappa: f64) -> Result<FinitePosteriorTriple> {
    if pi_membership(&t, epsilon, kappa, 0.0)? {
        Ok(t)
    } else {
        Err(Error::OutsideClass(format!(
            "signal region mass falls short of 1 - epsilon at kappa = {kappa}"
        )))
    }
}

pub fn build_zero_error_instance(s: &ZeroErrorSpec) -> Result<FinitePosteriorTriple> {
    check_common(s.epsilon, s.kappa, s.delta, s.v, s.k, s.j, &s.b)?;
    if s.n_design < s.v as u64 {
        return Err(invalid("n_design", format!("must exceed V - 1 = {}", s.v - 1)));
    }
    let g = s.clean_gap();
    check_gap(g)?;
    let vm1 = (s.v - 1) as f64;
    let w = (1.0 - s.epsilon) / s.n_design as f64;
    let mut px = vec![s.epsilon];
    px.extend(std::iter::repeat_n(w, s.v - 1));
    px.push((1.0 - s.epsilon) * (1.0 - vm1 / s.n_design as f64));

    let mut eta = vec![SimplexVector::one_hot(s.k, s.j)?];
    let mut eta_tilde = vec![SimplexVector::one_hot(s.k, 0)?];
    for &bt in &s.b {
        eta.push(leaning(s.k, bt, g)?);
        eta_tilde.push(SimplexVector::one_hot(s.k, bt)?);
    }
    eta.push(leaning(s.k, 0, g)?);
    eta_tilde.push(SimplexVector::one_hot(s.k, 0)?);
    finish(FinitePosteriorTriple::new(s.k, px, eta, eta_tilde)?, s.epsilon, s.kappa)
}

pub fn build_general_instance(s: &GeneralSpec) -> Result<FinitePosteriorTriple> {
    check_common(s.epsilon, s.kappa, s.delta, s.v, s.k, s.j, &s.b)?;
    if !(s.c > 0.0 && s.c < 0.5) {
        return Err(invalid("c", format!("{} is outside (0, 1/2)", s.c)));
    }
    let vm1 = (s.v - 1) as f64;
    if !(s.p > 0.0 && vm1 * s.p <= 1.0) {
        return Err(invalid("p", format!("need 0 < (V-1) p <= 1, got p = {}", s.p)));
    }
    let g = s.clean_gap();
    let g_last = 1.0 / (2.0 * (s.kappa + s.delta));
    check_gap(g)?;
    check_gap(g_last)?;
    let w = (1.0 - s.epsilon) * s.p;
    let mut px = vec![s.epsilon];
    px.extend(std::iter::repeat_n(w, s.v - 1));
    px.push(((1.0 - s.epsilon) * (1.0 - vm1 * s.p)).max(0.0));

    let mut eta = vec![SimplexVector::one_hot(s.k, s.j)?];
    let mut eta_tilde = vec![SimplexVector::one_hot(s.k, 0)?];
    for &bt in &s.b {
        eta.push(leaning(s.k, bt, g)?);
        eta_tilde.push(leaning(s.k, bt, s.c)?);
    }
    eta.push(leaning(s.k, 0, g_last)?);
    eta_tilde.push(SimplexVector::one_hot(s.k, 0)?);
    finish(FinitePosteriorTriple::new(s.k, px, eta, eta_tilde)?, s.epsilon, s.kappa)
}
