//! Noise-immunity diagnostics for transition matrices.
//!
//! A matrix is *universally immune* when it has the symmetric form: a common
//! off-diagonal value `e` in `[0, 1/K)` and `1 - (K-1) e` on the diagonal. Such
//! a matrix maps `eta` to `(1 - K e) eta + e 1`, so every argmax is preserved
//! and the relative signal strength is `1 - K e` everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::posterior::{FinitePosteriorTriple, SimplexVector, TransitionMatrix};

/// Default tolerance for recognizing the symmetric form.
pub const FORM_TOL: f64 = 1e-9;

/// A symmetric transition law with all derived quantities filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricNoiseSpec {
    pub k: usize,
    pub e_offdiag: f64,
    pub diag: f64,
    /// Probability that the observed label differs from the clean one.
    pub noise_rate: f64,
    /// RSS of every point under this noise, `1 - K e`.
    pub rss_level: f64,
}

/// One of the three equivalent parameterizations of symmetric noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetricParam {
    EOffdiag(f64),
    NoiseRate(f64),
    RssLevel(f64),
}

impl SymmetricNoiseSpec {
    pub fn from_offdiag(k: usize, e: f64) -> Result<Self> {
        if k < 2 {
            return Err(invalid("k", format!("need K >= 2, got {k}")));
        }
        let kf = k as f64;
        if !(0.0..1.0 / kf).contains(&e) {
            return Err(invalid("e_offdiag", format!("{e} is outside [0, 1/{k})")));
        }
        Ok(Self {
            k,
            e_offdiag: e,
            diag: 1.0 - (kf - 1.0) * e,
            noise_rate: (kf - 1.0) * e,
            rss_level: 1.0 - kf * e,
        })
    }

    pub fn from_noise_rate(k: usize, rho: f64) -> Result<Self> {
        if k < 2 {
            return Err(invalid("k", format!("need K >= 2, got {k}")));
        }
        let kf = k as f64;
        let max = (kf - 1.0) / kf;
        if !(0.0..max).contains(&rho) {
            return Err(invalid("noise_rate", format!("{rho} is outside [0, {max})")));
        }
        let mut spec = Self::from_offdiag(k, rho / (kf - 1.0))?;
        spec.noise_rate = rho;
        Ok(spec)
    }

    pub fn from_rss_level(k: usize, level: f64) -> Result<Self> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(invalid("rss_level", format!("{level} is outside (0, 1]")));
        }
        let mut spec = Self::from_offdiag(k, (1.0 - level) / k as f64)?;
        spec.rss_level = level;
        Ok(spec)
    }

    /// Accepts the alternative parameterization whose off-diagonal entries are
    /// `1/K - e_main/(K-1)`.
    pub fn from_main_text(k: usize, e_main: f64) -> Result<Self> {
        if k < 2 {
            return Err(invalid("k", format!("need K >= 2, got {k}")));
        }
        let kf = k as f64;
        Self::from_offdiag(k, 1.0 / kf - e_main / (kf - 1.0))
    }
}

pub fn sym_noise_stats(k: usize, param: SymmetricParam) -> Result<SymmetricNoiseSpec> {
    match param {
        SymmetricParam::EOffdiag(e) => SymmetricNoiseSpec::from_offdiag(k, e),
        SymmetricParam::NoiseRate(r) => SymmetricNoiseSpec::from_noise_rate(k, r),
        SymmetricParam::RssLevel(l) => SymmetricNoiseSpec::from_rss_level(k, l),
    }
}

pub fn make_symmetric(spec: &SymmetricNoiseSpec) -> Result<TransitionMatrix> {
    let checked = SymmetricNoiseSpec::from_offdiag(spec.k, spec.e_offdiag)?;
    let rows = (0..checked.k)
        .map(|i| {
            (0..checked.k)
                .map(|j| if i == j { checked.diag } else { checked.e_offdiag })
                .collect()
        })
        .collect();
    TransitionMatrix::from_rows(rows)
}

/// Every row has its diagonal entry as the unique maximum, by more than `tol`.
pub fn is_diagonally_dominant(e: &TransitionMatrix, tol: f64) -> bool {
    (0..e.k()).all(|i| {
        let d = e.entry(i, i);
        (0..e.k()).all(|j| j == i || d > e.entry(i, j) + tol)
    })
}

/// Recognizes the symmetric form and returns its off-diagonal value.
pub fn universal_form_decompose(e: &TransitionMatrix, tol: f64) -> Option<f64> {
    let k = e.k();
    let kf = k as f64;
    let off = e.entry(0, 1);
    let diag = 1.0 - (kf - 1.0) * off;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { diag } else { off };
            if (e.entry(i, j) - target).abs() > tol {
                return None;
            }
        }
    }
    (off < 1.0 / kf - tol).then_some(off)
}

/// Clean and noisy argmax sets agree at every support point.
pub fn is_immune(t: &FinitePosteriorTriple, tie_tol: f64) -> bool {
    t.eta()
        .iter()
        .zip(t.eta_tilde())
        .all(|(a, b)| a.argmax_set(tie_tol) == b.argmax_set(tie_tol))
}

/// Candidate clean posteriors, in search order: uniform, uniform with one
/// coordinate zeroed, one-hot, and near-uniform pair perturbations.
pub fn candidate_family(k: usize) -> Vec<SimplexVector> {
    let kf = k as f64;
    let mut out = Vec::new();
    out.push(vec![1.0 / kf; k]);
    for i in 0..k {
        let mut v = vec![1.0 / (kf - 1.0); k];
        v[i] = 0.0;
        out.push(v);
    }
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        out.push(v);
    }
    for delta in [1e-3, 1e-2, 0.05] {
        if delta >= 1.0 / kf {
            continue;
        }
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    let mut v = vec![1.0 / kf; k];
                    v[a] += delta;
                    v[b] -= delta;
                    out.push(v);
                }
            }
        }
    }
    out.into_iter()
        .map(|v| SimplexVector::new(v).expect("candidate is a distribution"))
        .collect()
}

/// Searches the candidate family for a clean posterior whose argmax set is not
/// preserved by `E^T`. Matrices in symmetric form are immune and yield `None`.
///
/// Noisy argmax sets are compared with tie tolerance `tol / (2K)`, the scale at
/// which an entry deviation above `tol` becomes visible in `E^T eta`.
pub fn find_counterexample(e: &TransitionMatrix, tol: f64) -> Option<SimplexVector> {
    if universal_form_decompose(e, tol).is_some() {
        return None;
    }
    let tie = tol / (2.0 * e.k() as f64);
    candidate_family(e.k()).into_iter().find(|eta| {
        let noisy = e.compose(eta).expect("dimensions agree");
        noisy.argmax_set(tie) != eta.argmax_set(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> TransitionMatrix {
        TransitionMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn dominance_examples() {
        assert!(is_diagonally_dominant(&TransitionMatrix::identity(4).unwrap(), FORM_TOL));
        let u = m(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(!is_diagonally_dominant(&u, FORM_TOL));
        assert!(!is_diagonally_dominant(&m(&[&[0.4, 0.6], &[0.3, 0.7]]), FORM_TOL));
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(
            universal_form_decompose(&TransitionMatrix::identity(3).unwrap(), FORM_TOL),
            Some(0.0)
        );
        let spec = SymmetricNoiseSpec::from_offdiag(10, 0.05).unwrap();
        let e = make_symmetric(&spec).unwrap();
        assert_eq!(universal_form_decompose(&e, FORM_TOL), Some(0.05));
        let cc = m(&[&[0.8, 0.1, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.1, 0.8]]);
        assert_eq!(universal_form_decompose(&cc, FORM_TOL), None);
        // uniform matrix sits on the excluded boundary e = 1/K
        assert_eq!(universal_form_decompose(&m(&[&[0.5, 0.5], &[0.5, 0.5]]), FORM_TOL), None);
    }

    #[test]
    fn constructor_examples() {
        for k in 2..6 {
            let e = make_symmetric(&SymmetricNoiseSpec::from_offdiag(k, 0.0).unwrap()).unwrap();
            assert_eq!(e, TransitionMatrix::identity(k).unwrap());
        }
        assert!(SymmetricNoiseSpec::from_noise_rate(10, 0.9).is_err());
        let e = make_symmetric(&SymmetricNoiseSpec::from_offdiag(2, 0.25).unwrap()).unwrap();
        assert_eq!(e, m(&[&[0.75, 0.25], &[0.25, 0.75]]));
        let bogus = SymmetricNoiseSpec {
            k: 3,
            e_offdiag: 0.5,
            diag: 0.0,
            noise_rate: 1.0,
            rss_level: -0.5,
        };
        assert!(make_symmetric(&bogus).is_err());
    }

    #[test]
    fn stats_conversions() {
        let s = sym_noise_stats(10, SymmetricParam::NoiseRate(0.45)).unwrap();
        assert!((s.e_offdiag - 0.05).abs() < 1e-15);
        assert!((s.rss_level - 0.5).abs() < 1e-14);
        for delta in [0.1, 0.01, 1e-6] {
            let s = sym_noise_stats(2, SymmetricParam::NoiseRate(0.5 - delta)).unwrap();
            assert!((s.rss_level - 2.0 * delta).abs() < 1e-12);
        }
        let s = sym_noise_stats(10, SymmetricParam::NoiseRate(0.9 - 1e-9)).unwrap();
        assert!(s.rss_level < 1e-7);
        let s = sym_noise_stats(5, SymmetricParam::RssLevel(0.25)).unwrap();
        assert!((s.e_offdiag - 0.15).abs() < 1e-15);
        assert!((s.noise_rate - 0.6).abs() < 1e-15);
        assert!(sym_noise_stats(5, SymmetricParam::RssLevel(0.0)).is_err());
        assert!(sym_noise_stats(5, SymmetricParam::EOffdiag(0.2)).is_err());
    }

    #[test]
    fn main_text_parameterization() {
        // off-diagonal 1/K - e_main/(K-1)
        let s = SymmetricNoiseSpec::from_main_text(4, 0.6).unwrap();
        assert!((s.e_offdiag - 0.05).abs() < 1e-15);
        let s = SymmetricNoiseSpec::from_main_text(4, 0.75).unwrap();
        assert!(s.e_offdiag.abs() < 1e-15);
        assert!(SymmetricNoiseSpec::from_main_text(4, 0.0).is_err());
    }

    #[test]
    fn counterexamples() {
        let e = make_symmetric(&SymmetricNoiseSpec::from_offdiag(3, 0.3).unwrap()).unwrap();
        assert!(find_counterexample(&e, FORM_TOL).is_none());

        let bad = m(&[&[0.4, 0.6], &[0.3, 0.7]]);
        let eta = find_counterexample(&bad, FORM_TOL).unwrap();
        let noisy = bad.compose(&eta).unwrap();
        assert_ne!(noisy.argmax_set(0.0), eta.argmax_set(0.0));

        // dominant but asymmetric: one-hot inputs pass, the uniform one fails
        let cc = m(&[&[0.8, 0.1, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.1, 0.8]]);
        assert!(find_counterexample(&cc, FORM_TOL).is_some());
    }

    #[test]
    fn example_two_is_not_immune() {
        let eta = SimplexVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        let noisy = SimplexVector::new(vec![0.0, 0.0, 1.0]).unwrap();
        let t = FinitePosteriorTriple::new(3, vec![1.0], vec![eta], vec![noisy]).unwrap();
        assert!(!is_immune(&t, 0.0));
    }
}
