//! Relative signal strength, signal regions and class membership.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::posterior::{FinitePosteriorTriple, SimplexVector};

/// Mass slack used when comparing region masses against `1 - epsilon`.
pub const MASS_TOL: f64 = 1e-12;

/// A nonnegative extended real. `Infinite` orders above every finite value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum RssValue {
    Finite(f64),
    Infinite,
}

impl RssValue {
    pub fn is_infinite(self) -> bool {
        matches!(self, RssValue::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            RssValue::Finite(v) => Some(v),
            RssValue::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite value.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn exceeds(self, kappa: f64) -> bool {
        match self {
            RssValue::Finite(v) => v > kappa,
            RssValue::Infinite => true,
        }
    }

    pub fn is_zero(self) -> bool {
        self == RssValue::Finite(0.0)
    }
}

impl fmt::Display for RssValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RssValue::Finite(v) => write!(f, "{v}"),
            RssValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for RssValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RssValue::Finite(v) => s.serialize_f64(*v),
            RssValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RssValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;

        impl Visitor<'_> for V {
            type Value = RssValue;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<RssValue, E> {
                if v.is_nan() || v < 0.0 {
                    return Err(E::custom(format!("invalid RSS value {v}")));
                }
                Ok(if v.is_infinite() {
                    RssValue::Infinite
                } else {
                    RssValue::Finite(v)
                })
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<RssValue, E> {
                Ok(RssValue::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<RssValue, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<RssValue, E> {
                match v {
                    "inf" | "+inf" | "Infinity" => Ok(RssValue::Infinite),
                    _ => Err(E::custom(format!("invalid RSS value {v:?}"))),
                }
            }
        }

        d.deserialize_any(V)
    }
}

/// `M(eta, eta_tilde) = min_j (max eta_tilde - eta_tilde_j) / (max eta - eta_j)`.
///
/// A clean gap at most `tie_tol` makes the ratio `+inf` (this covers `0/0`);
/// otherwise a noisy gap at most `tie_tol` makes it `0`.
pub fn rss(eta: &SimplexVector, eta_tilde: &SimplexVector, tie_tol: f64) -> Result<RssValue> {
    if eta.k() != eta_tilde.k() {
        return Err(Error::DimensionMismatch {
            expected: eta.k(),
            got: eta_tilde.k(),
        });
    }
    let tol = tie_tol.max(0.0);
    let top = eta.max();
    let top_tilde = eta_tilde.max();
    let mut best = RssValue::Infinite;
    for (&p, &q) in eta.as_slice().iter().zip(eta_tilde.as_slice()) {
        let den = top - p;
        if den <= tol {
            continue;
        }
        let num = top_tilde - q;
        if num <= tol {
            return Ok(RssValue::Finite(0.0));
        }
        let r = RssValue::Finite(num / den);
        if r < best {
            best = r;
        }
    }
    Ok(best)
}

/// Binary RSS from the class-1 probabilities: `max{(q - 1/2) / (p - 1/2), 0}`,
/// `+inf` at `p = 1/2`.
pub fn rss_binary(eta1: f64, eta_tilde1: f64) -> Result<RssValue> {
    for (name, v) in [("eta1", eta1), ("eta_tilde1", eta_tilde1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(name, format!("{v} is outside [0, 1]")));
        }
    }
    if eta1 == 0.5 {
        return Ok(RssValue::Infinite);
    }
    Ok(RssValue::Finite(((eta_tilde1 - 0.5) / (eta1 - 0.5)).max(0.0)))
}

/// RSS at every support point.
pub fn pointwise_rss(t: &FinitePosteriorTriple, tie_tol: f64) -> Vec<RssValue> {
    t.eta()
        .iter()
        .zip(t.eta_tilde())
        .map(|(e, et)| rss(e, et, tie_tol).expect("triple posteriors share K"))
        .collect()
}

/// Masses of the signal regions `A_kappa = {x : M(x) > kappa}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub kappa: Vec<f64>,
    pub mass: Vec<f64>,
    /// `P_X(X \ A_0)`.
    pub epsilon0: f64,
}

fn mass_above(px: &[f64], values: &[RssValue], kappa: f64) -> f64 {
    px.iter()
        .zip(values)
        .filter(|(_, m)| m.exceeds(kappa))
        .map(|(w, _)| w)
        .sum()
}

pub fn region_masses(
    t: &FinitePosteriorTriple,
    kappa_list: &[f64],
    tie_tol: f64,
) -> Result<RegionReport> {
    if let Some(bad) = kappa_list.iter().find(|k| !(**k >= 0.0)) {
        return Err(invalid("kappa", format!("{bad} must be >= 0")));
    }
    let values = pointwise_rss(t, tie_tol);
    let mut kappa = kappa_list.to_vec();
    kappa.sort_by(f64::total_cmp);
    let mass = kappa
        .iter()
        .map(|&k| mass_above(t.px(), &values, k))
        .collect();
    let epsilon0 = t
        .px()
        .iter()
        .zip(&values)
        .filter(|(_, m)| !m.exceeds(0.0))
        .map(|(w, _)| w)
        .sum();
    Ok(RegionReport {
        kappa,
        mass,
        epsilon0,
    })
}

/// Indices of the support points where the noisy argmax set is contained in
/// the clean argmax set.
pub fn positive_region(t: &FinitePosteriorTriple, tie_tol: f64) -> Vec<usize> {
    t.eta()
        .iter()
        .zip(t.eta_tilde())
        .enumerate()
        .filter(|(_, (e, et))| {
            let clean = e.argmax_set(tie_tol);
            et.argmax_set(tie_tol).iter().all(|j| clean.contains(j))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Whether `P_X(A_kappa) >= 1 - epsilon`.
pub fn pi_membership(
    t: &FinitePosteriorTriple,
    epsilon: f64,
    kappa: f64,
    tie_tol: f64,
) -> Result<bool> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid("epsilon", format!("{epsilon} is outside [0, 1]")));
    }
    if !(kappa >= 0.0) {
        return Err(invalid("kappa", format!("{kappa} must be >= 0")));
    }
    let values = pointwise_rss(t, tie_tol);
    Ok(mass_above(t.px(), &values, kappa) >= 1.0 - epsilon - MASS_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(p: &[f64]) -> SimplexVector {
        SimplexVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn worked_values() {
        let eta = sv(&[0.0, 1.0, 0.0]);
        assert_eq!(rss(&eta, &sv(&[0.3, 0.6, 0.1]), 0.0).unwrap(), RssValue::Finite(0.3));
        assert_eq!(rss(&eta, &sv(&[0.0, 0.0, 1.0]), 0.0).unwrap(), RssValue::Finite(0.0));
        assert_eq!(rss(&eta, &eta, 0.0).unwrap(), RssValue::Finite(1.0));
    }

    #[test]
    fn ordering_against_kl_intuition() {
        let p1 = sv(&[0.05, 0.7, 0.25]);
        let p2 = sv(&[0.25, 0.7, 0.05]);
        let p3 = sv(&[0.1, 0.6, 0.3]);
        let m2 = rss(&p1, &p2, 0.0).unwrap().to_f64();
        let m3 = rss(&p1, &p3, 0.0).unwrap().to_f64();
        assert!((m2 - 0.45 / 0.65).abs() < 1e-12);
        assert!((m3 - 0.3 / 0.45).abs() < 1e-12);
        assert!(m2 > m3);
    }

    #[test]
    fn ties_and_zero_gaps() {
        let u = sv(&[0.5, 0.5]);
        assert_eq!(rss(&u, &sv(&[0.9, 0.1]), 0.0).unwrap(), RssValue::Infinite);
        // positive numerator over zero denominator
        let eta = sv(&[0.4, 0.4, 0.2]);
        let m = rss(&eta, &sv(&[0.6, 0.1, 0.3]), 0.0).unwrap();
        assert!((m.to_f64() - 0.3 / 0.2).abs() < 1e-12);
        assert!(rss(&u, &sv(&[0.2, 0.3, 0.5]), 0.0).is_err());
    }

    #[test]
    fn binary_values() {
        assert!((rss_binary(0.8, 0.65).unwrap().to_f64() - 0.5).abs() < 1e-12);
        assert_eq!(rss_binary(0.5, 0.1).unwrap(), RssValue::Infinite);
        assert_eq!(rss_binary(0.7, 0.3).unwrap(), RssValue::Finite(0.0));
        assert!(rss_binary(1.2, 0.3).is_err());
    }

    #[test]
    fn infinite_orders_last_and_serializes_as_string() {
        assert!(RssValue::Finite(1e300) < RssValue::Infinite);
        assert_eq!(serde_json::to_string(&RssValue::Infinite).unwrap(), "\"inf\"");
        let back: Vec<RssValue> = serde_json::from_str("[0.25, \"inf\", 3]").unwrap();
        assert_eq!(
            back,
            vec![RssValue::Finite(0.25), RssValue::Infinite, RssValue::Finite(3.0)]
        );
        assert!(serde_json::from_str::<RssValue>("-1").is_err());
    }

    #[test]
    fn strict_region_masses() {
        // M = 0.5 at the first point, 0 at the second
        let t = FinitePosteriorTriple::new(
            2,
            vec![0.7, 0.3],
            vec![sv(&[0.9, 0.1]), sv(&[0.9, 0.1])],
            vec![sv(&[0.7, 0.3]), sv(&[0.3, 0.7])],
        )
        .unwrap();
        let r = region_masses(&t, &[0.5, 0.0], 0.0).unwrap();
        assert_eq!(r.kappa, vec![0.0, 0.5]);
        assert!((r.mass[0] - 0.7).abs() < 1e-15);
        assert_eq!(r.mass[1], 0.0);
        assert!((r.epsilon0 - 0.3).abs() < 1e-15);
        assert_eq!(positive_region(&t, 0.0), vec![0]);
        assert!(pi_membership(&t, 0.3, 0.0, 0.0).unwrap());
        assert!(!pi_membership(&t, 0.29, 0.0, 0.0).unwrap());
        assert!(pi_membership(&t, 1.0, 0.0, 0.0).unwrap());
        assert!(region_masses(&t, &[-1.0], 0.0).is_err());
    }
}
