#![allow(dead_code)]

use nilab_core::{ClassifierTable, FinitePosteriorTriple, SimplexVector};
use proptest::prelude::*;
use rand::Rng;

/// Small-integer weights produce exact ties; continuous weights do not.
pub fn simplex(k: usize) -> impl Strategy<Value = SimplexVector> {
    prop_oneof![
        prop::collection::vec(0u32..4, k)
            .prop_filter("positive mass", |w| w.iter().any(|&x| x > 0))
            .prop_map(|w| {
                let s: u32 = w.iter().sum();
                SimplexVector::new(w.iter().map(|&x| x as f64 / s as f64).collect()).unwrap()
            }),
        prop::collection::vec(0.001f64..1.0, k).prop_map(|w| {
            let s: f64 = w.iter().sum();
            SimplexVector::new(w.iter().map(|x| x / s).collect()).unwrap()
        }),
    ]
}

pub fn triple(max_points: usize, max_k: usize) -> impl Strategy<Value = FinitePosteriorTriple> {
    (2..=max_k, 1..=max_points).prop_flat_map(|(k, m)| {
        (
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(simplex(k), m),
            prop::collection::vec(simplex(k), m),
        )
            .prop_map(move |(w, eta, eta_tilde)| {
                let s: f64 = w.iter().sum();
                let px = w.iter().map(|x| x / s).collect();
                FinitePosteriorTriple::new(k, px, eta, eta_tilde).unwrap()
            })
    })
}

pub fn triple_and_classifier(
    max_points: usize,
    max_k: usize,
) -> impl Strategy<Value = (FinitePosteriorTriple, ClassifierTable)> {
    triple(max_points, max_k).prop_flat_map(|t| {
        let (m, k) = (t.len(), t.k());
        (Just(t), prop::collection::vec(0..k, m).prop_map(ClassifierTable::new))
    })
}

/// Uniform draw from the open simplex.
pub fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> SimplexVector {
    let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    SimplexVector::new(w.iter().map(|x| x / s).collect()).unwrap()
}

/// Every classifier table on `m` points with `k` classes.
pub fn all_tables(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..k).map(move |c| {
                    let mut t = t.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}
