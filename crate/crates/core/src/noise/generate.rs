//! Data generators and label-flipping processes.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::posterior::{FinitePosteriorTriple, SimplexVector, TransitionMatrix, Which};
use crate::rng::seeded_rng;

pub const DEFAULT_PER_CLASS: usize = 200;

pub const DEFAULT_CENTERS: [[f64; 2]; 2] = [[1.0, 1.0], [-1.0, -1.0]];

/// Feature vectors with their clean labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub seed: u64,
}

/// A sample over a finite support: point indices and their labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub points: Vec<usize>,
    pub labels: Vec<usize>,
    pub seed: u64,
}

impl LabeledSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Isotropic Gaussian classes with unit variance: `n_per_class` points around
/// each center, class `y` in block `y` of the output.
pub fn gaussian_mixture(
    n_per_class: usize,
    centers: &[Vec<f64>],
    seed: u64,
) -> Result<FeatureSample> {
    if n_per_class == 0 {
        return Err(invalid("n_per_class", "must be positive"));
    }
    if centers.len() < 2 {
        return Err(invalid("centers", "need at least two classes"));
    }
    let dim = centers[0].len();
    if dim == 0 {
        return Err(invalid("centers", "empty center"));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: c.len(),
        });
    }
    let mut rng = seeded_rng(seed);
    let n = n_per_class * centers.len();
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (y, center) in centers.iter().enumerate() {
        for i in 0..n_per_class {
            let mut row = features.row_mut(y * n_per_class + i);
            for (x, &mu) in row.iter_mut().zip(center) {
                let z: f64 = rng.sample(StandardNormal);
                *x = mu + z;
            }
            labels.push(y);
        }
    }
    Ok(FeatureSample {
        features,
        labels,
        seed,
    })
}

/// The two-class mixture centered at `(1, 1)` and `(-1, -1)`.
pub fn default_gaussian_mixture(n_per_class: usize, seed: u64) -> Result<FeatureSample> {
    let centers: Vec<Vec<f64>> = DEFAULT_CENTERS.iter().map(|c| c.to_vec()).collect();
    gaussian_mixture(n_per_class, &centers, seed)
}

/// How observed labels are produced from clean ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// With probability `rate`, replace the label by a uniformly chosen other class.
    UniformFlip(f64),
    ClassConditional(TransitionMatrix),
    /// One matrix per sample position.
    InstanceDependent(Vec<TransitionMatrix>),
}

fn row_sampler(row: &SimplexVector) -> WeightedIndex<f64> {
    WeightedIndex::new(row.as_slice()).expect("a distribution has positive total mass")
}

fn check_matrix(m: &TransitionMatrix, k: usize) -> Result<()> {
    if m.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: m.k(),
        });
    }
    Ok(())
}

pub fn flip_labels(labels: &[usize], spec: &NoiseSpec, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(invalid("k", format!("need K >= 2, got {k}")));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(invalid("labels", format!("label {bad} out of range for K = {k}")));
    }
    let mut rng = seeded_rng(seed);
    match spec {
        NoiseSpec::UniformFlip(rate) => {
            if !(0.0..=1.0).contains(rate) {
                return Err(invalid("rate", format!("{rate} is outside [0, 1]")));
            }
            Ok(labels
                .iter()
                .map(|&y| {
                    if rng.random::<f64>() < *rate {
                        let r = rng.random_range(0..k - 1);
                        if r < y {
                            r
                        } else {
                            r + 1
                        }
                    } else {
                        y
                    }
                })
                .collect())
        }
        NoiseSpec::ClassConditional(m) => {
            check_matrix(m, k)?;
            let rows: Vec<_> = m.rows().iter().map(row_sampler).collect();
            Ok(labels.iter().map(|&y| rows[y].sample(&mut rng)).collect())
        }
        NoiseSpec::InstanceDependent(ms) => {
            if ms.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    got: ms.len(),
                });
            }
            labels
                .iter()
                .zip(ms)
                .map(|(&y, m)| {
                    check_matrix(m, k)?;
                    Ok(row_sampler(m.row(y)).sample(&mut rng))
                })
                .collect()
        }
    }
}

/// Draws `n` i.i.d. pairs: a point from `P_X`, then a label from the selected
/// posterior at that point.
pub fn sample_from_triple(
    t: &FinitePosteriorTriple,
    n: usize,
    which: Which,
    seed: u64,
) -> Result<LabeledSample> {
    let mut rng = seeded_rng(seed);
    sample_with(t, n, which, &mut rng, seed)
}

pub(crate) fn sample_with<R: Rng>(
    t: &FinitePosteriorTriple,
    n: usize,
    which: Which,
    rng: &mut R,
    seed: u64,
) -> Result<LabeledSample> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let px = WeightedIndex::new(t.px()).expect("P_X has positive total mass");
    let posts: Vec<_> = t.posteriors(which).iter().map(row_sampler).collect();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = px.sample(rng);
        points.push(x);
        labels.push(posts[x].sample(rng));
    }
    Ok(LabeledSample {
        points,
        labels,
        seed,
    })
}
