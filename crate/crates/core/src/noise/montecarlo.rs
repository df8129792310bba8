//! Finite-domain learners and a Monte-Carlo harness for their expected excess
//! risk on the adversarial instances.

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::generate::{sample_with, LabeledSample};
use crate::noise::minimax::MinimaxInstanceSpec;
use crate::posterior::{ClassifierTable, FinitePosteriorTriple, Which};
use crate::rng::{derive_seed, seeded_rng};

/// Classes an empirical-risk minimizer over all functions may predict at each
/// support point: the most frequent observed labels, or every class where the
/// point was never observed.
pub fn plurality_choice_sets(
    sample: &LabeledSample,
    support_len: usize,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if sample.points.len() != sample.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: sample.points.len(),
            got: sample.labels.len(),
        });
    }
    let mut counts = vec![vec![0usize; k]; support_len];
    for (&x, &y) in sample.points.iter().zip(&sample.labels) {
        if x >= support_len {
            return Err(invalid("sample", format!("point {x} is outside the support")));
        }
        if y >= k {
            return Err(invalid("sample", format!("label {y} out of range for K = {k}")));
        }
        counts[x][y] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| {
            let top = c.iter().copied().max().unwrap_or(0);
            (0..k).filter(|&j| c[j] == top).collect()
        })
        .collect())
}

/// Plurality vote per point, ties and unobserved points resolved uniformly at
/// random.
pub fn plurality_fit(
    sample: &LabeledSample,
    support_len: usize,
    k: usize,
    seed: u64,
) -> Result<ClassifierTable> {
    let mut rng = seeded_rng(seed);
    plurality_with(sample, support_len, k, &mut rng)
}

fn plurality_with<R: Rng>(
    sample: &LabeledSample,
    support_len: usize,
    k: usize,
    rng: &mut R,
) -> Result<ClassifierTable> {
    let sets = plurality_choice_sets(sample, support_len, k)?;
    Ok(ClassifierTable::new(
        sets.iter()
            .map(|s| *s.choose(rng).expect("choice sets are nonempty"))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Plurality,
    RandomGuess,
    NoisyBayes,
    /// Diagnostic oracle with zero excess risk.
    CleanBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub j: usize,
    pub excess_risk: f64,
    /// Contribution of `x_0`.
    pub x0: f64,
    /// Contribution of `x_1, ..., x_V`.
    pub rest: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBreakdown {
    pub x0_mean: f64,
    pub x0_stderr: f64,
    pub rest_mean: f64,
    pub rest_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub region: RegionBreakdown,
    pub records: Vec<TrialRecord>,
}

fn mean_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Clean excess risk split into the `x_0` term and the rest.
fn split_excess(t: &FinitePosteriorTriple, f: &ClassifierTable) -> (f64, f64) {
    let mut parts = t
        .px()
        .iter()
        .zip(t.eta())
        .zip(&f.labels)
        .map(|((w, e), &c)| w * (e.max() - e[c]));
    let x0 = parts.next().unwrap_or(0.0);
    (x0, parts.sum())
}

fn fit_learner<R: Rng>(
    learner: Learner,
    t: &FinitePosteriorTriple,
    n: usize,
    rng: &mut R,
    sample_seed: u64,
) -> Result<ClassifierTable> {
    let k = t.k();
    Ok(match learner {
        Learner::Plurality => {
            let sample = sample_with(t, n, Which::Noisy, rng, sample_seed)?;
            plurality_with(&sample, t.len(), k, rng)?
        }
        Learner::RandomGuess => {
            ClassifierTable::new((0..t.len()).map(|_| rng.random_range(0..k)).collect())
        }
        Learner::NoisyBayes => t.bayes_classifier(Which::Noisy),
        Learner::CleanBayes => t.bayes_classifier(Which::Clean),
    })
}

/// Expected clean excess risk of `learner` trained on `n` noisy samples, with
/// the adversary's `j` and `b` drawn uniformly in every trial.
pub fn mc_excess_risk(
    spec: &MinimaxInstanceSpec,
    learner: Learner,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<McReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    spec.build()?;
    let (k, v) = (spec.k(), spec.v());
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, trial);
            let mut rng = seeded_rng(trial_seed);
            let j = rng.random_range(0..k);
            let b = (0..v - 1).map(|_| rng.random_range(0..2)).collect();
            let t = spec.with_assignment(j, b).build()?;
            let f = fit_learner(learner, &t, n, &mut rng, trial_seed)?;
            let (x0, rest) = split_excess(&t, &f);
            Ok(TrialRecord {
                trial,
                j,
                excess_risk: x0 + rest,
                x0,
                rest,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, stderr) = mean_stderr(records.iter().map(|r| r.excess_risk));
    let (x0_mean, x0_stderr) = mean_stderr(records.iter().map(|r| r.x0));
    let (rest_mean, rest_stderr) = mean_stderr(records.iter().map(|r| r.rest));
    Ok(McReport {
        mean,
        stderr,
        trials,
        region: RegionBreakdown {
            x0_mean,
            x0_stderr,
            rest_mean,
            rest_stderr,
        },
        records,
    })
}
