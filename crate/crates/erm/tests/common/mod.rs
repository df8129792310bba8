#![allow(dead_code)]

use ndarray::Array2;
use nilab_core::noise::{default_gaussian_mixture, flip_labels, NoiseSpec};
use nilab_core::rng::{derive_seed, seeded_rng, SeededRng};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix(rng: &mut SeededRng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn rng(seed: u64) -> SeededRng {
    seeded_rng(seed)
}

pub struct Split {
    pub train_x: Array2<f64>,
    pub clean: Vec<usize>,
    pub noisy: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
}

/// Two-class Gaussian mixture, 200 training points per class with uniformly
/// flipped labels and an independent clean test set of 1000 per class.
pub fn gaussian_split(rho: f64, seed: u64) -> Split {
    let train = default_gaussian_mixture(200, derive_seed(seed, 0)).unwrap();
    let test = default_gaussian_mixture(1000, derive_seed(seed, 1)).unwrap();
    let noisy = flip_labels(&train.labels, &NoiseSpec::UniformFlip(rho), 2, derive_seed(seed, 2)).unwrap();
    Split {
        train_x: train.features,
        clean: train.labels,
        noisy,
        test_x: test.features,
        test_y: test.labels,
    }
}
