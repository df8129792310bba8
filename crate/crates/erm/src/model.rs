use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use nilab_core::SimplexVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multinomial linear classifier: scores `W x + b` with `W` of shape `K x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct LinearModel {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    k: usize,
    d: usize,
    /// Row-major `K x d`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<LinearModel> for ModelDoc {
    fn from(m: LinearModel) -> Self {
        ModelDoc {
            k: m.k(),
            d: m.d(),
            weights: m.weights.iter().copied().collect(),
            bias: m.bias.to_vec(),
        }
    }
}

impl TryFrom<ModelDoc> for LinearModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.bias.len() != doc.k {
            return Err(Error::DimensionMismatch {
                expected: doc.k,
                got: doc.bias.len(),
            });
        }
        let weights = Array2::from_shape_vec((doc.k, doc.d), doc.weights).map_err(|_| {
            Error::DimensionMismatch {
                expected: doc.k * doc.d,
                got: 0,
            }
        })?;
        Self::new(weights, Array1::from(doc.bias))
    }
}

impl LinearModel {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if bias.len() != weights.nrows() {
            return Err(Error::DimensionMismatch {
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("model entries must be finite".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            weights: Array2::zeros((k, d)),
            bias: Array1::zeros(k),
        }
    }

    pub fn k(&self) -> usize {
        self.weights.nrows()
    }

    pub fn d(&self) -> usize {
        self.weights.ncols()
    }

    /// Parameters as one vector: weights row-major, then bias.
    pub fn to_flat(&self) -> Array1<f64> {
        self.weights.iter().chain(self.bias.iter()).copied().collect()
    }

    pub fn from_flat(k: usize, d: usize, theta: &Array1<f64>) -> Self {
        let s = theta.as_slice().expect("contiguous parameters");
        Self {
            weights: Array2::from_shape_vec((k, d), s[..k * d].to_vec()).expect("k*d weights"),
            bias: Array1::from(s[k * d..].to_vec()),
        }
    }

    fn check_features(&self, d: usize) -> Result<()> {
        if d != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: d,
            });
        }
        Ok(())
    }

    /// Score matrix `X W^T + b`, one row per example.
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_features(x.ncols())?;
        Ok(x.dot(&self.weights.t()) + self.bias.view().insert_axis(Axis(0)))
    }

    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Result<SimplexVector> {
        self.check_features(x.len())?;
        let s = self.weights.dot(&x) + &self.bias;
        Ok(SimplexVector::new(softmax(s.view()).to_vec())?)
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<f64>) -> Result<Vec<SimplexVector>> {
        let scores = self.scores(x)?;
        scores
            .rows()
            .into_iter()
            .map(|s| Ok(SimplexVector::new(softmax(s).to_vec())?))
            .collect()
    }

    /// Highest-scoring class per row, lowest index on ties.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.rows().into_iter().map(|r| argmax(r)).collect())
    }
}

pub(crate) fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `ln sum_j exp(s_j)`, shifted by the maximum.
pub(crate) fn log_sum_exp(s: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = s.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + s.map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(s: ArrayView1<f64>) -> Array1<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = s.mapv(|v| (v - m).exp());
    let z = e.sum();
    e / z
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(model: &LinearModel, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let pred = model.predict(x)?;
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}
