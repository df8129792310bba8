//! Label-noise analysis on finite supports.
//!
//! A learning problem with noisy labels is a triple `(P_X, eta, eta_tilde)` of a
//! feature marginal and clean and noisy class posteriors. This crate computes
//! the relative signal strength between the two posteriors, checks when a noise
//! transition matrix leaves the Bayes classifier unchanged, evaluates excess-risk
//! bounds, and simulates label noise and the adversarial instances behind the
//! lower bounds.

pub mod bounds;
pub mod error;
pub mod immunity;
pub mod noise;
pub mod posterior;
pub mod rng;
pub mod rss;

pub use error::{Error, Result};
pub use posterior::{ClassifierTable, FinitePosteriorTriple, SimplexVector, TransitionMatrix, Which};
pub use rss::{rss, rss_binary, RssValue};
