//! Noise-ignorant ERM: multinomial linear classifiers trained on noisy labels
//! as if they were clean, with stratified cross-validation and plug-in RSS
//! estimation.

pub mod cv;
pub mod error;
pub mod loss;
pub mod model;
pub mod optimizer;
pub mod rss_estimate;

pub use cv::{cross_validate, stratified_folds, CvCell, CvReport, TrainConfig};
pub use error::{Error, Result};
pub use loss::{loss_and_gradient, Loss};
pub use model::{accuracy, softmax, LinearModel};
pub use optimizer::{fit, fit_path, FitResult};
pub use rss_estimate::{estimate_report, fit_smooth_margin, MarginFit, RssEstimateReport};
