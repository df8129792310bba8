//! Data generation, label noise, adversarial instances and Monte-Carlo runs.

pub mod generate;
pub mod minimax;
pub mod montecarlo;

pub use generate::{
    default_gaussian_mixture, flip_labels, gaussian_mixture, sample_from_triple, FeatureSample,
    LabeledSample, NoiseSpec, DEFAULT_CENTERS, DEFAULT_PER_CLASS,
};
pub use minimax::{
    build_general_instance, build_zero_error_instance, GeneralSpec, MinimaxInstanceSpec,
    ZeroErrorSpec, DEFAULT_DELTA,
};
pub use montecarlo::{
    mc_excess_risk, plurality_choice_sets, plurality_fit, Learner, McReport, RegionBreakdown,
    TrialRecord,
};
