//! Reliability and accuracy statistics: Fleiss κ (plain and linearly
//! weighted), quadratic-weighted Cohen κ, percentile bootstrap intervals,
//! reference-standard construction and the confusion-matrix metric battery.

mod bootstrap;
mod confusion;
mod kappa;
mod ratings;
mod reference;

pub use bootstrap::{bootstrap, percentile, BootstrapCi};
pub use confusion::{binary_metrics, confusion, metrics4, paired, BinaryMetrics, CategoryMetrics, ConfusionMatrix4, Metrics4};
pub use kappa::{
    cohen_weighted_kappa, fleiss_detail, fleiss_kappa, fleiss_kappa_weighted, fleiss_per_category, kappa_estimate, linear_weights,
    quadratic_weighted_kappa, quadratic_weights, qwk_estimate, FleissDetail, KappaEstimate, KappaMethod, Weights,
};
pub use ratings::{read_ratings, write_ratings, RatingMatrix, RatingRecord};
pub use reference::{
    loo_reference, majority_reference, majority_vote, max_severity_reference, max_severity_standard, pairwise_agreement, Assignments,
    PairwiseAgreement, Provenance, RefLabel, ReferenceStandard,
};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("estimate undefined: {0}")]
    Undefined(String),
    #[error("bootstrap failed: estimator undefined on {failures} of {attempts} resamples")]
    CiFailure { failures: usize, attempts: usize },
    #[error("no labels supplied")]
    EmptyLabels,
    #[error("item {item}: {detail}")]
    Structural { item: String, detail: String },
    #[error("missing predictions for {0:?}")]
    MissingPredictions(Vec<String>),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
