//! Remote-patient-monitoring triage workbench.

pub mod adaptive;
pub mod agreement;
pub mod fixed;
pub mod rater;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod study;
pub mod vitals;

pub use scalar::{Proportion, Scalar};

pub type KappaEstimate64 = agreement::KappaEstimate<f64>;
pub type BootstrapCi64 = agreement::BootstrapCi<f64>;
pub type FleissDetail64 = agreement::FleissDetail<f64>;
pub type RollingStats64 = adaptive::RollingStats<f64>;
pub type DeltaStats64 = adaptive::DeltaStats<f64>;
