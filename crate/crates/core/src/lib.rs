//! Bias of diagnostic-model metrics scored against an imperfect reference labeler.
//!
//! A model is evaluated against labels produced by a second, imperfect
//! classifier (for example a language model reading radiology reports).
//! This crate computes what sensitivity and specificity the evaluation will
//! report: a point estimate assuming the two labelers err independently, the
//! best and worst cases over every way their labels could overlap, and a
//! Monte Carlo envelope from repeated stochastic labeling.

pub mod analytic;
pub mod cli;
pub mod cohort;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod report;
pub mod reproduce;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_fraction, AgreementTable, Cohort, ConfusionCounts, Fraction, Metric, MetricBounds,
    ObservedMetrics, OperatingPoint, Stratum, StratumCells,
};
