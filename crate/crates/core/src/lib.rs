//! Scoring and audit toolkit for a 20-item intimate-partner-violence risk
//! scale.
//!
//! * [`scale`]: instrument definitions and scoring of single assessments,
//!   including disclosed imputation of missing items.
//! * [`psychometrics`]: Cronbach's alpha, pooled t test, chi-squared item
//!   discrimination.
//! * [`metrics`]: confusion matrices, cutoff sweeps, ROC area and the
//!   accuracy-paradox rule.
//! * [`cohort`]: cohort CSV I/O, the anchor-constrained reference
//!   distribution and seeded synthetic cohorts.
//! * [`feedback`]: a simulator for retraining on assessor-biased data.
//! * [`audit`]: audit reports and per-case disclosure blocks.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below pick the two
//! backends used in practice.

pub mod audit;
pub mod cohort;
pub mod decimal;
pub mod feedback;
pub mod label;
pub mod metrics;
pub mod psychometrics;
pub mod scalar;
pub mod scale;

pub use label::Label;
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type MetricsRowF64 = metrics::MetricsRow<f64>;
pub type ExactMetricsRow = metrics::MetricsRow<Exact>;
pub type TestReportF64 = psychometrics::TestReport<f64>;
pub type ExactTestReport = psychometrics::TestReport<Exact>;
