//! Goodness-of-fit tests and parameter uncertainty for fitted Hawkes models.

mod fisher;
mod report;
mod residuals;
mod stats;

pub use fisher::{
    branching_ratio_cis, branching_ratio_variance, confidence_intervals, covariance, observed_fisher,
    BranchingInterval, ConfidenceInterval, Z_95,
};
pub use report::{
    bubble_data, distortion_tables, run_diagnostics, BubblePoint, DiagnosticsOptions, DiagnosticsReport,
    DistortionTables, LikelihoodRatio, ResidualTest,
};
pub use residuals::{generalized_residuals, qq_data, ResidualSeries};
pub use stats::{chi2_sf, kolmogorov_sf, ks_test, ljung_box, lr_test, TestResult};
