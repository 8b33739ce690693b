//! Logical failure rates from nested Monte Carlo sampling and threshold
//! extraction by finite-size scaling.

mod estimate;
mod fit;
mod sweep;

pub use estimate::{default_n_rep, estimate_code_capacity, estimate_pfail, PfailEstimate, SamplingConfig};
pub use fit::{bootstrap_threshold, crossing_guess, fit_threshold, Axis, BootstrapSummary, ThresholdFit, MU_STARTS, WINDOW};
pub use sweep::{sweep, BoundaryPoint, SweepLine, SweepResult, SweepSpec};
