//! Sequential fixed-width confidence intervals for a Bernoulli proportion.
//!
//! Observations are independent Bernoulli(theta) trials. After `t` trials
//! with `s` successes the procedure reports the interval
//! `[mid - h, mid + h]` (cropped to `[0, 1]`), where the mid-point `mid`
//! minimizes the posterior probability of missing theta. Sampling stops
//! according to a policy computed by backward induction that trades one
//! more observation (at cost `c`) against the drop in miss probability.
//!
//! The crate exposes:
//!
//! - [`special`]: regularized incomplete beta, log-gamma, normal quantile,
//!   bracketed root finding and unimodal maximization;
//! - [`prior`]: Beta and tabulated priors with posterior updates on the
//!   success lattice;
//! - [`midpoint`]: the coverage-optimal interval mid-point per lattice cell;
//! - [`policy`]: the backward-induction stopping policy and its sampling
//!   regions;
//! - [`bounds`]: closed-form horizon and coverage bounds;
//! - [`performance`]: exact expected sample size and miss probability by
//!   lattice recursion, plus a seeded Monte Carlo cross-check;
//! - [`schemes`]: competing procedures (fixed sample size, Frey's rule,
//!   conditional stopping) and cost calibration to a target miss level.

pub mod bounds;
pub mod error;
pub mod grid;
pub mod midpoint;
pub mod performance;
pub mod policy;
pub mod prior;
pub mod schemes;
pub mod special;

pub use bounds::{
    bayes_risk_bound, chebyshev_sigma_bound, chernoff_upper, crude_horizon_bound, incbeta_lower,
    log_horizon, log_lower_limit, BetaFractionalParts, SigmaBound,
};
pub use error::{Error, Result};
pub use grid::TriGrid;
pub use midpoint::{coverage_given_midpoint, coverage_grid, optimal_midpoint, HalfWidth, MidpointCell};
pub use performance::{
    default_theta_grid, expected_samples_bayes, expected_samples_bayes_with_g,
    expected_samples_given_theta, lattice_marginal_pmf, miss_prob_bayes, miss_prob_bayes_with_g,
    miss_prob_given_theta, performance_report, simulate, worst_case_miss, LatticeScheme,
    PerformanceReport, SchemeOnLattice, SimulationSummary, MISS_BOUNDARY_TOL,
};
pub use policy::{
    backward_solve, backward_solve_with_tables, solve_summary, CostPerSample, Decision,
    LatticeTables, PolicyGrid, PolicySummary, Region, StoppingPolicy, Thresholds,
};
pub use prior::{PosteriorState, PriorSpec};
pub use schemes::{
    calibrate_c, calibrate_c_with_tables, calibrate_scalar, conditional_scheme, frey_scheme,
    fss_scheme, fss_smallest_n, CalibrationMode, CalibrationResult, FreyConfig, ScalarCalibration,
};
