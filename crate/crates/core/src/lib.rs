//! Optimal bivariate curtailed sequential test for two correlated binary
//! side effects.
//!
//! The test observes pairs `(X_i, Y_i)` one at a time and rejects as soon as
//! either cumulative count exceeds its critical value, stopping without
//! rejection after `N*` observations. This crate designs the test, evaluates
//! its operating characteristics exactly and asymptotically, runs it on
//! event streams, and computes post-detection estimates.
//!
//! ```
//! use bicurtail::{make_params, power_exact, BivariateDesign};
//!
//! let design = BivariateDesign::new(121, 19, 18).unwrap();
//! let alt = make_params(0.1, 0.2, 0.1).unwrap();
//! let power = power_exact(&design, &alt);
//! assert!((power - 0.9065).abs() < 5e-4);
//! ```

pub mod asymptotic;
pub mod design;
pub mod error;
pub mod exact;
pub mod inference;
pub mod monitor;
pub mod par;
pub mod params;
pub mod simulator;
pub mod special;

pub use asymptotic::{
    boundary_hit_probs, estimator_expectation_asymptotic, gut_params, power_asymptotic, stopping_pmf_asymptotic,
    AsymptoticForm, GutLaw,
};
pub use design::{
    attained_errors, combine, critical_value_for_n, design_bivariate, design_marginal, power, BivariateDesign,
    DesignMethod, MarginalDesign, PowerMethod, Rounding,
};
pub use error::{Error, Result};
pub use exact::{
    asn_bounds, asn_exact, corner_mass_exact, estimator_expectation_dp, estimator_expectation_exact, lattice_forward_dp,
    non_rejection_prob, power_exact, second_moment_exact, stopping_pmf_exact, variance_cv, variance_cv_from, LatticeCounts, Margin,
    PmfRow, StoppingPmf,
};
pub use inference::{
    confidence_region, inverse_relative_risk, post_test_estimate, relative_risk, ConfidenceRegion, PostTestEstimate,
    RelativeRiskEstimate,
};
pub use monitor::{monitor_step, state_load, state_load_for, state_save, DecisionRecord, MonitorState};
pub use par::Execution;
pub use params::{make_params, rho_from_p11, ConditionA, JointBernoulliParams};
pub use simulator::{
    monte_carlo, monte_carlo_with, run_test, sample_stream, Boundary, Decision, Event, MonteCarloSummary, Status,
    TestOutcome,
};
