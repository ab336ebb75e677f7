//! Monte Carlo harness: scenario definitions, Gaussian field simulation,
//! the true-model risk oracle, an indicator kriging baseline and error
//! summaries.

pub mod field;
pub mod ik;
pub mod oracle;
pub mod scenario;
pub mod study;

pub use field::{simulate_field, FieldSimulator};
pub use ik::{binned_variogram, fit_exponential, ik_baseline, BinnedVariogram, ExponentialModel, IkResult, IK_BINS};
pub use oracle::{gaussian_exceedance, theoretical_conditional_risk, TruthKriging};
pub use scenario::{
    scenario_by_name, scenario_registry, trend_fn, variance_fn, DesignKind, FieldModel,
    ScenarioSpec, TrendId, VarianceId, DEFAULT_B, DEFAULT_N_SIM, DEFAULT_SEED,
};
pub use study::{
    mase_bandwidths, run_study, scenario_field, write_summary_csv, ErrorSummary, StudyDesign,
    SUMMARY_HEADER,
};
