//! Normalization sweeps, null-size simulations and result serialization.

pub mod instances;
pub mod output;
pub mod simulate;
pub mod sweep;

pub use instances::{gaussian_null_table, DenseAlternative, FragileCategorical};
pub use output::{config_hash, null_size_csv, svg_histogram, sweep_summary_csv, sweep_tests_csv, to_json};
pub use simulate::{simulate_null_size, simulate_rejection_rates, ControlSource, NullSizeResult, RejectionRate, SimulationDesign};
pub use sweep::{
    draw_design, run_sweep, sweep_tests, DrawEstimate, DrawTests, EstimatorKind, EstimatorSummary, SweepConfig,
    SweepKind, SweepResult, SweepTestsResult, TestRange, Variables, OLS_INVARIANCE_TOL,
};
