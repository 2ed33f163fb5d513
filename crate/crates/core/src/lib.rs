//! Tests for the presence or absence of a Brownian component in a
//! discretely observed semimartingale path, with a process-simulation lab,
//! a Monte Carlo harness and a tick-data ingestion pipeline.

// validation uses `!(x > 0.0)` so NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hypothesis;
pub mod ingest;
pub mod mc;
pub mod path;
pub mod report;
pub mod simlab;
pub mod specialfn;
pub mod variation;

pub use error::{Error, Result};
pub use hypothesis::{
    test_brownian_null, test_no_brownian_null, validate_rate_conditions, BrownianNullConfig,
    BrownianNullResult, HypothesisLabel, NoBrownianNullConfig, NoBrownianNullResult, RateCheck,
    TestKind,
};
pub use mc::{run_limit_curves, run_rejection_experiment, run_standardized_histograms,
    ExperimentConfig, Profile, RejectionTable, TestSpec};
pub use path::{IncrementSeries, SampledPath, DAYS_PER_YEAR, SECONDS_PER_DAY};
pub use simlab::{simulate_path, GroundTruth, PathRecipe, SVJumpModel, StableDriver};
pub use variation::{
    estimate_integrated_volatility, exceedance_count, increments, resolve_cutoff,
    truncated_power_variation, SpanCutoff, TruncationSpec,
};
