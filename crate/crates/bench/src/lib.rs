//! Shared settings and fixtures for the benchmarks.

use std::time::Duration;

use alpha_lattice::{InteractionModel, SimConfig, StableParams};
use criterion::Criterion;

/// Short runs: the heavy benchmarks take seconds per iteration.
pub fn criterion() -> Criterion {
    Criterion::default()
        .configure_from_args()
        .warm_up_time(Duration::from_secs(1))
        .measurement_time(Duration::from_secs(5))
        .sample_size(10)
}

pub fn params() -> StableParams {
    StableParams::new(1.5).expect("valid alpha")
}

pub fn standard() -> InteractionModel {
    InteractionModel::standard_small()
}

pub fn config(t_end: f64, n_paths: u64) -> SimConfig {
    SimConfig::new(params(), 0.01, t_end, 1, n_paths)
}
