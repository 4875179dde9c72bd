//! Shared inputs for the benchmark targets.

use std::fs::File;
use std::path::PathBuf;

use cascade_branch_core::event::EventLog;
use cascade_branch_core::series::{read_series_csv, GenerationSeries};
use cascade_branch_core::simulator::{simulate, SimParams};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Campaign V1's generation series, the standard fitting workload.
pub fn v1_series() -> GenerationSeries {
    read_series_csv(File::open(fixture("v1_table1.csv")).expect("fixtures present"))
        .expect("fixture parses")
}

/// A mid-sized synthetic campaign (~6k infections) for ingestion benches.
pub fn synthetic_log() -> EventLog {
    let params = SimParams {
        p: 0.6,
        lambda: 3.0,
        population: 10_000,
        seeds: 5,
        mean_delay_secs: 1800.0,
        max_generations: 60,
        rng_seed: 7,
    };
    simulate(&params).expect("valid parameters")
}
