//! Fixtures shared by the benchmarks.

use cindex_core::simulation::generate_with_censoring_mean;
use cindex_core::{SimulationConfig, SurvivalDataset};

/// Mean of the exponential censoring times.
const CENSORING_MEAN: f64 = 5.0;

/// Simulated dataset with `n` rows and `p` markers.
pub fn simulated(n: usize, p: usize, seed: u64) -> SurvivalDataset {
    let config = SimulationConfig {
        n,
        p,
        seed,
        ..SimulationConfig::default()
    };
    generate_with_censoring_mean(&config, CENSORING_MEAN)
        .expect("valid benchmark configuration")
        .dataset
}

/// A deterministic non-degenerate marker for `data`.
pub fn marker(data: &SurvivalDataset) -> Vec<f64> {
    (0..data.n())
        .map(|i| data.column(0)[i] - 0.5 * data.column(data.p() - 1)[i])
        .collect()
}
