//! Shared fixtures for the criterion benchmarks.

use ctap_core::{InitialStateSpec, ModelParams, Representation, RunConfig};

/// Reference parameters at the given χ with a short run of `trajectories`.
pub fn fixture(representation: Representation, chi: f64, trajectories: u64) -> RunConfig {
    let mut cfg = RunConfig::new(
        ModelParams::reference().with_chi(chi),
        representation,
        InitialStateSpec::coherent_in_first(200.0),
        trajectories.max(2),
        1,
    )
    .expect("fixture config is valid");
    cfg.n_batches = 2;
    cfg.workers = Some(1);
    cfg
}
