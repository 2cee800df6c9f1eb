//! Workloads shared by the benchmarks.

use bubblelab::{InnovationParams, ToyParams};

/// Land economy whose certified fundamental needs a few hundred terms.
pub fn toy_workload() -> ToyParams {
    ToyParams::default()
}

/// Bubble-regime innovation economy (the crate defaults).
pub fn innovation_workload() -> InnovationParams {
    InnovationParams::default()
}
