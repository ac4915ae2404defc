//! Shared fixtures for the criterion benchmarks: deterministic networks,
//! objectives, and initial states sized for timing rather than convergence.

use std::sync::Arc;

use peergrad::objective::partition;
use peergrad::{
    Dataset, FiniteSumObjective, LogisticObjective, MixingMatrix, PartitionMode,
    QuadraticObjective, Stack, Topology,
};

/// Connected geometric network with Metropolis weights. The radius scales
/// with `sqrt(ln n / n)` so density stays comparable across sizes.
pub fn network(n: usize) -> MixingMatrix {
    let radius = 1.3 * ((n as f64).ln() / n as f64).sqrt();
    let topo = Topology::random_geometric(n, radius, 7).expect("fixture graph");
    MixingMatrix::metropolis(&topo).expect("fixture weights")
}

/// Strongly convex quadratic finite sum over `n` nodes.
pub fn quadratic(n: usize, m: usize, dim: usize) -> Arc<dyn FiniteSumObjective> {
    Arc::new(QuadraticObjective::synthetic(n, m, dim, 1.0, 0.5, false, 3).expect("fixture"))
}

/// Regularized logistic loss over a synthetic two-class dataset split
/// evenly across `n` nodes.
pub fn logistic(n: usize, samples: usize, dim: usize) -> Arc<dyn FiniteSumObjective> {
    let ds = Dataset::synthetic_gaussians(samples, dim, 1.0, 5);
    let assignment = partition(&ds, n, PartitionMode::IidShuffle, 0).expect("partition");
    Arc::new(LogisticObjective::new(&ds, &assignment, None).expect("fixture"))
}

/// Deterministic non-consensual state stack, one row per node.
pub fn states(n: usize, dim: usize) -> Stack {
    Stack::from_fn(n, dim, |i, j| ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5)
}
