//! Time evolution: quantum trajectories and the density-matrix oracle.

mod checkpoint;
mod lindblad;
mod state;
mod trajectory;

use rayon::prelude::*;

pub use checkpoint::{read_checkpoint, state_digest, write_checkpoint, CheckpointRecord};
pub use lindblad::{average_states, evolve_density_matrix, OracleResult};
pub use state::{DensityMatrix, StateVector};
pub use trajectory::{
    rk4_step, run_trajectory, CycleGenerator, DynamicsConfig, ErrorEvent, ErrorKind, Generator,
    Jump, Rk4Workspace, TrajectoryOutcome, TrajectoryResult, TrajectorySimulator,
};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `ρ = (1/N_t) Σ |ψ⟩⟨ψ|` over the snapshots of `cycle` (0-based).
pub fn average_trajectories<T: Real>(
    results: &[TrajectoryResult<T>],
    cycle: usize,
) -> Result<DensityMatrix<T>> {
    let mut states = Vec::with_capacity(results.len());
    for r in results {
        states.push(r.snapshots.get(cycle).ok_or_else(|| {
            Error::Argument(format!("cycle {cycle} beyond {} snapshots", r.snapshots.len()))
        })?);
    }
    average_states(states)
}

impl<T: Real> TrajectorySimulator<'_, T> {
    /// Runs trajectories `0..count` in parallel; results are in index order.
    pub fn run_many(&self, master_seed: u64, count: u64) -> Result<Vec<TrajectoryResult<T>>> {
        (0..count)
            .into_par_iter()
            .map(|k| self.run(master_seed, k))
            .collect()
    }
}
