//! Per-cycle photon-number bookkeeping.

use serde::{Deserialize, Serialize};

use crate::dynamics::{OracleResult, TrajectoryResult};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianParts;
use crate::scalar::Real;

/// Photon numbers at the end of one cycle; `*_se` are standard errors of the
/// trajectory mean and zero in oracle mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NumberPoint<T> {
    /// `⟨N_q⟩ − N0`.
    pub photons_added: T,
    pub photons_added_se: T,
    /// `⟨N_c⟩`.
    pub cavity_population: T,
    pub cavity_population_se: T,
    pub cumulative_losses: T,
    pub cumulative_losses_se: T,
}

/// Mean and standard error of the mean.
pub fn mean_se<T: Real>(xs: &[T]) -> (T, T) {
    let n = T::lit(xs.len() as f64);
    if xs.is_empty() {
        return (T::nan(), T::nan());
    }
    let mean = xs.iter().copied().sum::<T>() / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one());
    (mean, (var / n).sqrt())
}

pub fn number_series_trajectories<T: Real>(
    results: &[TrajectoryResult<T>],
    parts: &HamiltonianParts<T>,
    n0: usize,
) -> Result<Vec<NumberPoint<T>>> {
    let first = results
        .first()
        .ok_or_else(|| Error::Argument("no trajectories".into()))?;
    let n0 = T::lit(n0 as f64);
    (0..first.snapshots.len())
        .map(|c| {
            let mut added = Vec::with_capacity(results.len());
            let mut cav = Vec::with_capacity(results.len());
            let mut lost = Vec::with_capacity(results.len());
            for r in results {
                let psi = r.snapshots.get(c).ok_or_else(|| {
                    Error::Argument(format!("trajectory {} lacks cycle {c}", r.index))
                })?;
                added.push(psi.expectation_diag(parts.qubit_number()) - n0);
                cav.push(psi.expectation_diag(parts.cavity_number()));
                lost.push(T::lit(r.jumps_at_snapshot[c] as f64));
            }
            let (a, a_se) = mean_se(&added);
            let (n, n_se) = mean_se(&cav);
            let (l, l_se) = mean_se(&lost);
            Ok(NumberPoint {
                photons_added: a,
                photons_added_se: a_se,
                cavity_population: n,
                cavity_population_se: n_se,
                cumulative_losses: l,
                cumulative_losses_se: l_se,
            })
        })
        .collect()
}

pub fn number_series_oracle<T: Real>(
    oracle: &OracleResult<T>,
    parts: &HamiltonianParts<T>,
    n0: usize,
) -> Vec<NumberPoint<T>> {
    let n0 = T::lit(n0 as f64);
    oracle
        .snapshots
        .iter()
        .zip(&oracle.cumulative_losses)
        .map(|(rho, &l)| NumberPoint {
            photons_added: rho.expectation_diag(parts.qubit_number()) - n0,
            photons_added_se: T::zero(),
            cavity_population: rho.expectation_diag(parts.cavity_number()),
            cavity_population_se: T::zero(),
            cumulative_losses: l,
            cumulative_losses_se: T::zero(),
        })
        .collect()
}
