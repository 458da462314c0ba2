//! Closed-form estimates of classical simulation cost and correlation length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{binomial, space_dimension};

/// Bytes per complex double amplitude.
pub const AMPLITUDE_BYTES: u128 = 16;

pub const PETABYTE: f64 = 1e15;

/// Distance information spreads before the first loss: `√(v / (n_cav Γ_C))`.
pub fn lmax_lower(v: f64, n_cav: f64, gamma_c: f64) -> Result<f64> {
    if !(v > 0.0 && n_cav > 0.0 && gamma_c > 0.0) {
        return Err(Error::Argument(format!(
            "velocity {v}, occupancy {n_cav} and loss rate {gamma_c} must be positive"
        )));
    }
    Ok((v / (n_cav * gamma_c)).sqrt())
}

/// Chain length at which the mid-band mode splitting `5.8 g_max / L` falls to
/// twice the loss rate. `g_max` is angular, `Γ_C` a plain rate.
pub fn lmax_mode_splitting(g_max: f64, gamma_c: f64) -> Result<f64> {
    if !(g_max > 0.0 && gamma_c > 0.0) {
        return Err(Error::Argument(format!(
            "coupling {g_max} and loss rate {gamma_c} must be positive"
        )));
    }
    Ok(5.8 * g_max / (2.0 * gamma_c))
}

/// Dense density matrix size: `dim² · 16` bytes.
pub fn density_matrix_bytes(l: usize, cavity_cap: usize) -> u128 {
    let d = space_dimension(l, cavity_cap.min(l));
    d * d * AMPLITUDE_BYTES
}

/// `⌈3 L N_c⌉` trajectories.
pub fn trajectory_budget(l: usize, n_cycles: usize) -> usize {
    3 * l * n_cycles
}

/// Truncated basis for a wavefunction simulation that allows multiply
/// occupied qubits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub sites: usize,
    pub doublon_cap: usize,
    pub triplon_cap: usize,
    /// Inclusive range of total qubit photon number.
    pub qubit_band: (usize, usize),
    /// Cavity photon cap is `round(L / D)`; `None` allows no cavity photons.
    pub cavity_divisor: Option<f64>,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl TruncationSpec {
    /// Band `[⌊0.35L + ½⌋, ⌊0.65L + ½⌋]`.
    pub fn new(sites: usize, doublon_cap: usize, triplon_cap: usize, cavity_divisor: Option<f64>) -> Self {
        let l = sites as f64;
        Self {
            sites,
            doublon_cap,
            triplon_cap,
            qubit_band: (round_half_up(0.35 * l), round_half_up(0.65 * l)),
            cavity_divisor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.qubit_band;
        if lo > hi || hi > 3 * self.sites {
            return Err(Error::Argument(format!("qubit band [{lo}, {hi}] for L = {}", self.sites)));
        }
        if let Some(d) = self.cavity_divisor {
            if !(d > 0.0) {
                return Err(Error::Argument(format!("cavity divisor {d}")));
            }
        }
        Ok(())
    }

    pub fn cavity_cap(&self) -> usize {
        self.cavity_divisor
            .map(|d| round_half_up(self.sites as f64 / d).min(self.sites))
            .unwrap_or(0)
    }

    /// Qubit configurations with at most the allowed multiply occupied sites.
    pub fn qubit_states(&self) -> u128 {
        let l = self.sites as u64;
        let (lo, hi) = self.qubit_band;
        let mut total = 0u128;
        for n3 in 0..=(self.triplon_cap as u64).min(l) {
            for n2 in 0..=(self.doublon_cap as u64).min(l - n3) {
                for n1 in 0..=(l - n3 - n2) {
                    let photons = (n1 + 2 * n2 + 3 * n3) as usize;
                    if photons < lo || photons > hi {
                        continue;
                    }
                    // L! / (n1! n2! n3! (L − n)!)
                    total += binomial(l, n3) * binomial(l - n3, n2) * binomial(l - n3 - n2, n1);
                }
            }
        }
        total
    }

    pub fn cavity_states(&self) -> u128 {
        let cap = self.cavity_cap() as u64;
        (0..=cap).map(|m| binomial(self.sites as u64, m)).sum()
    }
}

pub fn wavefunction_bytes(spec: &TruncationSpec) -> u128 {
    AMPLITUDE_BYTES * spec.qubit_states() * spec.cavity_states()
}

/// Smallest `L ≤ max_l` whose wavefunction reaches one petabyte.
pub fn petabyte_crossing(doublon_cap: usize, triplon_cap: usize, divisor: f64, max_l: usize) -> Option<usize> {
    (1..=max_l).find(|&l| {
        wavefunction_bytes(&TruncationSpec::new(l, doublon_cap, triplon_cap, Some(divisor))) as f64 >= PETABYTE
    })
}

/// Least-squares slope of `ln KL` against `ln N_t`.
pub fn kl_sampling_scaling(traj_counts: &[f64], kls: &[f64]) -> Result<f64> {
    if traj_counts.len() != kls.len() || traj_counts.len() < 4 {
        return Err(Error::Argument(format!(
            "need at least 4 paired points, got {} and {}",
            traj_counts.len(),
            kls.len()
        )));
    }
    if traj_counts.iter().chain(kls).any(|&x| !(x > 0.0)) {
        return Err(Error::Argument("log-log fit needs positive values".into()));
    }
    let xs: Vec<f64> = traj_counts.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = kls.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("trajectory counts must not all be equal".into()));
    }
    Ok(sxy / sxx)
}
