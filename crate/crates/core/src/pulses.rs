//! Pulse waveforms and the parameters of one randomized protocol instance.
//!
//! Units throughout: ħ = 1, angular frequencies in rad/ns, times in ns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetrized hyperbolic-tangent pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WaveformParams<T> {
    /// Plateau amplitude in rad/ns.
    pub peak: T,
    /// Pulse length in ns.
    pub duration: T,
    /// Width of each tanh edge in ns.
    pub ramp_width: T,
    /// Delay of the ramp center from the pulse edge in ns.
    pub ramp_inset: T,
}

impl<T: Real> WaveformParams<T> {
    pub fn new(peak: T, duration: T, ramp_width: T, ramp_inset: T) -> Result<Self> {
        let w = Self {
            peak,
            duration,
            ramp_width,
            ramp_inset,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let two = T::lit(2.0);
        if !(self.peak >= T::zero()) {
            return Err(Error::Argument(format!("negative peak {}", self.peak)));
        }
        if !(self.ramp_width > T::zero()) {
            return Err(Error::Argument(format!("ramp width {}", self.ramp_width)));
        }
        if !(self.ramp_inset > T::zero() && two * self.ramp_inset < self.duration) {
            return Err(Error::Argument(format!(
                "ramp inset {} incompatible with duration {}",
                self.ramp_inset, self.duration
            )));
        }
        let edge = self.value(T::zero()).max(self.value(self.duration));
        if edge > T::lit(1e-3) * self.peak {
            return Err(Error::Argument(format!(
                "waveform edge value {edge} exceeds 1e-3 of peak {}",
                self.peak
            )));
        }
        Ok(())
    }

    /// Waveform value at `t` (ns from the pulse start); zero outside the pulse.
    pub fn value(&self, t: T) -> T {
        if t < T::zero() || t > self.duration {
            return T::zero();
        }
        let a = self.ramp_inset;
        let w = self.ramp_width;
        let half = self.duration / T::lit(2.0);
        let rise = ((t - a) / w).tanh();
        let fall = ((t - (self.duration - a)) / w).tanh();
        self.peak * (rise - fall) / (T::lit(2.0) * ((half - a) / w).tanh())
    }
}

/// Detuning scheme for qubits and cavities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parametrization {
    /// Wide qubit detunings, resonant cavities.
    A,
    /// Narrow qubit detunings, cavities at single-particle mode energies.
    B,
}

impl std::str::FromStr for Parametrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            other => Err(Error::Argument(format!("unknown parametrization {other:?}"))),
        }
    }
}

impl std::fmt::Display for Parametrization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::A => "A",
            Self::B => "B",
        })
    }
}

/// Hardware-level constants shared by all instances of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhysicsParams<T> {
    pub g_max: T,
    pub omega_max: T,
    /// Qubit nonlinearity δ (negative for transmons).
    pub delta: T,
    /// Dispersive shift Δ.
    pub dispersive: T,
    /// Cavity photon loss rate in 1/ns.
    pub gamma_c: T,
    pub coupler_ramp_width: T,
    pub coupler_ramp_inset: T,
    pub sideband_ramp_width: T,
    pub sideband_ramp_inset: T,
    pub cycle_min: T,
    pub cycle_max: T,
    /// Half-width of the qubit detuning window for parametrization A.
    pub detuning_a: T,
    /// Half-width of the qubit detuning window for parametrization B.
    pub detuning_b: T,
}

impl<T: Real> Default for PhysicsParams<T> {
    fn default() -> Self {
        let two_pi = T::lit(std::f64::consts::TAU);
        Self {
            g_max: two_pi * T::lit(0.040),
            omega_max: two_pi * T::lit(0.003),
            delta: -two_pi * T::lit(0.200),
            dispersive: two_pi * T::lit(0.005),
            gamma_c: T::lit(0.010),
            coupler_ramp_width: T::lit(1.0),
            coupler_ramp_inset: T::lit(4.0),
            sideband_ramp_width: T::lit(1.0),
            sideband_ramp_inset: T::lit(5.0),
            cycle_min: T::lit(20.0),
            cycle_max: T::lit(30.0),
            detuning_a: two_pi * T::lit(0.020),
            detuning_b: two_pi * T::lit(0.005),
        }
    }
}

impl<T: Real> PhysicsParams<T> {
    /// Same hardware with the sideband drive and cavity loss switched off.
    pub fn unitary(mut self) -> Self {
        self.omega_max = T::zero();
        self.gamma_c = T::zero();
        self
    }
}

/// Coupler and sideband pulses of one cycle; both share the cycle duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CyclePulses<T> {
    pub coupler: WaveformParams<T>,
    pub sideband: WaveformParams<T>,
}

impl<T: Real> CyclePulses<T> {
    pub fn duration(&self) -> T {
        self.coupler.duration
    }
}

/// One randomized experiment. Detunings stay fixed through all cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProtocolInstance<T> {
    pub sites: usize,
    pub parametrization: Parametrization,
    /// Qubit detunings h_i.
    pub h: Vec<T>,
    /// Cavity detunings h_Ci.
    pub h_c: Vec<T>,
    pub delta: T,
    pub dispersive: T,
    pub gamma_c: T,
    pub cycles: Vec<CyclePulses<T>>,
    /// Initial qubit photon count.
    pub n0: usize,
    pub seed: u64,
}

impl<T: Real> ProtocolInstance<T> {
    pub fn n_cycles(&self) -> usize {
        self.cycles.len()
    }

    /// Cycle boundary times `[0, T_1, T_1 + T_2, ...]`, length `N_c + 1`.
    pub fn boundaries(&self) -> Vec<T> {
        let mut t = T::zero();
        let mut out = Vec::with_capacity(self.cycles.len() + 1);
        out.push(t);
        for c in &self.cycles {
            t += c.duration();
            out.push(t);
        }
        out
    }

    pub fn total_time(&self) -> T {
        self.cycles.iter().map(|c| c.duration()).sum()
    }

    /// Structural checks; instance-generation bounds are checked in `protocol`.
    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.h.len() != self.sites || self.h_c.len() != self.sites {
            return Err(Error::Argument(format!(
                "detuning vectors must have {} entries",
                self.sites
            )));
        }
        if self.n0 > self.sites {
            return Err(Error::Argument(format!(
                "initial photon count {} exceeds {} sites",
                self.n0, self.sites
            )));
        }
        if !(self.gamma_c >= T::zero()) {
            return Err(Error::Argument(format!("loss rate {}", self.gamma_c)));
        }
        if self.delta == T::zero() {
            return Err(Error::Argument("nonlinearity δ must be nonzero".into()));
        }
        for (k, c) in self.cycles.iter().enumerate() {
            c.coupler.validate()?;
            c.sideband.validate()?;
            if c.coupler.duration != c.sideband.duration {
                return Err(Error::Argument(format!(
                    "cycle {k}: coupler and sideband durations differ"
                )));
            }
        }
        Ok(())
    }

    /// Copy with all sideband pulses at zero amplitude and no cavity loss.
    pub fn to_unitary(&self) -> Self {
        let mut inst = self.clone();
        inst.gamma_c = T::zero();
        for c in &mut inst.cycles {
            c.sideband.peak = T::zero();
        }
        inst
    }
}
