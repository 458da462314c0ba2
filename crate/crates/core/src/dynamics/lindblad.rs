//! Dense density-matrix integration of the master equation
//! `dρ/dt = −i[H, ρ] + Γ_C Σ_i (a_Ci ρ a_Ci† − ½{n_Ci, ρ})`.

use super::state::{DensityMatrix, StateVector};
use super::trajectory::DynamicsConfig;
use crate::error::{Error, Result};
use crate::hamiltonian::{drive_at, Drive, HamiltonianParts, LoweringMap};
use crate::hilbert::HilbertSpace;
use crate::pulses::ProtocolInstance;
use crate::scalar::{cplx, czero, Cplx, Real};

/// Per-cycle oracle output.
#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    /// ρ at the end of each cycle.
    pub snapshots: Vec<DensityMatrix<T>>,
    /// Expected number of photon losses `Γ_C ∫ ⟨N_c⟩ dt` up to the end of each cycle.
    pub cumulative_losses: Vec<T>,
}

struct Lindbladian<'a, T> {
    parts: &'a HamiltonianParts<T>,
    lowering: Vec<LoweringMap>,
    /// `H·ρ` scratch.
    m: Vec<Cplx<T>>,
}

impl<T: Real> Lindbladian<'_, T> {
    /// Writes `dρ/dt` into `out` and returns `Γ_C Tr(N_c ρ)`.
    fn derivative(&mut self, drive: Drive<T>, rho: &[Cplx<T>], out: &mut [Cplx<T>]) -> T {
        let n = self.parts.dim();
        let gamma = self.parts.gamma_c();
        let half = gamma / T::lit(2.0);
        let nc = self.parts.cavity_number();
        self.parts.left_multiply(drive, rho, &mut self.m);
        let m = &self.m;
        for r in 0..n {
            for c in 0..n {
                // −i(Hρ − ρH) with ρH = (Hρ)† for Hermitian ρ
                let d = m[r * n + c] - m[c * n + r].conj();
                let anti = rho[r * n + c] * (half * (nc[r] + nc[c]));
                out[r * n + c] = cplx(d.im, -d.re) - anti;
            }
        }
        if gamma > T::zero() {
            for map in &self.lowering {
                for &(s1, d1) in &map.pairs {
                    for &(s2, d2) in &map.pairs {
                        out[d1 * n + d2] += rho[s1 * n + s2] * gamma;
                    }
                }
            }
        }
        (0..n).map(|i| rho[i * n + i].re * nc[i]).sum::<T>() * gamma
    }
}

/// Integrates ρ from the pure initial state through every cycle with fixed-step RK4.
pub fn evolve_density_matrix<T: Real>(
    space: &HilbertSpace,
    inst: &ProtocolInstance<T>,
    initial: &StateVector<T>,
    config: DynamicsConfig<T>,
) -> Result<OracleResult<T>> {
    config.validate()?;
    let n = space.dim();
    let mut rho = DensityMatrix::from_pure(initial)?;
    let parts = HamiltonianParts::build(space, inst)?;
    let mut lv = Lindbladian {
        parts: &parts,
        lowering: (0..space.sites()).map(|i| LoweringMap::cavity(space, i)).collect(),
        m: vec![czero(); n * n],
    };
    let mut k: [Vec<Cplx<T>>; 4] = std::array::from_fn(|_| vec![czero(); n * n]);
    let mut tmp = vec![czero(); n * n];
    let mut losses = T::zero();
    let mut snapshots = Vec::with_capacity(inst.n_cycles());
    let mut cumulative = Vec::with_capacity(inst.n_cycles());
    let (two, six) = (T::lit(2.0), T::lit(6.0));

    for cycle in 0..inst.n_cycles() {
        let duration = inst.cycles[cycle].duration();
        let steps = config.steps_for(duration);
        let h = duration / T::lit(steps as f64);
        let half = h / two;
        let trace_start = rho.trace();
        for j in 0..steps {
            let t = h * T::lit(j as f64);
            let d0 = drive_at(inst, cycle, t);
            let dm = drive_at(inst, cycle, t + half);
            let d1 = drive_at(inst, cycle, t + h);
            let r = rho.data();
            let l1 = lv.derivative(d0, r, &mut k[0]);
            axpy(&mut tmp, r, &k[0], half);
            let l2 = lv.derivative(dm, &tmp, &mut k[1]);
            axpy(&mut tmp, r, &k[1], half);
            let l3 = lv.derivative(dm, &tmp, &mut k[2]);
            axpy(&mut tmp, r, &k[2], h);
            let l4 = lv.derivative(d1, &tmp, &mut k[3]);
            losses += (l1 + two * (l2 + l3) + l4) * h / six;

            let mut finite = true;
            let data = rho.data_mut();
            for i in 0..data.len() {
                data[i] += (k[0][i] + (k[1][i] + k[2][i]) * two + k[3][i]) * (h / six);
                finite &= data[i].re.is_finite() && data[i].im.is_finite();
            }
            if !finite {
                return Err(Error::IntegrationFailure {
                    t: (inst.boundaries()[cycle] + t).as_f64(),
                    dt: h.as_f64(),
                    reason: "non-finite density matrix entry".into(),
                });
            }
        }
        let drift = (rho.trace() - trace_start).abs().as_f64();
        if drift > 1e-8 {
            return Err(Error::NumericalIntegrity(format!(
                "trace drifted by {drift:e} during cycle {cycle}"
            )));
        }
        snapshots.push(rho.clone());
        cumulative.push(losses);
    }
    Ok(OracleResult {
        snapshots,
        cumulative_losses: cumulative,
    })
}

fn axpy<T: Real>(out: &mut [Cplx<T>], x: &[Cplx<T>], k: &[Cplx<T>], a: T) {
    for ((o, &x), &k) in out.iter_mut().zip(x).zip(k) {
        *o = x + k * a;
    }
}

/// `(1/N_t) Σ |ψ⟩⟨ψ|` over one snapshot per trajectory.
pub fn average_states<'a, T: Real>(
    states: impl IntoIterator<Item = &'a StateVector<T>>,
) -> Result<DensityMatrix<T>> {
    let mut rho: Option<DensityMatrix<T>> = None;
    let mut count = 0usize;
    for psi in states {
        let acc = match &mut rho {
            Some(r) => r,
            None => rho.insert(DensityMatrix::zeros(psi.dim())?),
        };
        acc.add_projector(&psi.normalized()?, T::one());
        count += 1;
    }
    let mut rho = rho.ok_or_else(|| Error::Argument("no trajectories to average".into()))?;
    rho.scale(T::one() / T::lit(count as f64));
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisState;
    use crate::pulses::{CyclePulses, Parametrization, WaveformParams};

    fn instance(l: usize, gamma: f64, g: f64, omega: f64, h: f64, cycles: usize) -> ProtocolInstance<f64> {
        ProtocolInstance {
            sites: l,
            parametrization: Parametrization::A,
            h: (0..l).map(|i| h * (i as f64 - 0.7)).collect(),
            h_c: vec![0.0; l],
            delta: -1.2566,
            dispersive: 0.0314,
            gamma_c: gamma,
            cycles: (0..cycles)
                .map(|k| {
                    let d = 20.0 + 0.5 * k as f64;
                    CyclePulses {
                        coupler: WaveformParams::new(g, d, 1.0, 4.0).unwrap(),
                        sideband: WaveformParams::new(omega, d, 1.0, 5.0).unwrap(),
                    }
                })
                .collect(),
            n0: 1,
            seed: 0,
        }
    }

    #[test]
    fn single_photon_decay_is_exponential() {
        let space = HilbertSpace::build(1, 1).unwrap();
        let inst = instance(1, 0.05, 0.0, 0.0, 0.0, 3);
        let i1 = space.state_index(BasisState::new(0, 1)).unwrap();
        let psi = StateVector::basis(space.dim(), i1);
        let out = evolve_density_matrix(&space, &inst, &psi, DynamicsConfig::default()).unwrap();
        let bounds = inst.boundaries();
        for (c, rho) in out.snapshots.iter().enumerate() {
            let t = bounds[c + 1];
            let exact = (-0.05 * t).exp();
            assert!((rho.get(i1, i1).re - exact).abs() < 1e-10);
            assert!((out.cumulative_losses[c] - (1.0 - exact)).abs() < 1e-10);
            assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_evolution_keeps_purity() {
        let space = HilbertSpace::build(3, 2).unwrap();
        let inst = instance(3, 0.0, 0.25, 0.02, 0.12, 4);
        let i0 = space.state_index(BasisState::new(0b010, 0)).unwrap();
        let psi = StateVector::basis(space.dim(), i0);
        let out = evolve_density_matrix(&space, &inst, &psi, DynamicsConfig::default()).unwrap();
        for rho in &out.snapshots {
            assert!((rho.purity() - 1.0).abs() < 1e-8);
            rho.check(1e-10, 1e-8, 1e-8).unwrap();
        }
        assert!(out.cumulative_losses.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn open_evolution_stays_physical() {
        let space = HilbertSpace::build(3, 2).unwrap();
        let inst = instance(3, 0.05, 0.25, 0.05, 0.12, 3);
        let i0 = space.state_index(BasisState::new(0b010, 0)).unwrap();
        let psi = StateVector::basis(space.dim(), i0);
        let out = evolve_density_matrix(&space, &inst, &psi, DynamicsConfig::default()).unwrap();
        for rho in &out.snapshots {
            rho.check(1e-10, 1e-8, 1e-8).unwrap();
        }
        assert!(out.snapshots.last().unwrap().purity() < 1.0 - 1e-6);
        assert!(out.cumulative_losses.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn average_of_nothing_is_an_error() {
        let none: Vec<StateVector<f64>> = Vec::new();
        assert!(matches!(average_states(&none), Err(Error::Argument(_))));
    }

    #[test]
    fn average_of_orthogonal_pair() {
        let a = StateVector::<f64>::basis(3, 0);
        let b = StateVector::<f64>::basis(3, 2);
        let rho = average_states([&a, &b]).unwrap();
        let ev = rho.eigenvalues();
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 0.5).abs() < 1e-15 && (ev[2] - 0.5).abs() < 1e-15);
    }
}
