//! Norm-decay quantum trajectories.
//!
//! Between jumps the unnormalized state evolves under `H_eff` with fixed-step
//! RK4. A threshold `r ~ U(0, 1]` is drawn; once `⟨ψ|ψ⟩` falls to `r` the jump
//! time is located by bisection inside the offending step, a cavity channel is
//! chosen with probability `∝ ⟨ψ|n_Ci|ψ⟩`, `a_Ci` is applied, the state is
//! renormalized and a fresh threshold is drawn.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::{Error, Result};
use crate::hamiltonian::{drive_at, HamiltonianParts, LoweringMap};
use crate::hilbert::HilbertSpace;
use crate::pulses::ProtocolInstance;
use crate::rng::trajectory_stream;
use crate::scalar::{czero, norm_sqr, Cplx, Real};

/// Right-hand side `dψ/dt = f(t, ψ)`.
pub trait Generator<T> {
    fn derivative(&self, t: T, x: &[Cplx<T>], out: &mut [Cplx<T>]);
}

impl<T, F> Generator<T> for F
where
    F: Fn(T, &[Cplx<T>], &mut [Cplx<T>]),
{
    fn derivative(&self, t: T, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        self(t, x, out)
    }
}

/// `−i H_eff(t)` during one cycle, `t` measured from the cycle start.
pub struct CycleGenerator<'a, T> {
    pub parts: &'a HamiltonianParts<T>,
    pub inst: &'a ProtocolInstance<T>,
    pub cycle: usize,
}

impl<T: Real> Generator<T> for CycleGenerator<'_, T> {
    fn derivative(&self, t: T, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        self.parts
            .apply_generator(drive_at(self.inst, self.cycle, t), x, out);
    }
}

/// Scratch buffers reused across RK4 steps.
#[derive(Debug, Clone)]
pub struct Rk4Workspace<T> {
    k: [Vec<Cplx<T>>; 4],
    tmp: Vec<Cplx<T>>,
}

impl<T: Real> Rk4Workspace<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![czero(); dim]),
            tmp: vec![czero(); dim],
        }
    }
}

/// One classic RK4 step from `psi` at `t` to `out` at `t + dt`; no renormalization.
pub fn rk4_step<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    psi: &[Cplx<T>],
    t: T,
    dt: T,
    ws: &mut Rk4Workspace<T>,
    out: &mut [Cplx<T>],
) -> Result<()> {
    let half = dt / T::lit(2.0);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let [k1, k2, k3, k4] = &mut ws.k;
    let tmp = &mut ws.tmp;

    gen.derivative(t, psi, k1);
    for ((y, x), k) in tmp.iter_mut().zip(psi).zip(k1.iter()) {
        *y = x + k * half;
    }
    gen.derivative(t + half, tmp, k2);
    for ((y, x), k) in tmp.iter_mut().zip(psi).zip(k2.iter()) {
        *y = x + k * half;
    }
    gen.derivative(t + half, tmp, k3);
    for ((y, x), k) in tmp.iter_mut().zip(psi).zip(k3.iter()) {
        *y = x + k * dt;
    }
    gen.derivative(t + dt, tmp, k4);

    let mut finite = true;
    for (i, o) in out.iter_mut().enumerate() {
        *o = psi[i] + (k1[i] + (k2[i] + k3[i]) * two + k4[i]) * sixth;
        finite &= o.re.is_finite() && o.im.is_finite();
    }
    if !finite {
        return Err(Error::IntegrationFailure {
            t: t.as_f64(),
            dt: dt.as_f64(),
            reason: "non-finite amplitude".into(),
        });
    }
    Ok(())
}

/// Step-size and jump-location controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DynamicsConfig<T> {
    /// Largest RK4 step in ns; each cycle is split into equal steps no longer than this.
    pub dt: T,
    /// Width of the bracket (ns) at which jump-time bisection stops.
    pub bisection_tol: T,
}

impl<T: Real> Default for DynamicsConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(0.02),
            bisection_tol: T::lit(1e-3),
        }
    }
}

impl<T: Real> DynamicsConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.bisection_tol > T::zero()) {
            return Err(Error::Argument(format!(
                "dt = {} and bisection tolerance = {} must be positive",
                self.dt, self.bisection_tol
            )));
        }
        Ok(())
    }

    /// Number of equal RK4 steps covering a cycle of the given length.
    pub fn steps_for(&self, duration: T) -> usize {
        (duration / self.dt).ceil().to_usize().unwrap_or(1).max(1)
    }
}

/// Deliberately inserted qubit error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Phase flip σ_z.
    Z,
    /// Photon loss `a_i` on the qubit.
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ErrorEvent<T> {
    pub kind: ErrorKind,
    pub site: usize,
    /// Absolute time in ns from the start of the protocol.
    pub time: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Jump<T> {
    pub time: T,
    pub cavity: usize,
}

/// One stochastic realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult<T> {
    pub master_seed: u64,
    pub index: u64,
    /// Normalized state at the end of each cycle.
    pub snapshots: Vec<StateVector<T>>,
    /// Jump record, strictly increasing in time.
    pub jumps: Vec<Jump<T>>,
    /// Number of jumps that occurred before each snapshot.
    pub jumps_at_snapshot: Vec<usize>,
    pub error_insertions: Vec<ErrorEvent<T>>,
}

impl<T: Real> TrajectoryResult<T> {
    /// Number of jumps at or before `time`.
    pub fn jumps_until(&self, time: T) -> usize {
        self.jumps.iter().take_while(|j| j.time <= time).count()
    }
}

/// Result of a run with inserted errors.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryOutcome<T> {
    Completed(TrajectoryResult<T>),
    /// A loss error hit an empty qubit; the realization has zero weight.
    Annihilated(ErrorEvent<T>),
}

/// Reusable trajectory integrator for one `(space, instance)` pair.
pub struct TrajectorySimulator<'a, T> {
    space: &'a HilbertSpace,
    inst: &'a ProtocolInstance<T>,
    parts: HamiltonianParts<T>,
    cavity_lowering: Vec<LoweringMap>,
    qubit_lowering: Vec<LoweringMap>,
    config: DynamicsConfig<T>,
    initial: StateVector<T>,
    boundaries: Vec<T>,
}

struct RunState<T> {
    psi: Vec<Cplx<T>>,
    scratch: Vec<Cplx<T>>,
    ws: Rk4Workspace<T>,
    threshold: T,
    rng: ChaCha12Rng,
    jumps: Vec<Jump<T>>,
}

impl<'a, T: Real> TrajectorySimulator<'a, T> {
    pub fn new(
        space: &'a HilbertSpace,
        inst: &'a ProtocolInstance<T>,
        initial: StateVector<T>,
        config: DynamicsConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        let parts = HamiltonianParts::build(space, inst)?;
        if initial.dim() != space.dim() {
            return Err(Error::Argument(format!(
                "initial state has dim {}, space has {}",
                initial.dim(),
                space.dim()
            )));
        }
        let initial = initial.normalized()?;
        let l = space.sites();
        Ok(Self {
            space,
            inst,
            cavity_lowering: (0..l).map(|i| LoweringMap::cavity(space, i)).collect(),
            qubit_lowering: (0..l).map(|i| LoweringMap::qubit(space, i)).collect(),
            parts,
            config,
            initial,
            boundaries: inst.boundaries(),
        })
    }

    pub fn parts(&self) -> &HamiltonianParts<T> {
        &self.parts
    }

    pub fn space(&self) -> &HilbertSpace {
        self.space
    }

    pub fn instance(&self) -> &ProtocolInstance<T> {
        self.inst
    }

    pub fn config(&self) -> &DynamicsConfig<T> {
        &self.config
    }

    pub fn run(&self, master_seed: u64, index: u64) -> Result<TrajectoryResult<T>> {
        match self.run_with_errors(master_seed, index, &[])? {
            TrajectoryOutcome::Completed(r) => Ok(r),
            TrajectoryOutcome::Annihilated(_) => unreachable!("no errors inserted"),
        }
    }

    /// Runs one trajectory, applying `errors` at their scheduled times.
    pub fn run_with_errors(
        &self,
        master_seed: u64,
        index: u64,
        errors: &[ErrorEvent<T>],
    ) -> Result<TrajectoryOutcome<T>> {
        let total = self.inst.total_time();
        let mut errors = errors.to_vec();
        errors.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite error time"));
        for e in &errors {
            if e.site >= self.space.sites() || e.time < T::zero() || e.time > total {
                return Err(Error::Argument(format!(
                    "error at site {} time {} outside chain/evolution window",
                    e.site, e.time
                )));
            }
        }

        let dim = self.space.dim();
        let mut rng = trajectory_stream(master_seed, index);
        let threshold = draw_threshold(&mut rng);
        let mut st = RunState {
            psi: self.initial.amps.clone(),
            scratch: vec![czero(); dim],
            ws: Rk4Workspace::new(dim),
            threshold,
            rng,
            jumps: Vec::new(),
        };
        let mut snapshots = Vec::with_capacity(self.inst.n_cycles());
        let mut jumps_at_snapshot = Vec::with_capacity(self.inst.n_cycles());
        let mut pending = errors.iter().peekable();

        for cycle in 0..self.inst.n_cycles() {
            let start = self.boundaries[cycle];
            let duration = self.inst.cycles[cycle].duration();
            let n = self.config.steps_for(duration);
            let h = duration / T::lit(n as f64);
            let gen = CycleGenerator {
                parts: &self.parts,
                inst: self.inst,
                cycle,
            };
            let is_last = cycle + 1 == self.inst.n_cycles();
            let mut tau = T::zero();
            for j in 1..=n {
                let tau_next = if j == n { duration } else { h * T::lit(j as f64) };
                // errors scheduled inside this step split it
                while let Some(e) = pending.peek() {
                    let local = e.time - start;
                    let inside = local < tau_next || (j == n && is_last && local <= tau_next);
                    if !inside {
                        break;
                    }
                    let local = local.max(tau);
                    self.advance(&gen, &mut st, start, tau, local)?;
                    tau = local;
                    if !self.apply_error(&mut st, e)? {
                        return Ok(TrajectoryOutcome::Annihilated(**e));
                    }
                    pending.next();
                }
                self.advance(&gen, &mut st, start, tau, tau_next)?;
                tau = tau_next;
            }
            let mut snap = StateVector::new(st.psi.clone());
            snap.normalize()?;
            snapshots.push(snap);
            jumps_at_snapshot.push(st.jumps.len());
        }

        Ok(TrajectoryOutcome::Completed(TrajectoryResult {
            master_seed,
            index,
            snapshots,
            jumps: st.jumps,
            jumps_at_snapshot,
            error_insertions: errors,
        }))
    }

    /// Integrates from local time `t0` to `t1` (at most one step), handling jumps.
    fn advance(
        &self,
        gen: &CycleGenerator<'_, T>,
        st: &mut RunState<T>,
        start: T,
        mut t0: T,
        t1: T,
    ) -> Result<()> {
        loop {
            let h = t1 - t0;
            if !(h > T::zero()) {
                return Ok(());
            }
            rk4_step(gen, &st.psi, t0, h, &mut st.ws, &mut st.scratch)?;
            let before = norm_sum(&st.psi);
            let after = norm_sum(&st.scratch);
            let slack = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
            if after > before * (T::one() + slack) {
                return Err(Error::IntegrationFailure {
                    t: (start + t0).as_f64(),
                    dt: h.as_f64(),
                    reason: format!("norm grew from {before} to {after}"),
                });
            }
            if after > st.threshold {
                std::mem::swap(&mut st.psi, &mut st.scratch);
                return Ok(());
            }

            // threshold crossed inside (t0, t1]: bracket the crossing
            let (mut lo, mut hi) = (T::zero(), h);
            while hi - lo > self.config.bisection_tol {
                let mid = (lo + hi) / T::lit(2.0);
                rk4_step(gen, &st.psi, t0, mid, &mut st.ws, &mut st.scratch)?;
                if norm_sum(&st.scratch) > st.threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            rk4_step(gen, &st.psi, t0, hi, &mut st.ws, &mut st.scratch)?;
            std::mem::swap(&mut st.psi, &mut st.scratch);
            t0 += hi;
            let t_jump = start + t0;
            let cavity = self.select_channel(&st.psi, &mut st.rng, t_jump)?;
            st.psi = self.cavity_lowering[cavity].apply(&st.psi);
            renormalize(&mut st.psi, t_jump)?;
            st.jumps.push(Jump {
                time: t_jump,
                cavity,
            });
            st.threshold = draw_threshold(&mut st.rng);
        }
    }

    fn select_channel(&self, psi: &[Cplx<T>], rng: &mut ChaCha12Rng, t: T) -> Result<usize> {
        let norm = norm_sum(psi);
        let weights: Vec<T> = self
            .cavity_lowering
            .iter()
            .map(|map| map.pairs.iter().map(|&(src, _)| norm_sqr(psi[src])).sum::<T>() / norm)
            .collect();
        let total: T = weights.iter().copied().sum();
        if !(total >= T::lit(1e-14)) {
            return Err(Error::DegenerateJump { t: t.as_f64() });
        }
        let u = T::lit(rng.random::<f64>()) * total;
        let mut acc = T::zero();
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return Ok(i);
            }
        }
        Ok(weights.iter().rposition(|&w| w > T::zero()).unwrap_or(0))
    }

    /// Applies an inserted error; returns `false` when the state is annihilated.
    fn apply_error(&self, st: &mut RunState<T>, e: &ErrorEvent<T>) -> Result<bool> {
        match e.kind {
            ErrorKind::Z => {
                for (a, s) in st.psi.iter_mut().zip(self.space.states()) {
                    if s.qubit(e.site) {
                        *a = -*a;
                    }
                }
                Ok(true)
            }
            ErrorKind::Loss => {
                let before = norm_sum(&st.psi);
                let lowered = self.qubit_lowering[e.site].apply(&st.psi);
                if !(norm_sum(&lowered) > before * T::lit(1e-14)) {
                    return Ok(false);
                }
                st.psi = lowered;
                renormalize(&mut st.psi, e.time)?;
                st.threshold = draw_threshold(&mut st.rng);
                Ok(true)
            }
        }
    }
}

fn draw_threshold<T: Real>(rng: &mut ChaCha12Rng) -> T {
    // (0, 1]
    T::lit(1.0 - rng.random::<f64>())
}

fn norm_sum<T: Real>(x: &[Cplx<T>]) -> T {
    x.iter().map(|&a| norm_sqr(a)).sum()
}

fn renormalize<T: Real>(x: &mut [Cplx<T>], t: T) -> Result<()> {
    let n = norm_sum(x);
    if !(n > T::zero()) {
        return Err(Error::DegenerateJump { t: t.as_f64() });
    }
    let s = T::one() / n.sqrt();
    for a in x.iter_mut() {
        *a *= s;
    }
    Ok(())
}

/// Convenience wrapper: one trajectory of `inst` from `initial`.
pub fn run_trajectory<T: Real>(
    space: &HilbertSpace,
    inst: &ProtocolInstance<T>,
    initial: StateVector<T>,
    config: DynamicsConfig<T>,
    master_seed: u64,
    traj_index: u64,
) -> Result<TrajectoryResult<T>> {
    TrajectorySimulator::new(space, inst, initial, config)?.run(master_seed, traj_index)
}
