//! Randomized protocol instances, initial states and multi-instance ensembles.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    average_states, evolve_density_matrix, CheckpointRecord, DensityMatrix, DynamicsConfig,
    ErrorEvent, ErrorKind, StateVector, TrajectoryOutcome, TrajectoryResult, TrajectorySimulator,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{hopping_eigenvalues, HamiltonianParts};
use crate::hilbert::{BasisState, HilbertSpace, OutputDistribution};
use crate::observables::{
    abs_distance, fidelity, heavy_fraction, ipr, kl_divergence, kl_from_porter_thomas_with,
    max_negativity, max_qubit_negativity, mean_se, negativity, number_series_oracle,
    number_series_trajectories, qubit_negativity, wiur, NumberPoint, Partition, PtEstimator,
    ReferenceDistribution,
};
use crate::pulses::{CyclePulses, Parametrization, PhysicsParams, ProtocolInstance, WaveformParams};
use crate::rng::{error_stream, instance_seed};
use crate::scalar::Real;

/// `⌊L/2⌋ − 1`, never below zero.
pub fn default_n0(l: usize) -> usize {
    (l / 2).saturating_sub(1)
}

/// Draws one instance. Detunings and cycle durations come from a stream keyed by `seed`.
pub fn generate_instance<T: Real>(
    l: usize,
    parametrization: Parametrization,
    seed: u64,
    n_cycles: usize,
    n0: Option<usize>,
    physics: &PhysicsParams<T>,
) -> Result<ProtocolInstance<T>> {
    if l < 2 {
        return Err(Error::Argument(format!("need at least two sites, got {l}")));
    }
    if n_cycles == 0 {
        return Err(Error::Argument("need at least one cycle".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let window = match parametrization {
        Parametrization::A => physics.detuning_a,
        Parametrization::B => physics.detuning_b,
    }
    .as_f64();
    let h = (0..l)
        .map(|_| T::lit(rng.random_range(-window..=window)))
        .collect();
    let h_c = match parametrization {
        Parametrization::A => vec![T::zero(); l],
        Parametrization::B => {
            let mut ev = hopping_eigenvalues(l, physics.g_max);
            ev.shuffle(&mut rng);
            ev
        }
    };
    let (lo, hi) = (physics.cycle_min.as_f64(), physics.cycle_max.as_f64());
    let cycles = (0..n_cycles)
        .map(|_| {
            let d = T::lit(rng.random_range(lo..=hi));
            Ok(CyclePulses {
                coupler: WaveformParams::new(
                    physics.g_max,
                    d,
                    physics.coupler_ramp_width,
                    physics.coupler_ramp_inset,
                )?,
                sideband: WaveformParams::new(
                    physics.omega_max,
                    d,
                    physics.sideband_ramp_width,
                    physics.sideband_ramp_inset,
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = ProtocolInstance {
        sites: l,
        parametrization,
        h,
        h_c,
        delta: physics.delta,
        dispersive: physics.dispersive,
        gamma_c: physics.gamma_c,
        cycles,
        n0: n0.unwrap_or_else(|| default_n0(l)),
        seed,
    };
    inst.validate()?;
    Ok(inst)
}

/// 0-based sites of `n0` evenly spaced photons: `round((j − ½)·L/N0)` for `j = 1..=N0`.
pub fn photon_sites(l: usize, n0: usize) -> Vec<usize> {
    (1..=n0)
        .map(|j| {
            let x = (2 * j - 1) * l;
            // round half up of x / (2 n0), then to 0-based
            let site = (x + n0) / (2 * n0);
            site.clamp(1, l) - 1
        })
        .collect()
}

/// Product state with `n0` qubit photons and empty cavities.
pub fn initial_state<T: Real>(space: &HilbertSpace, n0: usize) -> Result<StateVector<T>> {
    if n0 > space.sites() {
        return Err(Error::Argument(format!(
            "{n0} photons do not fit on {} sites",
            space.sites()
        )));
    }
    let sites = photon_sites(space.sites(), n0);
    let mut mask = 0u32;
    for s in sites {
        assert!(mask & (1 << s) == 0, "photon placement collision");
        mask |= 1 << s;
    }
    let index = space.state_index(BasisState::new(mask, 0))?;
    Ok(StateVector::basis(space.dim(), index))
}

/// Keeps the samples whose photon count is `n`.
pub fn post_select(samples: &[u32], n: u32) -> Vec<u32> {
    samples.iter().copied().filter(|s| s.count_ones() == n).collect()
}

/// Restricts a distribution to the `n`-photon sector and renormalizes it.
pub fn post_select_distribution<T: Real>(
    p: &OutputDistribution<T>,
    n: u32,
) -> Result<OutputDistribution<T>> {
    let w = p
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &x)| if (k as u32).count_ones() == n { x } else { T::zero() })
        .collect();
    OutputDistribution::from_weights(p.sites(), w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnsembleSpec<T> {
    pub sites: usize,
    pub parametrization: Parametrization,
    pub n_instances: usize,
    pub n_cycles: usize,
    pub trajectories_per_instance: usize,
    pub master_seed: u64,
    pub cavity_cap: usize,
    /// Initial photon count; `None` uses [`default_n0`].
    pub n0: Option<usize>,
    pub physics: PhysicsParams<T>,
    pub dynamics: DynamicsConfig<T>,
    pub pt_estimator: PtEstimator,
    /// Whether to form ρ and compute negativities (needs dense `dim²` storage).
    pub negativity: bool,
}

impl<T: Real> EnsembleSpec<T> {
    /// Defaults: 1 instance, 12 cycles, `6L²` trajectories, cavity cap 2.
    pub fn new(sites: usize, parametrization: Parametrization, master_seed: u64) -> Self {
        Self {
            sites,
            parametrization,
            n_instances: 1,
            n_cycles: 12,
            trajectories_per_instance: 6 * sites * sites,
            master_seed,
            cavity_cap: 2.min(sites),
            n0: None,
            physics: PhysicsParams::default(),
            dynamics: DynamicsConfig::default(),
            pt_estimator: PtEstimator::Rank,
            negativity: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 || self.n_cycles == 0 || self.trajectories_per_instance == 0 || self.n_instances == 0 {
            return Err(Error::Argument(format!(
                "ensemble needs L ≥ 2 and at least one cycle, trajectory and instance (L = {}, N_c = {}, N_t = {}, instances = {})",
                self.sites, self.n_cycles, self.trajectories_per_instance, self.n_instances
            )));
        }
        if self.cavity_cap > self.sites {
            return Err(Error::Argument(format!(
                "cavity cap {} exceeds {} sites",
                self.cavity_cap, self.sites
            )));
        }
        self.dynamics.validate()
    }

    pub fn n0(&self) -> usize {
        self.n0.unwrap_or_else(|| default_n0(self.sites))
    }

    pub fn instance(&self, index: usize) -> Result<ProtocolInstance<T>> {
        generate_instance(
            self.sites,
            self.parametrization,
            instance_seed(self.master_seed, index as u64),
            self.n_cycles,
            self.n0,
            &self.physics,
        )
    }
}

/// Observables at the end of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CycleObservables<T> {
    /// 1-based cycle number.
    pub cycle: usize,
    pub kl_porter_thomas: T,
    pub kl_iur: T,
    pub kl_wiur: T,
    pub ipr: T,
    pub heavy_fraction: T,
    pub numbers: NumberPoint<T>,
    /// Full-partition negativity and its ratio to the volume-law bound.
    pub negativity: Option<T>,
    pub negativity_ratio: Option<T>,
    pub qubit_negativity: Option<T>,
    pub qubit_negativity_ratio: Option<T>,
    pub purity: Option<T>,
}

impl<T: Real> CycleObservables<T> {
    /// `(name, unit, value, stderr)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, &'static str, T, T)> {
        let n = &self.numbers;
        let mut rows = vec![
            ("kl_porter_thomas", "nats", self.kl_porter_thomas, T::zero()),
            ("kl_iur", "nats", self.kl_iur, T::zero()),
            ("kl_wiur", "nats", self.kl_wiur, T::zero()),
            ("ipr", "states", self.ipr, T::zero()),
            ("heavy_fraction", "probability", self.heavy_fraction, T::zero()),
            ("photons_added", "photons", n.photons_added, n.photons_added_se),
            ("cavity_population", "photons", n.cavity_population, n.cavity_population_se),
            ("cumulative_losses", "photons", n.cumulative_losses, n.cumulative_losses_se),
        ];
        let optional = [
            ("negativity", "ebits", self.negativity),
            ("negativity_ratio", "ratio", self.negativity_ratio),
            ("qubit_negativity", "ebits", self.qubit_negativity),
            ("qubit_negativity_ratio", "ratio", self.qubit_negativity_ratio),
            ("purity", "ratio", self.purity),
        ];
        rows.extend(optional.into_iter().filter_map(|(k, u, v)| v.map(|v| (k, u, v, T::zero()))));
        rows
    }
}

/// Distribution statistics shared by the trajectory and oracle paths.
fn distribution_stats<T: Real>(
    p: &OutputDistribution<T>,
    l: usize,
    n0: usize,
    delta_n: T,
    estimator: PtEstimator,
) -> Result<[T; 5]> {
    let probs = p.probs();
    let iur = ReferenceDistribution::<T>::iur(probs.len());
    let w = wiur::<T>(l, n0, delta_n.as_f64().max(0.0))?;
    Ok([
        kl_from_porter_thomas_with(probs, estimator)?,
        kl_divergence(probs, iur.probs())?,
        kl_divergence(probs, w.probs())?,
        ipr(probs),
        heavy_fraction(probs),
    ])
}

fn cycle_observables<T: Real>(
    cycle: usize,
    p: &OutputDistribution<T>,
    rho: Option<&DensityMatrix<T>>,
    space: &HilbertSpace,
    n0: usize,
    numbers: NumberPoint<T>,
    estimator: PtEstimator,
) -> Result<CycleObservables<T>> {
    let l = space.sites();
    let [kl_pt, kl_iur, kl_wiur, ipr, heavy] =
        distribution_stats(p, l, n0, numbers.photons_added, estimator)?;
    let (neg, qneg, purity) = match rho {
        Some(rho) => (
            Some(negativity(rho, space, &Partition::standard(l))?),
            Some(qubit_negativity(rho, space)?),
            Some(rho.purity()),
        ),
        None => (None, None, None),
    };
    Ok(CycleObservables {
        cycle: cycle + 1,
        kl_porter_thomas: kl_pt,
        kl_iur,
        kl_wiur,
        ipr,
        heavy_fraction: heavy,
        numbers,
        negativity: neg,
        negativity_ratio: neg.map(|n| n / T::lit(max_negativity(l))),
        qubit_negativity: qneg,
        qubit_negativity_ratio: qneg.map(|n| n / T::lit(max_qubit_negativity(l))),
        purity,
    })
}

#[derive(Debug, Clone)]
pub struct InstanceResult<T> {
    pub index: usize,
    pub instance: ProtocolInstance<T>,
    pub cycles: Vec<CycleObservables<T>>,
    /// Qubit output distribution after every cycle.
    pub distributions: Vec<OutputDistribution<T>>,
    pub checkpoint: Vec<CheckpointRecord>,
    /// Trajectories (empty for oracle runs or when not retained).
    pub trajectories: Vec<TrajectoryResult<T>>,
}

impl<T: Real> InstanceResult<T> {
    pub fn final_distribution(&self) -> &OutputDistribution<T> {
        self.distributions.last().expect("at least one cycle")
    }
}

/// Cross-instance mean and standard error of each observable, per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycle: usize,
    /// `(name, unit, mean, stderr)`.
    pub rows: Vec<(String, String, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult<T> {
    pub instances: Vec<InstanceResult<T>>,
    pub summary: Vec<CycleSummary>,
}

/// Qubit distribution of an equal-weight mixture of normalized states.
pub fn mixture_distribution<'a, T: Real>(
    space: &HilbertSpace,
    states: impl IntoIterator<Item = &'a StateVector<T>>,
) -> Result<OutputDistribution<T>> {
    let mut acc = vec![T::zero(); space.dim()];
    let mut count = 0usize;
    for psi in states {
        let n = psi.norm_sqr();
        for (a, &x) in acc.iter_mut().zip(&psi.amps) {
            *a += (x.re * x.re + x.im * x.im) / n;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Argument("empty mixture".into()));
    }
    let inv = T::one() / T::lit(count as f64);
    acc.iter_mut().for_each(|a| *a *= inv);
    space.qubit_marginal(&acc)
}

/// Trajectory simulation of a single instance with the full observable suite.
pub fn run_instance<T: Real>(
    spec: &EnsembleSpec<T>,
    index: usize,
    keep_trajectories: bool,
) -> Result<InstanceResult<T>> {
    let inst = spec.instance(index)?;
    let space = HilbertSpace::build(spec.sites, spec.cavity_cap)?;
    let initial = initial_state(&space, inst.n0)?;
    let sim = TrajectorySimulator::new(&space, &inst, initial, spec.dynamics)?;
    let results = sim.run_many(inst.seed, spec.trajectories_per_instance as u64)?;
    let numbers = number_series_trajectories(&results, sim.parts(), inst.n0)?;
    let mut cycles = Vec::with_capacity(spec.n_cycles);
    let mut distributions = Vec::with_capacity(spec.n_cycles);
    for c in 0..spec.n_cycles {
        let snaps = results.iter().map(|r| &r.snapshots[c]);
        let p = mixture_distribution(&space, snaps.clone())?;
        let rho = if spec.negativity {
            Some(average_states(snaps)?)
        } else {
            None
        };
        cycles.push(cycle_observables(
            c,
            &p,
            rho.as_ref(),
            &space,
            inst.n0,
            numbers[c],
            spec.pt_estimator,
        )?);
        distributions.push(p);
    }
    Ok(InstanceResult {
        index,
        checkpoint: results.iter().map(CheckpointRecord::from_result).collect(),
        trajectories: if keep_trajectories { results } else { Vec::new() },
        instance: inst,
        cycles,
        distributions,
    })
}

/// Density-matrix oracle for a single instance.
pub fn run_oracle_instance<T: Real>(spec: &EnsembleSpec<T>, index: usize) -> Result<InstanceResult<T>> {
    let inst = spec.instance(index)?;
    let space = HilbertSpace::build(spec.sites, spec.cavity_cap)?;
    let initial = initial_state(&space, inst.n0)?;
    let parts = HamiltonianParts::build(&space, &inst)?;
    let oracle = evolve_density_matrix(&space, &inst, &initial, spec.dynamics)?;
    let numbers = number_series_oracle(&oracle, &parts, inst.n0);
    let mut cycles = Vec::with_capacity(spec.n_cycles);
    let mut distributions = Vec::with_capacity(spec.n_cycles);
    for (c, rho) in oracle.snapshots.iter().enumerate() {
        rho.check(1e-10, 1e-8, 1e-8)?;
        let p = rho.qubit_distribution(&space)?;
        let r = spec.negativity.then_some(rho);
        cycles.push(cycle_observables(c, &p, r, &space, inst.n0, numbers[c], spec.pt_estimator)?);
        distributions.push(p);
    }
    Ok(InstanceResult {
        index,
        instance: inst,
        cycles,
        distributions,
        checkpoint: Vec::new(),
        trajectories: Vec::new(),
    })
}

/// Runs every instance (in index order) and aggregates per-cycle means.
pub fn run_ensemble<T: Real>(spec: &EnsembleSpec<T>, oracle: bool) -> Result<EnsembleResult<T>> {
    spec.validate()?;
    let instances = (0..spec.n_instances)
        .map(|i| {
            if oracle {
                run_oracle_instance(spec, i)
            } else {
                run_instance(spec, i, false)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&instances);
    Ok(EnsembleResult { instances, summary })
}

pub fn summarize<T: Real>(instances: &[InstanceResult<T>]) -> Vec<CycleSummary> {
    let Some(first) = instances.first() else {
        return Vec::new();
    };
    (0..first.cycles.len())
        .map(|c| {
            let template = first.cycles[c].rows();
            let rows = template
                .iter()
                .enumerate()
                .map(|(k, &(name, unit, _, _))| {
                    let xs: Vec<f64> = instances
                        .iter()
                        .filter_map(|i| i.cycles[c].rows().get(k).map(|r| r.2.as_f64()))
                        .collect();
                    let (m, se) = mean_se(&xs);
                    (name.to_string(), unit.to_string(), m, se)
                })
                .collect();
            CycleSummary { cycle: c + 1, rows }
        })
        .collect()
}

/// Error-insertion experiment: how much one or more inserted errors move the
/// output distribution relative to a trivial classical reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ErrorFidelitySpec<T> {
    pub sites: usize,
    pub parametrization: Parametrization,
    pub n_instances: usize,
    /// Length of the evolution over which errors are spread.
    pub n_cycles: usize,
    pub kind: ErrorKind,
    pub errors_per_sample: usize,
    /// Error-insertion samples per instance.
    pub samples: usize,
    /// Sideband off and no cavity loss; the space then holds no cavity photons.
    pub unitary: bool,
    pub master_seed: u64,
    pub cavity_cap: usize,
    /// Error-free trajectories for the reference distribution (ignored when unitary).
    pub reference_trajectories: usize,
    pub n0: Option<usize>,
    pub physics: PhysicsParams<T>,
    pub dynamics: DynamicsConfig<T>,
}

impl<T: Real> ErrorFidelitySpec<T> {
    pub fn unitary(sites: usize, kind: ErrorKind, errors_per_sample: usize, master_seed: u64) -> Self {
        Self {
            sites,
            parametrization: Parametrization::A,
            n_instances: 4,
            n_cycles: 12,
            kind,
            errors_per_sample,
            samples: 96,
            unitary: true,
            master_seed,
            cavity_cap: 0,
            reference_trajectories: 1,
            n0: None,
            physics: PhysicsParams::default(),
            dynamics: DynamicsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 || self.n_instances == 0 || self.samples == 0 || self.errors_per_sample == 0 || self.n_cycles == 0 {
            return Err(Error::Argument(
                "error-fidelity run needs L ≥ 2 and positive instance, sample, error and cycle counts".into(),
            ));
        }
        self.dynamics.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFidelityInstance {
    pub index: usize,
    /// KL-based fidelity.
    pub fidelity: f64,
    /// Same construction with the absolute distance in place of KL.
    pub fidelity_abs: f64,
    /// Fraction of drawn insertions that annihilated the state and were redrawn.
    pub annihilated_fraction: f64,
    /// `KL(P_obs, P_TC)`; `None` when the errors moved weight outside the reference support.
    pub kl_obs_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFidelityResult {
    pub instances: Vec<ErrorFidelityInstance>,
    pub mean: f64,
    pub stderr: f64,
    pub mean_abs: f64,
}

const MAX_REDRAWS: usize = 10_000;

/// Uniform spacetime positions for `count` errors.
fn draw_errors<T: Real>(
    rng: &mut ChaCha12Rng,
    kind: ErrorKind,
    count: usize,
    sites: usize,
    total: T,
) -> Vec<ErrorEvent<T>> {
    (0..count)
        .map(|_| ErrorEvent {
            kind,
            site: rng.random_range(0..sites),
            time: T::lit(rng.random::<f64>() * total.as_f64()),
        })
        .collect()
}

pub fn error_fidelity<T: Real>(spec: &ErrorFidelitySpec<T>) -> Result<ErrorFidelityResult> {
    spec.validate()?;
    let physics = if spec.unitary { spec.physics.unitary() } else { spec.physics };
    let cap = if spec.unitary { 0 } else { spec.cavity_cap };
    let space = HilbertSpace::build(spec.sites, cap)?;
    let instances = (0..spec.n_instances)
        .map(|i| {
            let inst = generate_instance(
                spec.sites,
                spec.parametrization,
                instance_seed(spec.master_seed, i as u64),
                spec.n_cycles,
                spec.n0,
                &physics,
            )?;
            error_fidelity_instance(spec, &space, &inst, i)
        })
        .collect::<Result<Vec<_>>>()?;
    let f: Vec<f64> = instances.iter().map(|r| r.fidelity).collect();
    let fa: Vec<f64> = instances.iter().map(|r| r.fidelity_abs).collect();
    let (mean, stderr) = mean_se(&f);
    Ok(ErrorFidelityResult {
        mean,
        stderr,
        mean_abs: mean_se(&fa).0,
        instances,
    })
}

fn error_fidelity_instance<T: Real>(
    spec: &ErrorFidelitySpec<T>,
    space: &HilbertSpace,
    inst: &ProtocolInstance<T>,
    index: usize,
) -> Result<ErrorFidelityInstance> {
    let initial = initial_state(space, inst.n0)?;
    let sim = TrajectorySimulator::new(space, inst, initial, spec.dynamics)?;
    let last = inst.n_cycles() - 1;
    let n_ref = if spec.unitary { 1 } else { spec.reference_trajectories.max(1) };
    let reference = sim.run_many(inst.seed, n_ref as u64)?;
    let ideal = mixture_distribution(space, reference.iter().map(|r| &r.snapshots[last]))?;
    let total = inst.total_time();

    let samples: Vec<(StateVector<T>, usize)> = (0..spec.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = error_stream(inst.seed, s as u64);
            for redraw in 0..MAX_REDRAWS {
                let errors = draw_errors(&mut rng, spec.kind, spec.errors_per_sample, spec.sites, total);
                // noisy runs use trajectory streams disjoint from the reference set
                let traj = (n_ref + s) as u64;
                match sim.run_with_errors(inst.seed, traj, &errors)? {
                    TrajectoryOutcome::Completed(r) => {
                        return Ok((r.snapshots[last].clone(), redraw));
                    }
                    TrajectoryOutcome::Annihilated(_) => continue,
                }
            }
            Err(Error::InsufficientSamples {
                count: 0,
                required: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let redraws: usize = samples.iter().map(|s| s.1).sum();
    let obs = mixture_distribution(space, samples.iter().map(|s| &s.0))?;

    let delta_n = if spec.unitary {
        0.0
    } else {
        let parts = sim.parts();
        let nq: f64 = reference
            .iter()
            .map(|r| r.snapshots[last].expectation_diag(parts.qubit_number()).as_f64())
            .sum::<f64>()
            / reference.len() as f64;
        (nq - inst.n0 as f64).max(0.0)
    };
    let tc = wiur::<T>(spec.sites, inst.n0, delta_n)?;
    let f = fidelity(ideal.probs(), obs.probs(), tc.probs())?;
    let d_tc = abs_distance(ideal.probs(), tc.probs());
    let fa = if d_tc > T::zero() {
        (T::one() - abs_distance(ideal.probs(), obs.probs()) / d_tc).max(T::zero())
    } else {
        T::zero()
    };
    Ok(ErrorFidelityInstance {
        index,
        fidelity: f.as_f64(),
        fidelity_abs: fa.as_f64(),
        annihilated_fraction: redraws as f64 / (redraws + spec.samples) as f64,
        kl_obs_reference: kl_divergence(obs.probs(), tc.probs()).ok().map(|x| x.as_f64()),
    })
}

/// Per-cycle fidelity of a truncated simulation against the largest cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationFidelity {
    pub instance: usize,
    pub caps: Vec<usize>,
    /// `fidelity[c][k]`: cycle `c`, cap `caps[k]`.
    pub fidelity: Vec<Vec<f64>>,
}

impl TruncationFidelity {
    /// Fidelity non-decreasing in the cap at every cycle.
    pub fn is_monotone(&self) -> bool {
        self.fidelity
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1] + 1e-12))
    }
}

/// Runs each cap with identical trajectory streams and compares the qubit
/// distributions with the largest cap; the trivial reference is WIUR with
/// δN taken from the reference run.
pub fn truncation_fidelity<T: Real>(
    spec: &EnsembleSpec<T>,
    caps: &[usize],
) -> Result<Vec<TruncationFidelity>> {
    spec.validate()?;
    let mut caps = caps.to_vec();
    caps.sort_unstable();
    caps.dedup();
    let &reference_cap = caps.last().ok_or_else(|| Error::Argument("no cavity caps".into()))?;
    let mut out = Vec::with_capacity(spec.n_instances);
    for i in 0..spec.n_instances {
        let inst = spec.instance(i)?;
        let mut dists: Vec<Vec<OutputDistribution<T>>> = Vec::with_capacity(caps.len());
        let mut added: Vec<T> = Vec::new();
        for &cap in &caps {
            let space = HilbertSpace::build(spec.sites, cap)?;
            let initial = initial_state(&space, inst.n0)?;
            let sim = TrajectorySimulator::new(&space, &inst, initial, spec.dynamics)?;
            let results = sim.run_many(inst.seed, spec.trajectories_per_instance as u64)?;
            let per_cycle = (0..spec.n_cycles)
                .map(|c| mixture_distribution(&space, results.iter().map(|r| &r.snapshots[c])))
                .collect::<Result<Vec<_>>>()?;
            if cap == reference_cap {
                added = number_series_trajectories(&results, sim.parts(), inst.n0)?
                    .iter()
                    .map(|n| n.photons_added)
                    .collect();
            }
            dists.push(per_cycle);
        }
        let reference = dists.last().expect("reference cap");
        let fidelity = (0..spec.n_cycles)
            .map(|c| {
                let tc = wiur::<T>(spec.sites, inst.n0, added[c].as_f64().max(0.0))?;
                dists
                    .iter()
                    .map(|d| {
                        match fidelity(reference[c].probs(), d[c].probs(), tc.probs()) {
                            Ok(f) => Ok(f.as_f64()),
                            // ideal equal to the reference: nothing to lose
                            Err(Error::DegenerateReference(_)) => Ok(1.0),
                            Err(e) => Err(e),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(TruncationFidelity {
            instance: i,
            caps: caps.clone(),
            fidelity,
        });
    }
    Ok(out)
}
