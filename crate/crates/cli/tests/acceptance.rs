//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.
//!
//! Workloads are sized for a single core; expensive runs are shared between
//! criteria.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use chainsim::dynamics::{evolve_density_matrix, DynamicsConfig, ErrorKind, TrajectorySimulator};
use chainsim::estimators::{
    density_matrix_bytes, kl_sampling_scaling, lmax_lower, lmax_mode_splitting, petabyte_crossing,
};
use chainsim::hilbert::{BasisState, HilbertSpace};
use chainsim::observables::{
    conditioned_negativity, heavy_fraction, ipr, kl_divergence, negativity, porter_thomas_rank_reference,
    pure_negativity, Partition, ReferenceDistribution,
};
use chainsim::protocol::{
    error_fidelity, initial_state, mixture_distribution, run_instance, run_oracle_instance, truncation_fidelity,
    EnsembleSpec, ErrorFidelitySpec, InstanceResult,
};
use chainsim::pulses::{Parametrization, PhysicsParams};
use chainsim::{Cplx, DensityMatrix64, StateVector64};
use chainsim_cli::{execute, parse_config};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Shared {
    /// L = 4, parametrization A, master seed 1, instance 0.
    oracle4: InstanceResult<f64>,
    traj4: InstanceResult<f64>,
    space4: HilbertSpace,
    /// Parametrization A with retained trajectories at L = 4, 5, 6.
    chains_a: Vec<InstanceResult<f64>>,
    chains_b: Vec<InstanceResult<f64>>,
}

const SEED: u64 = 1;

fn spec(l: usize, p: Parametrization, trajectories: usize, negativity: bool) -> EnsembleSpec<f64> {
    let mut s = EnsembleSpec::new(l, p, SEED);
    s.trajectories_per_instance = trajectories;
    s.negativity = negativity;
    s
}

fn shared() -> Shared {
    let oracle4 = run_oracle_instance(&spec(4, Parametrization::A, 1, true), 0).expect("oracle");
    let traj4 = run_instance(&spec(4, Parametrization::A, 512, false), 0, true).expect("trajectories");
    let chains_a = [(4, 48), (5, 48), (6, 64)]
        .into_iter()
        .map(|(l, nt)| run_instance(&spec(l, Parametrization::A, nt, true), 0, true).expect("ensemble A"))
        .collect();
    let chains_b = [(4, 48), (5, 48), (6, 24)]
        .into_iter()
        .map(|(l, nt)| run_instance(&spec(l, Parametrization::B, nt, false), 0, false).expect("ensemble B"))
        .collect();
    Shared {
        oracle4,
        traj4,
        space4: HilbertSpace::build(4, 2).unwrap(),
        chains_a,
        chains_b,
    }
}

/// KL of the first `n` trajectories' marginal from the oracle at every cycle.
fn prefix_kl(s: &Shared, range: std::ops::Range<usize>) -> Vec<f64> {
    (0..12)
        .map(|c| {
            let p = mixture_distribution(&s.space4, s.traj4.trajectories[range.clone()].iter().map(|t| &t.snapshots[c]))
                .unwrap();
            kl_divergence(p.probs(), s.oracle4.distributions[c].probs()).unwrap()
        })
        .collect()
}

fn write_config(dir: &Path, text: &str) -> chainsim_cli::RunConfig {
    let mut c = parse_config(text).expect("config");
    c.out = dir.to_string_lossy().into_owned();
    c
}

fn oracle_equivalence(s: &Shared) -> Outcome {
    let kls = prefix_kl(s, 0..96);
    let worst = kls.iter().cloned().fold(0.0, f64::max);

    // the same comparison through the command-line front end
    let tmp = tempfile::tempdir().unwrap();
    let base = "L = 4\nparametrization = \"A\"\ntrajectories = 96\nnegativity = false\nseed = 1\n";
    let o = tmp.path().join("oracle");
    let r = tmp.path().join("run");
    let mut c = write_config(&o, base);
    c.mode = chainsim_cli::Mode::Oracle;
    execute(&c).map_err(|e| e.to_string())?;
    let mut c = write_config(&r, base);
    c.mode = chainsim_cli::Mode::Run;
    execute(&c).map_err(|e| e.to_string())?;
    let mut c = write_config(&tmp.path().join("stats"), "mode = \"stats\"");
    c.stats.reference = o.join("distributions.json").to_string_lossy().into_owned();
    c.stats.candidate = r.join("distributions.json").to_string_lossy().into_owned();
    execute(&c).map_err(|e| e.to_string())?;
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("stats/stats.json")).unwrap()).unwrap();
    let cli_kl = stats["comparisons"][0]["kl_candidate_reference"].as_f64().unwrap_or(f64::INFINITY);

    check(
        worst <= 0.01 && cli_kl <= 0.01,
        format!("max per-cycle KL = {worst:.5}, stats KL = {cli_kl:.5} (≤ 0.01)"),
    )
}

fn conservation() -> Outcome {
    let mut physics = PhysicsParams::<f64>::default();
    physics.gamma_c = 0.0;
    let mut sp = spec(4, Parametrization::A, 1, false);
    sp.physics = physics;
    let inst = sp.instance(0).unwrap();
    let space = HilbertSpace::build(4, 2).unwrap();
    let psi0 = initial_state::<f64>(&space, inst.n0).unwrap();
    let sim = TrajectorySimulator::new(&space, &inst, psi0.clone(), DynamicsConfig::default()).unwrap();
    let charge: Vec<f64> = sim
        .parts()
        .qubit_number()
        .iter()
        .zip(sim.parts().cavity_number())
        .map(|(q, c)| q - c)
        .collect();
    let n0 = inst.n0 as f64;
    let mut drift: f64 = 0.0;
    for r in sim.run_many(SEED, 4).unwrap() {
        for psi in &r.snapshots {
            drift = drift.max((psi.expectation_diag(&charge) / psi.norm_sqr() - n0).abs());
        }
    }

    let oracle = evolve_density_matrix(&space, &inst, &psi0, DynamicsConfig::default()).unwrap();
    let mut trace_drift: f64 = 0.0;
    let mut purity_dev: f64 = 0.0;
    let mut prev = 1.0;
    for rho in &oracle.snapshots {
        let tr = rho.trace();
        trace_drift = trace_drift.max((tr - prev).abs());
        prev = tr;
        purity_dev = purity_dev.max((rho.purity() - 1.0).abs());
        drift = drift.max((rho.expectation_diag(&charge) - n0).abs());
    }
    check(
        drift <= 1e-8 && trace_drift <= 1e-8 && purity_dev <= 1e-8,
        format!("charge drift {drift:.1e}, trace drift/cycle {trace_drift:.1e}, purity deviation {purity_dev:.1e} (all ≤ 1e-8)"),
    )
}

fn analytic_constants() -> Outcome {
    let n = 1 << 20;
    let pt = porter_thomas_rank_reference::<f64>(n);
    let kl = kl_divergence(pt.probs(), ReferenceDistribution::<f64>::iur(n).probs()).unwrap();
    let target = 1.0 - 0.577_215_664_901_532_9;
    let hf = heavy_fraction(pt.probs());
    let hf_target = (1.0 + std::f64::consts::LN_2) / 2.0;

    let m = 1 << 14;
    let mut rng = chainsim::rng::stream(7, 99, 0);
    let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let ipr_ratio = ipr(&p) / (m as f64 / 2.0);

    check(
        (kl - target).abs() <= 1e-3 && (hf - hf_target).abs() <= 1e-3 && (ipr_ratio - 1.0).abs() <= 0.05,
        format!("KL(PT, IUR) = {kl:.5} vs {target:.5}; heavy = {hf:.5} vs {hf_target:.5}; IPR/(N/2) = {ipr_ratio:.4}"),
    )
}

fn entanglement(s: &Shared) -> Outcome {
    let space = HilbertSpace::build(2, 0).unwrap();
    let a = space.state_index(BasisState::new(0b01, 0)).unwrap();
    let b = space.state_index(BasisState::new(0b10, 0)).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Cplx::new(0.0, 0.0); space.dim()];
    amps[a] = Cplx::new(h, 0.0);
    amps[b] = Cplx::new(h, 0.0);
    let bell = StateVector64::new(amps);
    let cut = Partition::new(2, 0b01).unwrap();
    let bell_n = negativity(&DensityMatrix64::from_pure(&bell).unwrap(), &space, &cut).unwrap();
    let bell_pure = pure_negativity(&bell, &space, &cut).unwrap();
    let plus = StateVector64::new(vec![Cplx::new(0.5, 0.0); space.dim()]);
    let product = negativity(&DensityMatrix64::from_pure(&plus).unwrap(), &space, &cut).unwrap();
    let basis = pure_negativity(&StateVector64::basis(space.dim(), a), &space, &cut).unwrap();
    let exact_ok = (bell_n - 0.5).abs() <= 1e-10
        && (bell_pure - 0.5).abs() <= 1e-10
        && product.abs() <= 1e-10
        && basis.abs() <= 1e-10;

    let peaks: Vec<f64> = s
        .chains_a
        .iter()
        .map(|r| r.cycles.iter().filter_map(|c| c.negativity_ratio).fold(0.0, f64::max))
        .collect();
    let lo = peaks.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = peaks.iter().cloned().fold(0.0, f64::max);
    let peaks_ok = lo >= 0.05 && hi <= 1.0 && hi < 2.0 * lo;

    let l6 = &s.chains_a[2];
    let space6 = HilbertSpace::build(6, 2).unwrap();
    let cond = conditioned_negativity(&l6.trajectories, &space6, 1, 11, &Partition::standard(6), 20);
    let (cond_n, cond_count) = cond.map_err(|e| format!("one-loss conditioning: {e}"))?;

    check(
        exact_ok && peaks_ok && cond_n > 0.0,
        format!(
            "Bell {bell_n:.12}/{bell_pure:.12}, product {product:.1e}/{basis:.1e}; peak N/N_max at L=4,5,6 = {:.3?}; \
             one-loss N at L=6 cycle 12 = {cond_n:.4} from {cond_count} trajectories",
            peaks
        ),
    )
}

fn error_fidelities() -> Outcome {
    let run = |kind, k, cycles, instances, samples| {
        let mut e = ErrorFidelitySpec::<f64>::unitary(6, kind, k, 5);
        e.n_cycles = cycles;
        e.n_instances = instances;
        e.samples = samples;
        error_fidelity(&e).unwrap()
    };
    let one = run(ErrorKind::Z, 1, 12, 6, 128);
    let two = run(ErrorKind::Z, 2, 12, 6, 128);
    let short = run(ErrorKind::Z, 1, 3, 6, 128);
    let loss = run(ErrorKind::Loss, 1, 12, 3, 32);
    let loss_max = loss.instances.iter().map(|i| i.fidelity).fold(0.0, f64::max);
    check(
        (one.mean - 0.25).abs() <= 0.1
            && (two.mean - 0.076).abs() <= 0.05
            && (short.mean - 0.5).abs() <= 0.15
            && loss_max == 0.0,
        format!(
            "one z: {:.3} ± {:.3}; two z: {:.3} ± {:.3}; one z over 3 cycles: {:.3} ± {:.3}; one loss: max {loss_max}",
            one.mean, one.stderr, two.mean, two.stderr, short.mean, short.stderr
        ),
    )
}

fn heavy_output(s: &Shared) -> Outcome {
    let mut worst = (f64::INFINITY, String::new());
    for r in s.chains_a.iter().chain(&s.chains_b) {
        for c in &r.cycles[3..] {
            if c.heavy_fraction < worst.0 {
                worst = (
                    c.heavy_fraction,
                    format!("L={} {} cycle {}", r.instance.sites, r.instance.parametrization, c.cycle),
                );
            }
        }
    }
    check(
        worst.0 > 2.0 / 3.0,
        format!("min heavy fraction over L=4..6, A and B, cycles 4..12 = {:.4} at {}", worst.0, worst.1),
    )
}

fn sampling_scaling(s: &Shared) -> Outcome {
    let counts = [32usize, 64, 128, 256, 512];
    let kls: Vec<f64> = counts
        .iter()
        .map(|&n| {
            let batches = 512 / n;
            let total: f64 = (0..batches)
                .map(|b| prefix_kl(s, b * n..(b + 1) * n).iter().sum::<f64>() / 12.0)
                .sum();
            total / batches as f64
        })
        .collect();
    let ns: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let slope = kl_sampling_scaling(&ns, &kls).map_err(|e| e.to_string())?;
    check(
        (slope + 1.0).abs() <= 0.2,
        format!(
            "slope {slope:.3} (−1 ± 0.2); mean KL {}",
            kls.iter().map(|k| format!("{k:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn estimator_regressions() -> Outcome {
    let nine = density_matrix_bytes(9, 2) as f64 / 1e9;
    let ten = density_matrix_bytes(10, 2) as f64 / 1e9;
    let p = PhysicsParams::<f64>::default();
    let split = lmax_mode_splitting(p.g_max, p.gamma_c).unwrap();
    let v = 1.0 / 3.5;
    let hi = lmax_lower(v, 0.05, p.gamma_c).unwrap();
    let lo = lmax_lower(v, 0.1, p.gamma_c).unwrap();
    let mut crossings = Vec::new();
    for (dc, tc) in [(2, 1), (3, 2)] {
        for d in [10.0, 8.0, 6.0, 5.0, 4.0] {
            crossings.push(petabyte_crossing(dc, tc, d, 40).unwrap_or(0));
        }
    }
    check(
        (nine - 8.9).abs() < 0.05
            && (ten - 52.6).abs() < 0.05
            && (split - 72.9).abs() <= 0.5
            && (lo - 17.0).abs() < 0.5
            && (hi - 24.0).abs() < 0.5
            && crossings.iter().all(|l| (21..=26).contains(l)),
        format!(
            "ρ bytes {nine:.3} GB / {ten:.2} GB; mode splitting {split:.2}; lower bound [{lo:.2}, {hi:.2}]; 1 PB at L = {crossings:?}"
        ),
    )
}

fn determinism() -> Outcome {
    let text = "L = 4\ntrajectories = 16\ncycles = 4\ninstances = 2\nseed = 11\n";
    let tmp = tempfile::tempdir().unwrap();
    let files = ["observables.csv", "distributions.json", "trajectories.jsonl"];
    let mut outputs = Vec::new();
    for (k, threads) in [1usize, 4, 8, 1].into_iter().enumerate() {
        let dir = tmp.path().join(format!("t{k}"));
        let mut c = write_config(&dir, text);
        c.threads = threads;
        execute(&c).map_err(|e| e.to_string())?;
        outputs.push(files.map(|f| fs::read(dir.join(f)).unwrap()));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let bytes: usize = outputs[0].iter().map(Vec::len).sum();
    check(same, format!("{bytes} output bytes identical for threads 1, 4, 8 and a rerun"))
}

fn truncation_harness() -> Outcome {
    let mut summary = Vec::new();
    let mut ok = true;
    for l in [4usize, 5, 6] {
        let sp = spec(l, Parametrization::A, 8, false);
        let tf = truncation_fidelity(&sp, &[1, 2]).map_err(|e| e.to_string())?;
        for t in &tf {
            ok &= t.fidelity.len() == 12
                && t.is_monotone()
                && t.fidelity.iter().flatten().all(|f| (0.0..=1.0).contains(f));
            let cap1: Vec<String> = t.fidelity.iter().map(|row| format!("{:.2}", row[0])).collect();
            summary.push(format!("L={l} F(cap 1) = [{}]", cap1.join(" ")));
        }
    }
    check(ok, format!("12 cycles, F ∈ [0,1], monotone in cap; {}", summary.join(", ")))
}

fn main() {
    let start = Instant::now();
    let s = shared();
    eprintln!("shared runs took {:.1} s", start.elapsed().as_secs_f64());
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("oracle equivalence", Box::new(|| oracle_equivalence(&s))),
        ("conservation", Box::new(conservation)),
        ("analytic constants", Box::new(analytic_constants)),
        ("entanglement", Box::new(|| entanglement(&s))),
        ("error-insertion fidelities", Box::new(error_fidelities)),
        ("heavy output", Box::new(|| heavy_output(&s))),
        ("sampling scaling", Box::new(|| sampling_scaling(&s))),
        ("estimator regressions", Box::new(estimator_regressions)),
        ("determinism", Box::new(determinism)),
        ("truncation fidelity harness", Box::new(truncation_harness)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1} s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
