//! Batch front-end: configuration parsing, mode dispatch and result files.

pub mod config;
pub mod output;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chainsim::dynamics::write_checkpoint;
use chainsim::estimators::{
    density_matrix_bytes, lmax_lower, lmax_mode_splitting, petabyte_crossing, trajectory_budget,
    wavefunction_bytes, TruncationSpec,
};
use chainsim::protocol::{
    error_fidelity, run_instance, run_oracle_instance, summarize, truncation_fidelity, InstanceResult,
};
use chainsim::rng::instance_seed;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{parse_config, ConfigError, Mode, Problem, RunConfig};
use output::{f, CsvTable, DistributionFile};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] chainsim::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(chainsim::Error::Capacity(_) | chainsim::Error::NotFound(_)) => 4,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Core(e) if e.is_numeric() => "numeric",
            CliError::Core(chainsim::Error::Capacity(_) | chainsim::Error::NotFound(_)) => "capacity",
            CliError::Core(_) => "argument",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable description written to `error.json` and stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let problems: Vec<_> = match self {
            CliError::Config(c) => c
                .problems
                .iter()
                .map(|p| json!({"line": p.line, "key": p.key, "message": p.message}))
                .collect(),
            _ => Vec::new(),
        };
        json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
            "problems": problems,
        })
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.hash_input().as_bytes()))
}

/// What a finished run produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    /// Text intended for standard output.
    pub stdout: String,
}

struct Ctx<'a> {
    config: &'a RunConfig,
    dir: PathBuf,
    hash: String,
    report: Report,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.report.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

/// Runs the configured mode inside a pool of `config.threads` workers.
/// Results never depend on the thread count.
pub fn execute(config: &RunConfig) -> CliResult<Report> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if config.threads > 0 {
        builder = builder.num_threads(config.threads);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| execute_in_pool(config))
}

fn execute_in_pool(config: &RunConfig) -> CliResult<Report> {
    let start = Instant::now();
    let dir = PathBuf::from(&config.out);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut ctx = Ctx {
        config,
        dir,
        hash: config_hash(config),
        report: Report::default(),
    };
    let outcome = match config.mode {
        Mode::Run if config.errors.count > 0 => run_errors(&mut ctx),
        Mode::Run => run_ensemble(&mut ctx, false),
        Mode::Oracle => run_ensemble(&mut ctx, true),
        Mode::Stats => run_stats(&mut ctx),
        Mode::Estimate => run_estimate(&mut ctx),
        Mode::Instance => run_print_instances(&mut ctx),
    };
    let elapsed = start.elapsed().as_secs_f64();
    if let Err(e) = &outcome {
        ctx.write_json("error.json", &e.to_json())?;
    }
    write_manifest(&mut ctx, elapsed, outcome.is_ok())?;
    outcome.map(|_| ctx.report)
}

fn write_manifest(ctx: &mut Ctx<'_>, wall_time: f64, ok: bool) -> CliResult<()> {
    let c = ctx.config;
    let seeds: Vec<u64> = (0..c.instances).map(|i| instance_seed(c.seed, i as u64)).collect();
    let files: Vec<String> = ctx
        .report
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "config_hash": ctx.hash,
        "mode": c.mode.as_str(),
        "master_seed": c.seed,
        "instance_seeds": seeds,
        "version": VERSION,
        "threads": rayon::current_num_threads(),
        "wall_time_s": wall_time,
        "status": if ok { "ok" } else { "error" },
        "files": files,
        "config": c.hash_input(),
    });
    ctx.write_json("manifest.json", &manifest)
}

fn observables_table(config: &RunConfig, results: &[InstanceResult<f64>]) -> CsvTable {
    let mut t = CsvTable::observables();
    for r in results {
        for c in &r.cycles {
            for (name, unit, v, se) in c.rows() {
                t.row([r.index.to_string(), c.cycle.to_string(), name.into(), unit.into(), f(v), f(se)]);
            }
        }
    }
    if config.instances > 1 && !results.is_empty() {
        for s in summarize(results) {
            for (name, unit, v, se) in s.rows {
                t.row(["mean".into(), s.cycle.to_string(), name, unit, f(v), f(se)]);
            }
        }
    }
    t
}

fn run_ensemble(ctx: &mut Ctx<'_>, oracle: bool) -> CliResult<()> {
    let spec = ctx.config.ensemble_spec();
    spec.validate()?;
    let mut results = Vec::with_capacity(spec.n_instances);
    let mut failure = None;
    for i in 0..spec.n_instances {
        let r = if oracle {
            run_oracle_instance(&spec, i)
        } else {
            run_instance(&spec, i, false)
        };
        match r {
            Ok(r) => results.push(r),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    // completed instances are persisted even when a later one failed
    let table = observables_table(ctx.config, &results);
    ctx.write("observables.csv", table.render().as_bytes())?;
    let mut dists = DistributionFile::new(&ctx.hash, ctx.config.sites, ctx.config.mode.as_str());
    for r in &results {
        dists.push(r.index, r.instance.seed, r.cycles.len(), r.final_distribution().probs());
    }
    ctx.write_json("distributions.json", &dists.to_json())?;
    if !oracle {
        let path = ctx.dir.join("trajectories.jsonl");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        for r in &results {
            write_checkpoint(&mut w, &r.checkpoint).map_err(io_err(&path))?;
        }
        drop(w);
        ctx.report.files.push(path);
    }
    if let Some(e) = failure {
        return Err(e.into());
    }

    if !oracle && !ctx.config.truncation_caps.is_empty() {
        let tf = truncation_fidelity(&spec, &ctx.config.truncation_caps)?;
        let mut t = CsvTable::observables();
        for inst in &tf {
            for (c, row) in inst.fidelity.iter().enumerate() {
                for (k, &cap) in inst.caps.iter().enumerate() {
                    t.row([
                        inst.instance.to_string(),
                        (c + 1).to_string(),
                        format!("fidelity_cap{cap}"),
                        "ratio".into(),
                        f(row[k]),
                        f(0.0),
                    ]);
                }
            }
        }
        ctx.write("truncation.csv", t.render().as_bytes())?;
    }
    let n = results.len();
    ctx.report.stdout = format!("{n} instance(s), {} cycle(s) written to {}\n", spec.n_cycles, ctx.dir.display());
    Ok(())
}

fn run_errors(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let spec = ctx.config.error_spec();
    let res = error_fidelity(&spec)?;
    let cycle = spec.n_cycles.to_string();
    let mut t = CsvTable::observables();
    for i in &res.instances {
        let mut rows = vec![
            ("fidelity", "ratio", i.fidelity),
            ("fidelity_abs", "ratio", i.fidelity_abs),
            ("annihilated_fraction", "probability", i.annihilated_fraction),
        ];
        if let Some(kl) = i.kl_obs_reference {
            rows.push(("kl_obs_reference", "nats", kl));
        }
        for (name, unit, v) in rows {
            t.row([i.index.to_string(), cycle.clone(), name.into(), unit.into(), f(v), f(0.0)]);
        }
    }
    t.row(["mean".into(), cycle.clone(), "fidelity".into(), "ratio".into(), f(res.mean), f(res.stderr)]);
    t.row(["mean".into(), cycle, "fidelity_abs".into(), "ratio".into(), f(res.mean_abs), f(0.0)]);
    ctx.write("observables.csv", t.render().as_bytes())?;
    let mut v = serde_json::to_value(&res).expect("json");
    v["config_hash"] = json!(ctx.hash);
    ctx.write_json("error_fidelity.json", &v)?;
    ctx.report.stdout = format!("F = {} ± {}\n", f(res.mean), f(res.stderr));
    Ok(())
}

fn run_print_instances(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let spec = ctx.config.ensemble_spec();
    spec.validate()?;
    let instances = (0..spec.n_instances)
        .map(|i| spec.instance(i))
        .collect::<chainsim::Result<Vec<_>>>()?;
    let v = json!({"config_hash": ctx.hash, "instances": instances});
    ctx.write_json("instances.json", &v)?;
    ctx.report.stdout = serde_json::to_string_pretty(&v).expect("json") + "\n";
    Ok(())
}

fn run_stats(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let s = &ctx.config.stats;
    if s.reference.is_empty() || s.candidate.is_empty() {
        return Err(CliError::Input("stats needs a reference and a candidate distribution file".into()));
    }
    let a = DistributionFile::read(Path::new(&s.reference))?;
    let b = DistributionFile::read(Path::new(&s.candidate))?;
    let cmp = output::compare(&a, &b)?;
    let v = json!({"config_hash": ctx.hash, "reference": s.reference, "candidate": s.candidate, "comparisons": cmp});
    ctx.write_json("stats.json", &v)?;
    ctx.report.stdout = serde_json::to_string_pretty(&v).expect("json") + "\n";
    Ok(())
}

fn run_estimate(ctx: &mut Ctx<'_>) -> CliResult<()> {
    let c = ctx.config;
    let e = &c.estimate;
    let mut t = CsvTable::new(&["quantity", "L", "parameter", "unit", "value"]);
    for l in e.l_min..=e.l_max {
        let ls = l.to_string();
        t.row([
            "density_matrix_bytes".into(),
            ls.clone(),
            format!("cavity_cap={}", c.cavity_cap()),
            "bytes".into(),
            density_matrix_bytes(l, c.cavity_cap()).to_string(),
        ]);
        t.row([
            "trajectory_budget".into(),
            ls.clone(),
            format!("cycles={}", c.cycles),
            "trajectories".into(),
            trajectory_budget(l, c.cycles).to_string(),
        ]);
        for &(dc, tc) in &e.caps {
            for &d in &e.divisors {
                let spec = TruncationSpec::new(l, dc, tc, Some(d));
                spec.validate()?;
                t.row([
                    "wavefunction_bytes".into(),
                    ls.clone(),
                    format!("doublons={dc};triplons={tc};D={}", f(d)),
                    "bytes".into(),
                    wavefunction_bytes(&spec).to_string(),
                ]);
            }
        }
    }
    let gamma = c.physics.gamma_c;
    for &n in &e.n_cav {
        t.row([
            "lmax_lower".into(),
            String::new(),
            format!("n_cav={};v={};gamma_c={}", f(n), f(e.velocity), f(gamma)),
            "sites".into(),
            f(lmax_lower(e.velocity, n, gamma)?),
        ]);
    }
    t.row([
        "lmax_mode_splitting".into(),
        String::new(),
        format!("g_max={};gamma_c={}", f(c.physics.g_max), f(gamma)),
        "sites".into(),
        f(lmax_mode_splitting(c.physics.g_max, gamma)?),
    ]);
    for &(dc, tc) in &e.caps {
        for &d in &e.divisors {
            let cross = petabyte_crossing(dc, tc, d, e.l_max);
            t.row([
                "petabyte_crossing".into(),
                cross.map(|l| l.to_string()).unwrap_or_default(),
                format!("doublons={dc};triplons={tc};D={}", f(d)),
                "sites".into(),
                cross.map(|l| l.to_string()).unwrap_or_else(|| "none".into()),
            ]);
        }
    }
    let text = t.render();
    ctx.write("estimates.csv", text.as_bytes())?;
    ctx.report.stdout = text;
    Ok(())
}
