//! Run configuration: a TOML document with top-level run/ensemble keys and
//! optional `[dynamics]`, `[physics]`, `[errors]`, `[truncation]`,
//! `[estimate]` and `[stats]` sections.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys, type mismatches and out-of-range values are all collected
//! and reported together with their line numbers.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use chainsim::dynamics::{DynamicsConfig, ErrorKind};
use chainsim::hilbert::MAX_SITES;
use chainsim::observables::PtEstimator;
use chainsim::protocol::{default_n0, EnsembleSpec, ErrorFidelitySpec};
use chainsim::pulses::{Parametrization, PhysicsParams};
use chainsim::PhysicsParams64;
use toml::de::{DeTable, DeValue};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Oracle,
    Stats,
    Estimate,
    Instance,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Oracle => "oracle",
            Mode::Stats => "stats",
            Mode::Estimate => "estimate",
            Mode::Instance => "instance",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "run" => Mode::Run,
            "oracle" => Mode::Oracle,
            "stats" => Mode::Stats,
            "estimate" => Mode::Estimate,
            "instance" => Mode::Instance,
            _ => return Err("expected one of run, oracle, stats, estimate, instance".into()),
        })
    }
}

/// Time-evolution knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSection {
    /// Largest RK4 step, ns. Default 0.02.
    pub dt: f64,
    /// Jump-time bisection tolerance, ns. Default 0.001.
    pub bisection_tol: f64,
    /// Global cap on cavity photons. Default `min(2, L)`.
    pub cavity_cap: Option<usize>,
}

/// Hardware constants in rad/ns (loss rate in 1/ns); defaults follow the
/// simulated device.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsSection {
    pub g_max: f64,
    pub omega_max: f64,
    pub delta: f64,
    pub dispersive: f64,
    pub gamma_c: f64,
    /// Switch off sideband and loss. Default false.
    pub unitary: bool,
}

/// Error-insertion experiment; disabled when `count = 0` (the default).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorsSection {
    pub kind: ErrorKind,
    pub count: usize,
    pub samples: usize,
    pub reference_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSection {
    pub l_min: usize,
    pub l_max: usize,
    /// Information velocity, sites/ns. Default 1/3.5.
    pub velocity: f64,
    pub n_cav: Vec<f64>,
    pub divisors: Vec<f64>,
    /// `[doublon_cap, triplon_cap]` pairs.
    pub caps: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsSection {
    pub reference: String,
    pub candidate: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out: String,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    pub threads: usize,
    pub sites: usize,
    pub parametrization: Parametrization,
    pub instances: usize,
    pub cycles: usize,
    /// Default `6 L²`.
    pub trajectories: Option<usize>,
    /// Default `⌊L/2⌋ − 1`.
    pub n0: Option<usize>,
    pub negativity: bool,
    pub pt_estimator: PtEstimator,
    pub dynamics: DynamicsSection,
    pub physics: PhysicsSection,
    pub errors: ErrorsSection,
    /// Cavity caps compared by the truncation harness; empty disables it.
    pub truncation_caps: Vec<usize>,
    pub estimate: EstimateSection,
    pub stats: StatsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PhysicsParams64::default();
        Self {
            mode: Mode::Run,
            seed: 1,
            out: "chainsim-out".into(),
            threads: 0,
            sites: 4,
            parametrization: Parametrization::A,
            instances: 1,
            cycles: 12,
            trajectories: None,
            n0: None,
            negativity: true,
            pt_estimator: PtEstimator::Rank,
            dynamics: DynamicsSection {
                dt: 0.02,
                bisection_tol: 1e-3,
                cavity_cap: None,
            },
            physics: PhysicsSection {
                g_max: p.g_max,
                omega_max: p.omega_max,
                delta: p.delta,
                dispersive: p.dispersive,
                gamma_c: p.gamma_c,
                unitary: false,
            },
            errors: ErrorsSection {
                kind: ErrorKind::Z,
                count: 0,
                samples: 96,
                reference_trajectories: 96,
            },
            truncation_caps: Vec::new(),
            estimate: EstimateSection {
                l_min: 4,
                l_max: 30,
                velocity: 1.0 / 3.5,
                n_cav: vec![0.05, 0.1],
                divisors: vec![10.0, 8.0, 6.0, 5.0, 4.0],
                caps: vec![(2, 1), (3, 2)],
            },
            stats: StatsSection {
                reference: String::new(),
                candidate: String::new(),
            },
        }
    }
}

impl RunConfig {
    pub fn trajectories(&self) -> usize {
        self.trajectories.unwrap_or(6 * self.sites * self.sites)
    }

    pub fn cavity_cap(&self) -> usize {
        self.dynamics.cavity_cap.unwrap_or(2.min(self.sites))
    }

    pub fn n0(&self) -> usize {
        self.n0.unwrap_or_else(|| default_n0(self.sites))
    }

    pub fn physics_params(&self) -> PhysicsParams<f64> {
        let mut p = PhysicsParams64::default();
        p.g_max = self.physics.g_max;
        p.omega_max = self.physics.omega_max;
        p.delta = self.physics.delta;
        p.dispersive = self.physics.dispersive;
        p.gamma_c = self.physics.gamma_c;
        if self.physics.unitary {
            p = p.unitary();
        }
        p
    }

    pub fn dynamics_config(&self) -> DynamicsConfig<f64> {
        DynamicsConfig {
            dt: self.dynamics.dt,
            bisection_tol: self.dynamics.bisection_tol,
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec<f64> {
        EnsembleSpec {
            sites: self.sites,
            parametrization: self.parametrization,
            n_instances: self.instances,
            n_cycles: self.cycles,
            trajectories_per_instance: self.trajectories(),
            master_seed: self.seed,
            cavity_cap: self.cavity_cap(),
            n0: self.n0,
            physics: self.physics_params(),
            dynamics: self.dynamics_config(),
            pt_estimator: self.pt_estimator,
            negativity: self.negativity,
        }
    }

    pub fn error_spec(&self) -> ErrorFidelitySpec<f64> {
        ErrorFidelitySpec {
            sites: self.sites,
            parametrization: self.parametrization,
            n_instances: self.instances,
            n_cycles: self.cycles,
            kind: self.errors.kind,
            errors_per_sample: self.errors.count,
            samples: self.errors.samples,
            unitary: self.physics.unitary,
            master_seed: self.seed,
            cavity_cap: match (self.physics.unitary, self.dynamics.cavity_cap) {
                (true, None) => 0,
                _ => self.cavity_cap(),
            },
            reference_trajectories: self.errors.reference_trajectories,
            n0: self.n0,
            physics: self.physics_params(),
            dynamics: self.dynamics_config(),
        }
    }

    /// Canonical TOML text; parsing it yields an equal configuration.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let q = |x: &str| serde_json::to_string(x).expect("string");
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let ints = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "mode = {}", q(self.mode.as_str()));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", q(&self.out));
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "L = {}", self.sites);
        let _ = writeln!(s, "parametrization = {}", q(&self.parametrization.to_string()));
        let _ = writeln!(s, "instances = {}", self.instances);
        let _ = writeln!(s, "cycles = {}", self.cycles);
        if let Some(t) = self.trajectories {
            let _ = writeln!(s, "trajectories = {t}");
        }
        if let Some(n) = self.n0 {
            let _ = writeln!(s, "n0 = {n}");
        }
        let _ = writeln!(s, "negativity = {}", self.negativity);
        let est = match self.pt_estimator {
            PtEstimator::Rank => "rank",
            PtEstimator::Histogram => "histogram",
        };
        let _ = writeln!(s, "pt_estimator = {}", q(est));

        let d = &self.dynamics;
        let _ = writeln!(s, "\n[dynamics]\ndt = {:?}\nbisection_tol = {:?}", d.dt, d.bisection_tol);
        if let Some(c) = d.cavity_cap {
            let _ = writeln!(s, "cavity_cap = {c}");
        }
        let p = &self.physics;
        let _ = writeln!(
            s,
            "\n[physics]\ng_max = {:?}\nomega_max = {:?}\ndelta = {:?}\ndispersive = {:?}\ngamma_c = {:?}\nunitary = {}",
            p.g_max, p.omega_max, p.delta, p.dispersive, p.gamma_c, p.unitary
        );
        let e = &self.errors;
        let kind = match e.kind {
            ErrorKind::Z => "z",
            ErrorKind::Loss => "loss",
        };
        let _ = writeln!(
            s,
            "\n[errors]\nkind = {}\ncount = {}\nsamples = {}\nreference_trajectories = {}",
            q(kind),
            e.count,
            e.samples,
            e.reference_trajectories
        );
        let _ = writeln!(s, "\n[truncation]\ncaps = [{}]", ints(&self.truncation_caps));
        let m = &self.estimate;
        let caps = m
            .caps
            .iter()
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            s,
            "\n[estimate]\nl_min = {}\nl_max = {}\nvelocity = {:?}\nn_cav = [{}]\ndivisors = [{}]\ncaps = [{}]",
            m.l_min,
            m.l_max,
            m.velocity,
            floats(&m.n_cav),
            floats(&m.divisors),
            caps
        );
        let _ = writeln!(
            s,
            "\n[stats]\nreference = {}\ncandidate = {}",
            q(&self.stats.reference),
            q(&self.stats.candidate)
        );
        s
    }

    /// Text hashed into every output file: the canonical form without the
    /// settings that cannot change results.
    pub fn hash_input(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.out = String::new();
        c.to_toml()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    /// 1-based line of the offending key or value; 0 when not tied to a line.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: ", self.line)?;
        }
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<Problem>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration problem(s)", self.problems.len())?;
        for p in &self.problems {
            write!(f, "\n  {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Reader<'s> {
    src: &'s str,
    problems: Vec<Problem>,
}

type Val<'i> = Spanned<DeValue<'i>>;

fn type_name(v: &DeValue<'_>) -> &'static str {
    match v {
        DeValue::String(_) => "string",
        DeValue::Integer(_) => "integer",
        DeValue::Float(_) => "float",
        DeValue::Boolean(_) => "boolean",
        DeValue::Datetime(_) => "datetime",
        DeValue::Array(_) => "array",
        DeValue::Table(_) => "table",
    }
}

impl Reader<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn problem(&mut self, span: Range<usize>, key: &str, message: impl Into<String>) {
        let line = self.line(span);
        self.problems.push(Problem {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn integer(&mut self, v: &Val<'_>, key: &str, lo: i128, hi: i128) -> Option<i128> {
        match v.get_ref() {
            DeValue::Integer(i) => match i128::from_str_radix(i.as_str(), i.radix()) {
                Ok(x) if (lo..=hi).contains(&x) => Some(x),
                Ok(x) => {
                    self.problem(v.span(), key, format!("{x} outside the allowed range [{lo}, {hi}]"));
                    None
                }
                Err(_) => {
                    self.problem(v.span(), key, format!("integer {} does not fit", i.as_str()));
                    None
                }
            },
            other => {
                self.problem(v.span(), key, format!("expected integer, found {}", type_name(other)));
                None
            }
        }
    }

    fn usize_in(&mut self, v: &Val<'_>, key: &str, lo: usize, hi: usize) -> Option<usize> {
        self.integer(v, key, lo as i128, hi as i128).map(|x| x as usize)
    }

    fn float(&mut self, v: &Val<'_>, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Option<f64> {
        let x = match v.get_ref() {
            DeValue::Float(f) => f.as_str().parse::<f64>().ok(),
            DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix()).ok().map(|x| x as f64),
            other => {
                self.problem(v.span(), key, format!("expected number, found {}", type_name(other)));
                return None;
            }
        };
        match x {
            Some(x) if x.is_finite() && ok(x) => Some(x),
            Some(x) => {
                self.problem(v.span(), key, format!("{x} violates {rule}"));
                None
            }
            None => {
                self.problem(v.span(), key, "unparseable number");
                None
            }
        }
    }

    fn boolean(&mut self, v: &Val<'_>, key: &str) -> Option<bool> {
        match v.get_ref() {
            DeValue::Boolean(b) => Some(*b),
            other => {
                self.problem(v.span(), key, format!("expected boolean, found {}", type_name(other)));
                None
            }
        }
    }

    fn string(&mut self, v: &Val<'_>, key: &str) -> Option<String> {
        match v.get_ref() {
            DeValue::String(s) => Some(s.to_string()),
            other => {
                self.problem(v.span(), key, format!("expected string, found {}", type_name(other)));
                None
            }
        }
    }

    fn parsed<E: FromStr>(&mut self, v: &Val<'_>, key: &str) -> Option<E>
    where
        E::Err: fmt::Display,
    {
        let s = self.string(v, key)?;
        match s.parse::<E>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.problem(v.span(), key, format!("{s:?}: {e}"));
                None
            }
        }
    }

    fn array<'a, 'i>(&mut self, v: &'a Val<'i>, key: &str) -> Option<&'a [Val<'i>]> {
        match v.get_ref() {
            DeValue::Array(a) => Some(a.as_ref()),
            other => {
                self.problem(v.span(), key, format!("expected array, found {}", type_name(other)));
                None
            }
        }
    }

    fn table<'a, 'i>(&mut self, v: &'a Val<'i>, key: &str) -> Option<&'a DeTable<'i>> {
        match v.get_ref() {
            DeValue::Table(t) => Some(t),
            other => {
                self.problem(v.span(), key, format!("expected table, found {}", type_name(other)));
                None
            }
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

const MAX_COUNT: usize = 1 << 24;

/// Parses and validates a configuration, applying defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc = DeTable::parse(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1)
            .unwrap_or(0);
        ConfigError {
            problems: vec![Problem {
                line,
                key: "<syntax>".into(),
                message: e.message().to_string(),
            }],
        }
    })?;
    let mut r = Reader {
        src: text,
        problems: Vec::new(),
    };
    let mut c = RunConfig::default();
    let pos = |x: f64| x > 0.0;
    let nonneg = |x: f64| x >= 0.0;

    for (k, v) in doc.get_ref().iter() {
        let key = k.get_ref().as_ref();
        match key {
            "mode" => set(&mut c.mode, r.parsed(v, key)),
            "seed" => set(&mut c.seed, r.integer(v, key, 0, u64::MAX as i128).map(|x| x as u64)),
            "out" => set(&mut c.out, r.string(v, key)),
            "threads" => set(&mut c.threads, r.usize_in(v, key, 0, 4096)),
            "L" => set(&mut c.sites, r.usize_in(v, key, 2, MAX_SITES)),
            "parametrization" => set(&mut c.parametrization, r.parsed(v, key)),
            "instances" => set(&mut c.instances, r.usize_in(v, key, 1, MAX_COUNT)),
            "cycles" => set(&mut c.cycles, r.usize_in(v, key, 1, 10_000)),
            "trajectories" => c.trajectories = r.usize_in(v, key, 1, MAX_COUNT).or(c.trajectories),
            "n0" => c.n0 = r.usize_in(v, key, 0, MAX_SITES).or(c.n0),
            "negativity" => set(&mut c.negativity, r.boolean(v, key)),
            "pt_estimator" => set(&mut c.pt_estimator, r.parsed(v, key)),
            "dynamics" => {
                let Some(t) = r.table(v, key) else { continue };
                for (k, v) in t.iter() {
                    let key = k.get_ref().as_ref();
                    let d = &mut c.dynamics;
                    match key {
                        "dt" => set(&mut d.dt, r.float(v, key, |x| x > 0.0 && x <= 1.0, "0 < dt ≤ 1 ns")),
                        "bisection_tol" => set(&mut d.bisection_tol, r.float(v, key, pos, "> 0")),
                        "cavity_cap" => d.cavity_cap = r.usize_in(v, key, 0, MAX_SITES).or(d.cavity_cap),
                        _ => r.problem(k.span(), &format!("dynamics.{key}"), "unknown key"),
                    }
                }
            }
            "physics" => {
                let Some(t) = r.table(v, key) else { continue };
                for (k, v) in t.iter() {
                    let key = k.get_ref().as_ref();
                    let p = &mut c.physics;
                    match key {
                        "g_max" => set(&mut p.g_max, r.float(v, key, nonneg, "≥ 0")),
                        "omega_max" => set(&mut p.omega_max, r.float(v, key, nonneg, "≥ 0")),
                        "delta" => set(&mut p.delta, r.float(v, key, |x| x != 0.0, "≠ 0")),
                        "dispersive" => set(&mut p.dispersive, r.float(v, key, |_| true, "finite")),
                        "gamma_c" => set(&mut p.gamma_c, r.float(v, key, nonneg, "≥ 0")),
                        "unitary" => set(&mut p.unitary, r.boolean(v, key)),
                        _ => r.problem(k.span(), &format!("physics.{key}"), "unknown key"),
                    }
                }
            }
            "errors" => {
                let Some(t) = r.table(v, key) else { continue };
                for (k, v) in t.iter() {
                    let key = k.get_ref().as_ref();
                    let e = &mut c.errors;
                    match key {
                        "kind" => match r.string(v, key).as_deref() {
                            Some("z") => e.kind = ErrorKind::Z,
                            Some("loss") => e.kind = ErrorKind::Loss,
                            Some(other) => r.problem(v.span(), key, format!("{other:?}: expected \"z\" or \"loss\"")),
                            None => {}
                        },
                        "count" => set(&mut e.count, r.usize_in(v, key, 0, 64)),
                        "samples" => set(&mut e.samples, r.usize_in(v, key, 1, MAX_COUNT)),
                        "reference_trajectories" => {
                            set(&mut e.reference_trajectories, r.usize_in(v, key, 1, MAX_COUNT))
                        }
                        _ => r.problem(k.span(), &format!("errors.{key}"), "unknown key"),
                    }
                }
            }
            "truncation" => {
                let Some(t) = r.table(v, key) else { continue };
                for (k, v) in t.iter() {
                    let key = k.get_ref().as_ref();
                    match key {
                        "caps" => {
                            if let Some(items) = r.array(v, key) {
                                let caps: Vec<Option<usize>> =
                                    items.iter().map(|x| r.usize_in(x, "caps[]", 0, MAX_SITES)).collect();
                                if caps.iter().all(Option::is_some) {
                                    c.truncation_caps = caps.into_iter().flatten().collect();
                                }
                            }
                        }
                        _ => r.problem(k.span(), &format!("truncation.{key}"), "unknown key"),
                    }
                }
            }
            "estimate" => {
                let Some(t) = r.table(v, key) else { continue };
                for (k, v) in t.iter() {
                    let key = k.get_ref().as_ref();
                    let m = &mut c.estimate;
                    match key {
                        "l_min" => set(&mut m.l_min, r.usize_in(v, key, 1, 64)),
                        "l_max" => set(&mut m.l_max, r.usize_in(v, key, 1, 64)),
                        "velocity" => set(&mut m.velocity, r.float(v, key, pos, "> 0")),
                        "n_cav" | "divisors" => {
                            if let Some(items) = r.array(v, key) {
                                let xs: Vec<Option<f64>> =
                                    items.iter().map(|x| r.float(x, key, pos, "> 0")).collect();
                                if xs.iter().all(Option::is_some) {
                                    let xs = xs.into_iter().flatten().collect();
                                    if key == "n_cav" {
                                        m.n_cav = xs;
                                    } else {
                                        m.divisors = xs;
                                    }
                                }
                            }
                        }
                        "caps" => {
                            if let Some(items) = r.array(v, key) {
                                let mut pairs = Vec::new();
                                let mut ok = true;
                                for item in items {
                                    match r.array(item, "caps[]") {
                                        Some([a, b]) => {
                                            let a = r.usize_in(a, "caps[][0]", 0, 64);
                                            let b = r.usize_in(b, "caps[][1]", 0, 64);
                                            match (a, b) {
                                                (Some(a), Some(b)) => pairs.push((a, b)),
                                                _ => ok = false,
                                            }
                                        }
                                        Some(_) => {
                                            r.problem(item.span(), "caps[]", "expected [doublon_cap, triplon_cap]");
                                            ok = false;
                                        }
                                        None => ok = false,
                                    }
                                }
                                if ok {
                                    m.caps = pairs;
                                }
                            }
                        }
                        _ => r.problem(k.span(), &format!("estimate.{key}"), "unknown key"),
                    }
                }
            }
            "stats" => {
                let Some(t) = r.table(v, key) else { continue };
                for (k, v) in t.iter() {
                    let key = k.get_ref().as_ref();
                    match key {
                        "reference" => set(&mut c.stats.reference, r.string(v, key)),
                        "candidate" => set(&mut c.stats.candidate, r.string(v, key)),
                        _ => r.problem(k.span(), &format!("stats.{key}"), "unknown key"),
                    }
                }
            }
            _ => r.problem(k.span(), key, "unknown key"),
        }
    }

    // cross-field checks
    let mut cross = |key: &str, message: String| {
        r.problems.push(Problem {
            line: 0,
            key: key.into(),
            message,
        })
    };
    if let Some(n0) = c.n0 {
        if n0 > c.sites {
            cross("n0", format!("{n0} photons exceed L = {}", c.sites));
        }
    }
    if let Some(cap) = c.dynamics.cavity_cap {
        if cap > c.sites {
            cross("dynamics.cavity_cap", format!("{cap} exceeds L = {}", c.sites));
        }
    }
    if let Some(&cap) = c.truncation_caps.iter().max() {
        if cap > c.sites {
            cross("truncation.caps", format!("{cap} exceeds L = {}", c.sites));
        }
    }
    if c.estimate.l_min > c.estimate.l_max {
        cross(
            "estimate.l_min",
            format!("{} exceeds l_max = {}", c.estimate.l_min, c.estimate.l_max),
        );
    }

    if r.problems.is_empty() {
        Ok(c)
    } else {
        r.problems.sort_by_key(|p| p.line);
        Err(ConfigError { problems: r.problems })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.sites, 4);
        assert_eq!(c.parametrization, Parametrization::A);
        assert_eq!(c.cycles, 12);
        assert_eq!(c.trajectories(), 96);
        assert_eq!(c.cavity_cap(), 2);
        assert_eq!(c.n0(), 1);
    }

    #[test]
    fn negative_sites_is_a_range_violation() {
        let err = parse_config("L = -1").unwrap_err();
        assert_eq!(err.problems.len(), 1);
        assert_eq!(err.problems[0].line, 1);
        assert!(err.problems[0].message.contains("outside the allowed range"));
    }

    #[test]
    fn all_problems_are_listed_with_lines() {
        let text = "# comment\nL = 5\nbogus = 1\ncycles = \"many\"\n\n[dynamics]\ndt = -0.1\nwhat = 2\n";
        let err = parse_config(text).unwrap_err();
        let lines: Vec<usize> = err.problems.iter().map(|p| p.line).collect();
        assert_eq!(lines, vec![3, 4, 7, 8], "{err}");
        assert!(err.to_string().contains("line 3: bogus: unknown key"));
        assert!(err.problems[1].message.contains("expected integer"));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_config("L = 4\nmode = \n").unwrap_err();
        assert_eq!(err.problems[0].key, "<syntax>");
        assert_eq!(err.problems[0].line, 2);
    }

    #[test]
    fn cross_field_checks() {
        let err = parse_config("L = 3\nn0 = 4\n[dynamics]\ncavity_cap = 5").unwrap_err();
        assert_eq!(err.problems.len(), 2);
    }

    #[test]
    fn full_example_parses() {
        let text = r#"
mode = "oracle"
seed = 0x10
L = 6
parametrization = "B"
trajectories = 32
pt_estimator = "histogram"

[dynamics]
dt = 0.01
cavity_cap = 1

[physics]
gamma_c = 0
unitary = true

[errors]
kind = "loss"
count = 2

[truncation]
caps = [1, 2]

[estimate]
caps = [[2, 1]]
n_cav = [0.1]
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.mode, Mode::Oracle);
        assert_eq!(c.seed, 16);
        assert_eq!(c.parametrization, Parametrization::B);
        assert_eq!(c.cavity_cap(), 1);
        assert_eq!(c.errors.kind, ErrorKind::Loss);
        assert_eq!(c.truncation_caps, vec![1, 2]);
        assert_eq!(c.estimate.caps, vec![(2, 1)]);
        assert!(c.physics.unitary);
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    fn config() -> impl Strategy<Value = RunConfig> {
        (
            (0usize..5, any::<u64>(), 2usize..12, any::<bool>(), 1usize..6, 1usize..30),
            (prop::option::of(1usize..500), prop::option::of(0usize..2), any::<bool>(), any::<bool>()),
            (1e-4f64..1.0, 1e-6f64..1e-2, prop::option::of(0usize..2)),
            (0.0f64..1.0, 0.0f64..0.1, -3.0f64..-0.1, -0.1f64..0.1, 0.0f64..0.1, any::<bool>()),
            (any::<bool>(), 0usize..3, 1usize..200, prop::collection::vec(0usize..2, 0..3)),
            ("[a-z0-9_/. -]{0,12}", "[a-z0-9\"\\\\ ]{0,8}"),
        )
            .prop_map(|(a, b, d, p, e, s)| {
                let mut c = RunConfig::default();
                c.mode = [Mode::Run, Mode::Oracle, Mode::Stats, Mode::Estimate, Mode::Instance][a.0];
                c.seed = a.1;
                c.sites = a.2;
                c.parametrization = if a.3 { Parametrization::A } else { Parametrization::B };
                c.instances = a.4;
                c.cycles = a.5;
                c.trajectories = b.0;
                c.n0 = b.1;
                c.negativity = b.2;
                c.pt_estimator = if b.3 { PtEstimator::Rank } else { PtEstimator::Histogram };
                c.dynamics = DynamicsSection { dt: d.0, bisection_tol: d.1, cavity_cap: d.2 };
                c.physics = PhysicsSection {
                    g_max: p.0,
                    omega_max: p.1,
                    delta: p.2,
                    dispersive: p.3,
                    gamma_c: p.4,
                    unitary: p.5,
                };
                c.errors.kind = if e.0 { ErrorKind::Z } else { ErrorKind::Loss };
                c.errors.count = e.1;
                c.errors.samples = e.2;
                c.truncation_caps = e.3;
                c.out = s.0;
                c.stats.reference = s.1;
                c
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(c in config()) {
            let text = c.to_toml();
            let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, c);
        }
    }
}
