//! Result file formats.
//!
//! Floats are written in their shortest round-trip decimal form so reruns can
//! be compared byte for byte. Bitstrings are fixed-width lowercase hex of the
//! qubit pattern with site 1 in the least significant bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chainsim::observables::{abs_distance, kl_divergence};
use chainsim::OutputDistribution64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CliError, CliResult};

/// Shortest round-trip representation of an `f64`.
pub fn f(x: f64) -> String {
    format!("{x:?}")
}

pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// `instance,cycle,observable,unit,value,stderr`; the unit column names
    /// the unit of `value` and `stderr`.
    pub fn observables() -> Self {
        Self::new(&["instance", "cycle", "observable", "unit", "value", "stderr"])
    }

    pub fn row<const N: usize>(&mut self, cells: [String; N]) {
        assert_eq!(N, self.header.len(), "row width");
        self.rows.push(cells.into());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = line.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn hex_width(sites: usize) -> usize {
    sites.div_ceil(4).max(1)
}

pub fn bitstring_hex(k: usize, sites: usize) -> String {
    format!("{k:0w$x}", w = hex_width(sites))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub instance: usize,
    pub seed: u64,
    /// Number of cycles the distribution was taken after.
    pub cycle: usize,
    /// Nonzero probabilities keyed by bitstring.
    pub probabilities: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFile {
    pub config_hash: String,
    pub mode: String,
    pub sites: usize,
    pub bit_order: String,
    pub instances: Vec<DistributionEntry>,
}

impl DistributionFile {
    pub fn new(config_hash: &str, sites: usize, mode: &str) -> Self {
        Self {
            config_hash: config_hash.into(),
            mode: mode.into(),
            sites,
            bit_order: "hex of qubit occupation, site 1 = least significant bit".into(),
            instances: Vec::new(),
        }
    }

    pub fn push(&mut self, instance: usize, seed: u64, cycle: usize, probs: &[f64]) {
        let probabilities = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(k, &p)| (bitstring_hex(k, self.sites), p))
            .collect();
        self.instances.push(DistributionEntry {
            instance,
            seed,
            cycle,
            probabilities,
        });
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("json")
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Dense distribution of one entry, renormalized against rounding.
    pub fn distribution(&self, entry: &DistributionEntry) -> CliResult<OutputDistribution64> {
        if self.sites > 24 {
            return Err(CliError::Input(format!("{} sites is too many to densify", self.sites)));
        }
        let mut probs = vec![0.0; 1usize << self.sites];
        for (key, &p) in &entry.probabilities {
            let k = usize::from_str_radix(key, 16)
                .ok()
                .filter(|&k| k < probs.len() && key.len() == hex_width(self.sites))
                .ok_or_else(|| CliError::Input(format!("bad bitstring key {key:?} for L = {}", self.sites)))?;
            probs[k] = p;
        }
        Ok(OutputDistribution64::from_weights(self.sites, probs)?)
    }
}

/// Pairs instances by index and reports divergences of `candidate` from
/// `reference`.
pub fn compare(reference: &DistributionFile, candidate: &DistributionFile) -> CliResult<Vec<serde_json::Value>> {
    if reference.sites != candidate.sites {
        return Err(CliError::Input(format!(
            "distribution files disagree on L: {} vs {}",
            reference.sites, candidate.sites
        )));
    }
    let mut out = Vec::new();
    for r in &reference.instances {
        let Some(c) = candidate.instances.iter().find(|c| c.instance == r.instance) else {
            continue;
        };
        let p = reference.distribution(r)?;
        let q = candidate.distribution(c)?;
        out.push(json!({
            "instance": r.instance,
            "cycle": r.cycle,
            "kl_candidate_reference": kl_divergence(q.probs(), p.probs()).ok(),
            "kl_reference_candidate": kl_divergence(p.probs(), q.probs()).ok(),
            "abs_distance": abs_distance(q.probs(), p.probs()),
        }));
    }
    if out.is_empty() {
        return Err(CliError::Input("no instance appears in both distribution files".into()));
    }
    Ok(out)
}
