//! Line-delimited audit log of finished trajectories.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::state::StateVector;
use super::trajectory::{Jump, TrajectoryResult};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub master_seed: u64,
    pub index: u64,
    pub jumps: Vec<Jump<f64>>,
    /// Hex sha256 of the final snapshot's little-endian `f64` amplitudes.
    pub final_state_sha256: String,
}

pub fn state_digest<T: Real>(psi: &StateVector<T>) -> String {
    let mut h = Sha256::new();
    for a in &psi.amps {
        h.update(a.re.as_f64().to_le_bytes());
        h.update(a.im.as_f64().to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl CheckpointRecord {
    pub fn from_result<T: Real>(r: &TrajectoryResult<T>) -> Self {
        Self {
            master_seed: r.master_seed,
            index: r.index,
            jumps: r
                .jumps
                .iter()
                .map(|j| Jump {
                    time: j.time.as_f64(),
                    cavity: j.cavity,
                })
                .collect(),
            final_state_sha256: r.snapshots.last().map(state_digest).unwrap_or_default(),
        }
    }
}

pub fn write_checkpoint<W: Write>(out: &mut W, records: &[CheckpointRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Vec<CheckpointRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Argument(format!("checkpoint line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Argument(format!("checkpoint line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
