//! Negativity of the partial transpose.
//!
//! The cavity cap makes the truncated space a subspace of the product space
//! rather than a product itself, so ρ is embedded in the full qubit × cavity
//! mode space, transposed there, and diagonalized. States carry a definite
//! `N_q − N_c` per trajectory, which makes the transposed matrix block diagonal
//! in the difference of that charge between the two sides; blocks are
//! diagonalized separately whenever the input respects the charge.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{DensityMatrix, StateVector, TrajectoryResult};
use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeLabel {
    Qubit(usize),
    Cavity(usize),
}

/// Bipartition of the `2L` modes; bit `i` is qubit `i`, bit `L + i` is cavity `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Partition {
    sites: usize,
    side_a: u64,
}

impl Partition {
    pub fn new(sites: usize, side_a: u64) -> Result<Self> {
        let all = (1u64 << (2 * sites)) - 1;
        if side_a == 0 || side_a & all == all || side_a & !all != 0 {
            return Err(Error::Argument(format!(
                "side A {side_a:#b} must be a nonempty proper subset of {} modes",
                2 * sites
            )));
        }
        Ok(Self { sites, side_a })
    }

    pub fn from_labels(sites: usize, labels: &[ModeLabel]) -> Result<Self> {
        let mut mask = 0u64;
        for &lab in labels {
            let bit = match lab {
                ModeLabel::Qubit(i) if i < sites => i,
                ModeLabel::Cavity(i) if i < sites => sites + i,
                other => return Err(Error::Argument(format!("{other:?} outside {sites} sites"))),
            };
            mask |= 1 << bit;
        }
        Self::new(sites, mask)
    }

    /// All cavities plus the leftmost `⌈(L − 3)/2⌉` qubits.
    pub fn standard(sites: usize) -> Self {
        let n_qubits = sites.saturating_sub(2) / 2;
        let qubits = (1u64 << n_qubits) - 1;
        let cavities = ((1u64 << sites) - 1) << sites;
        Self {
            sites,
            side_a: cavities | qubits,
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn side_a(&self) -> u64 {
        self.side_a
    }

    pub fn contains(&self, label: ModeLabel) -> bool {
        match label {
            ModeLabel::Qubit(i) => self.side_a >> i & 1 == 1,
            ModeLabel::Cavity(i) => self.side_a >> (self.sites + i) & 1 == 1,
        }
    }
}

/// `½(√((1 + L)·2^L) − 1)`.
pub fn max_negativity(l: usize) -> f64 {
    0.5 * (((1 + l) as f64 * 2f64.powi(l as i32)).sqrt() - 1.0)
}

/// `2^{⌊L/2⌋ − 1}`.
pub fn max_qubit_negativity(l: usize) -> f64 {
    2f64.powi((l / 2) as i32 - 1)
}

/// Sum of the magnitudes of the negative eigenvalues of `ρ^{T_A}` for a matrix
/// given on basis `modes`, whose entries are produced by `get(r, c)`.
fn transposed_negativity(
    modes: &[u64],
    get: impl Fn(usize, usize) -> Complex64,
    side_a: u64,
    charge: impl Fn(u64) -> i64,
) -> Result<f64> {
    let n = modes.len();
    let key = |x: u64| charge(x & side_a) - charge(x & !side_a);
    let swap = |s: u64, t: u64| ((t & side_a) | (s & !side_a), (s & side_a) | (t & !side_a));

    // product states that carry weight, and whether the charge blocks hold
    let mut product: Vec<u64> = Vec::new();
    let mut blocked = true;
    for r in 0..n {
        for c in 0..n {
            if get(r, c) == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (row, col) = swap(modes[r], modes[c]);
            product.push(row);
            product.push(col);
            blocked &= key(row) == key(col);
        }
    }
    product.sort_unstable();
    product.dedup();

    let mut block_of: HashMap<u64, (usize, usize)> = HashMap::with_capacity(product.len());
    let mut sizes: Vec<usize> = Vec::new();
    let mut keys: HashMap<i64, usize> = HashMap::new();
    for &p in &product {
        let k = if blocked { key(p) } else { 0 };
        let b = *keys.entry(k).or_insert_with(|| {
            sizes.push(0);
            sizes.len() - 1
        });
        block_of.insert(p, (b, sizes[b]));
        sizes[b] += 1;
    }
    if let Some(&big) = sizes.iter().max() {
        if big > DensityMatrix::<f64>::MAX_DIM {
            return Err(Error::Capacity(format!(
                "partial transpose block of size {big} exceeds {}",
                DensityMatrix::<f64>::MAX_DIM
            )));
        }
    }

    let mut blocks: Vec<DMatrix<Complex64>> = sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
    for r in 0..n {
        for c in 0..n {
            let v = get(r, c);
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (row, col) = swap(modes[r], modes[c]);
            let (b, i) = block_of[&row];
            let (_, j) = block_of[&col];
            blocks[b][(i, j)] += v;
        }
    }

    let mut neg = 0.0;
    for m in blocks {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        neg += h
            .symmetric_eigenvalues()
            .iter()
            .filter(|&&x| x < 0.0)
            .map(|x| -x)
            .sum::<f64>();
    }
    Ok(neg)
}

fn mode_charge(l: usize) -> impl Fn(u64) -> i64 {
    let q = (1u64 << l) - 1;
    move |x| (x & q).count_ones() as i64 - (x >> l).count_ones() as i64
}

/// `N = ½(‖ρ^{T_A}‖₁ − Tr ρ)`.
pub fn negativity<T: Real>(rho: &DensityMatrix<T>, space: &HilbertSpace, p: &Partition) -> Result<T> {
    check_partition(space, p)?;
    let l = space.sites();
    let modes: Vec<u64> = space.states().iter().map(|s| s.modes(l)).collect();
    let get = |r: usize, c: usize| {
        let z = rho.get(r, c);
        Complex64::new(z.re.as_f64(), z.im.as_f64())
    };
    Ok(T::lit(transposed_negativity(&modes, get, p.side_a(), mode_charge(l))?))
}

/// Negativity of a pure state from its Schmidt coefficients: `½((Σ s_i)² − 1)`.
pub fn pure_negativity<T: Real>(psi: &StateVector<T>, space: &HilbertSpace, p: &Partition) -> Result<T> {
    check_partition(space, p)?;
    let l = space.sites();
    let n = psi.norm_sqr().as_f64();
    let mut rows: HashMap<u64, usize> = HashMap::new();
    let mut cols: HashMap<u64, usize> = HashMap::new();
    let mut entries = Vec::new();
    for (k, s) in space.states().iter().enumerate() {
        let a = psi.amps[k];
        if a.re == T::zero() && a.im == T::zero() {
            continue;
        }
        let m = s.modes(l);
        let nr = rows.len();
        let r = *rows.entry(m & p.side_a()).or_insert(nr);
        let nc = cols.len();
        let c = *cols.entry(m & !p.side_a()).or_insert(nc);
        entries.push((r, c, Complex64::new(a.re.as_f64(), a.im.as_f64())));
    }
    let mut mat = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
    for (r, c, v) in entries {
        mat[(r, c)] = v;
    }
    let s: f64 = mat.singular_values().iter().sum();
    Ok(T::lit((0.5 * (s * s / n - 1.0)).max(0.0)))
}

/// Cavities traced out, then the leftmost `⌊L/2⌋` qubits against the rest.
pub fn qubit_negativity<T: Real>(rho: &DensityMatrix<T>, space: &HilbertSpace) -> Result<T> {
    let l = space.sites();
    if l < 2 {
        return Err(Error::Argument("qubit cut needs at least two sites".into()));
    }
    let nq = 1usize << l;
    let b = space.block_len();
    let mut reduced = vec![Complex64::new(0.0, 0.0); nq * nq];
    for q in 0..nq {
        for q2 in 0..nq {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..b {
                let z = rho.get(q * b + j, q2 * b + j);
                acc += Complex64::new(z.re.as_f64(), z.im.as_f64());
            }
            reduced[q * nq + q2] = acc;
        }
    }
    let modes: Vec<u64> = (0..nq as u64).collect();
    let side_a = (1u64 << (l / 2)) - 1;
    let neg = transposed_negativity(
        &modes,
        |r, c| reduced[r * nq + c],
        side_a,
        |x| x.count_ones() as i64,
    )?;
    Ok(T::lit(neg))
}

fn check_partition(space: &HilbertSpace, p: &Partition) -> Result<()> {
    if p.sites() != space.sites() {
        return Err(Error::Argument(format!(
            "partition over {} sites, space has {}",
            p.sites(),
            space.sites()
        )));
    }
    Ok(())
}

/// Negativity of the average over trajectories with exactly `jump_count`
/// jumps before the snapshot of `cycle`; returns the value and the number of
/// qualifying trajectories.
pub fn conditioned_negativity<T: Real>(
    results: &[TrajectoryResult<T>],
    space: &HilbertSpace,
    jump_count: usize,
    cycle: usize,
    p: &Partition,
    min_count: usize,
) -> Result<(T, usize)> {
    let selected: Vec<&StateVector<T>> = results
        .iter()
        .filter(|r| r.jumps_at_snapshot.get(cycle) == Some(&jump_count))
        .filter_map(|r| r.snapshots.get(cycle))
        .collect();
    if selected.len() < min_count.max(1) {
        return Err(Error::InsufficientSamples {
            count: selected.len(),
            required: min_count.max(1),
        });
    }
    let count = selected.len();
    let rho = crate::dynamics::average_states(selected)?;
    Ok((negativity(&rho, space, p)?, count))
}

/// Number of trajectories with each jump count at `cycle`, indexed by count.
pub fn jump_histogram<T: Real>(results: &[TrajectoryResult<T>], cycle: usize) -> Vec<usize> {
    let mut hist = Vec::new();
    for r in results {
        if let Some(&k) = r.jumps_at_snapshot.get(cycle) {
            if hist.len() <= k {
                hist.resize(k + 1, 0);
            }
            hist[k] += 1;
        }
    }
    hist
}
