//! Truncated occupation-number basis for `L` hard-core qubits and `L` cavities.
//!
//! Every site carries one qubit and one cavity, each with 0 or 1 photon. The
//! cavities share a global photon cap. States are ordered lexicographically
//! on `(qubit pattern, cavity pattern)`, so all cavity configurations that
//! share a qubit pattern form one contiguous block.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest supported chain length (bit patterns are stored in `u32`).
pub const MAX_SITES: usize = 30;

/// Largest basis dimension this crate will enumerate.
pub const MAX_DIM: usize = 1 << 28;

/// One occupation-number basis state. Bit `i` of each mask is site `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub qubits: u32,
    pub cavities: u32,
}

impl BasisState {
    pub fn new(qubits: u32, cavities: u32) -> Self {
        Self { qubits, cavities }
    }

    pub fn qubit_count(self) -> u32 {
        self.qubits.count_ones()
    }

    pub fn cavity_count(self) -> u32 {
        self.cavities.count_ones()
    }

    pub fn qubit(self, site: usize) -> bool {
        self.qubits >> site & 1 == 1
    }

    pub fn cavity(self, site: usize) -> bool {
        self.cavities >> site & 1 == 1
    }

    /// Packs the state into a `2L`-bit mode pattern: qubits in the low `L`
    /// bits, cavities in the high `L` bits.
    pub fn modes(self, l: usize) -> u64 {
        self.qubits as u64 | (self.cavities as u64) << l
    }
}

/// Enumerated truncated Hilbert space with bidirectional index maps.
///
/// Immutable after construction; share it freely between workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    l: usize,
    max_cavity_total: usize,
    states: Vec<BasisState>,
    cavity_patterns: Vec<u32>,
    // cavity pattern -> rank within a qubit block, u32::MAX when outside the cap
    cavity_rank: Vec<u32>,
}

/// Number of cavity patterns with at most `cap` photons over `l` sites.
pub fn cavity_pattern_count(l: usize, cap: usize) -> u128 {
    (0..=cap.min(l)).map(|m| binomial(l as u64, m as u64)).sum()
}

/// Dimension `2^L · Σ_{m≤cap} C(L, m)` without enumerating anything.
pub fn space_dimension(l: usize, cap: usize) -> u128 {
    (1u128 << l) * cavity_pattern_count(l, cap)
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl HilbertSpace {
    /// Builds the space for `l` sites and a global cavity-photon cap.
    pub fn build(l: usize, max_cavity_total: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Argument("site count must be positive".into()));
        }
        if max_cavity_total > l {
            return Err(Error::Argument(format!(
                "cavity cap {max_cavity_total} exceeds site count {l}"
            )));
        }
        if l > MAX_SITES {
            return Err(Error::Capacity(format!(
                "{l} sites exceeds the supported maximum of {MAX_SITES}"
            )));
        }
        let dim = space_dimension(l, max_cavity_total);
        if dim > MAX_DIM as u128 {
            return Err(Error::Capacity(format!(
                "dimension {dim} for L = {l}, cap = {max_cavity_total} exceeds {MAX_DIM}"
            )));
        }

        let n_patterns = 1u32 << l;
        let cavity_patterns: Vec<u32> = (0..n_patterns)
            .filter(|c| c.count_ones() as usize <= max_cavity_total)
            .collect();
        let mut cavity_rank = vec![u32::MAX; n_patterns as usize];
        for (rank, &c) in cavity_patterns.iter().enumerate() {
            cavity_rank[c as usize] = rank as u32;
        }
        let states = (0..n_patterns)
            .flat_map(|q| cavity_patterns.iter().map(move |&c| BasisState::new(q, c)))
            .collect::<Vec<_>>();
        debug_assert_eq!(states.len() as u128, dim);

        Ok(Self {
            l,
            max_cavity_total,
            states,
            cavity_patterns,
            cavity_rank,
        })
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn max_cavity_total(&self) -> usize {
        self.max_cavity_total
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    /// Number of basis states sharing one qubit pattern.
    pub fn block_len(&self) -> usize {
        self.cavity_patterns.len()
    }

    pub fn cavity_patterns(&self) -> &[u32] {
        &self.cavity_patterns
    }

    pub fn state(&self, index: usize) -> BasisState {
        self.states[index]
    }

    /// Ordinal of `s`, or `None` when it lies outside the truncation.
    pub fn index_of(&self, s: BasisState) -> Option<usize> {
        let full = (1u64 << self.l) - 1;
        if s.qubits as u64 & !full != 0 || s.cavities as u64 & !full != 0 {
            return None;
        }
        match self.cavity_rank[s.cavities as usize] {
            u32::MAX => None,
            rank => Some(s.qubits as usize * self.block_len() + rank as usize),
        }
    }

    pub fn state_index(&self, s: BasisState) -> Result<usize> {
        self.index_of(s)
            .ok_or_else(|| Error::NotFound(format!("{s:?} for L = {}", self.l)))
    }

    pub fn index_state(&self, index: usize) -> Result<BasisState> {
        self.states
            .get(index)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("ordinal {index} >= dim {}", self.dim())))
    }

    /// Reduces basis weights (diagonal of ρ, or |ψ|²) to the qubit bitstring
    /// distribution by summing each contiguous qubit block.
    pub fn qubit_marginal<T: Real>(&self, weights: &[T]) -> Result<OutputDistribution<T>> {
        if weights.len() != self.dim() {
            return Err(Error::Argument(format!(
                "weight vector has length {}, expected {}",
                weights.len(),
                self.dim()
            )));
        }
        let tol = T::lit(1e-9);
        if let Some(k) = weights.iter().position(|&w| w < -tol || !w.is_finite()) {
            return Err(Error::NumericalIntegrity(format!(
                "weight {} at ordinal {k}",
                weights[k]
            )));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::NumericalIntegrity(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let probs = weights
            .chunks(self.block_len())
            .map(|block| block.iter().map(|&w| w.max(T::zero())).sum::<T>())
            .collect::<Vec<_>>();
        OutputDistribution::from_weights(self.l, probs)
    }
}

/// Probabilities over the `2^L` qubit bitstrings.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution<T> {
    l: usize,
    probs: Vec<T>,
}

impl<T: Real> OutputDistribution<T> {
    /// Validates an already normalized probability vector.
    pub fn new(l: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != 1usize << l {
            return Err(Error::Argument(format!(
                "distribution over L = {l} needs {} entries, got {}",
                1usize << l,
                probs.len()
            )));
        }
        if let Some(k) = probs.iter().position(|p| *p < T::zero() || !p.is_finite()) {
            return Err(Error::NumericalIntegrity(format!("P[{k}] = {}", probs[k])));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::NumericalIntegrity(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { l, probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(l: usize, mut weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() || !total.is_finite() {
            return Err(Error::NumericalIntegrity(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(l, weights)
    }

    pub fn uniform(l: usize) -> Self {
        let n = 1usize << l;
        Self {
            l,
            probs: vec![T::one() / T::lit(n as f64); n],
        }
    }

    pub fn delta(l: usize, k: usize) -> Self {
        let mut probs = vec![T::zero(); 1usize << l];
        probs[k] = T::one();
        Self { l, probs }
    }

    /// Histogram of sampled bitstrings.
    pub fn from_samples(l: usize, samples: &[u32]) -> Result<Self> {
        let mut counts = vec![T::zero(); 1usize << l];
        for &s in samples {
            let slot = counts
                .get_mut(s as usize)
                .ok_or_else(|| Error::Argument(format!("bitstring {s:#x} out of range")))?;
            *slot += T::one();
        }
        Self::from_weights(l, counts)
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expected qubit photon number `Σ_k P_k · popcount(k)`.
    pub fn mean_photon_number(&self) -> T {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| p * T::lit(k.count_ones() as f64))
            .sum()
    }

    /// Draws `n` bitstrings by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<u32> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p.as_f64();
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
            })
            .collect()
    }

    /// Mixes distributions with the given weights (weights are normalized).
    pub fn mixture(parts: &[(T, &Self)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("empty mixture".into()))?;
        let l = first.1.l;
        let mut acc = vec![T::zero(); 1usize << l];
        for (w, d) in parts {
            if d.l != l {
                return Err(Error::Argument("mixture over different L".into()));
            }
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += *w * *p;
            }
        }
        Self::from_weights(l, acc)
    }
}
