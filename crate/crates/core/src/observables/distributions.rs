//! Statistics of output distributions over qubit bitstrings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::binomial;
use crate::scalar::Real;

/// `Σ P_k ln(P_k / Q_k)` with `0 ln 0 = 0`.
pub fn kl_divergence<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Argument(format!(
            "distributions over {} and {} outcomes",
            p.len(),
            q.len()
        )));
    }
    let mut acc = T::zero();
    for (k, (&pk, &qk)) in p.iter().zip(q).enumerate() {
        if pk > T::zero() {
            if !(qk > T::zero()) {
                return Err(Error::SupportViolation { k });
            }
            acc += pk * (pk / qk).ln();
        }
    }
    Ok(acc)
}

/// `½ Σ |P_k − Q_k|`.
pub fn abs_distance<T: Real>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>() / T::lit(2.0)
}

/// Participation ratio `(Σ P_k²)^{-1}`.
pub fn ipr<T: Real>(p: &[T]) -> T {
    T::one() / p.iter().map(|&x| x * x).sum::<T>()
}

/// Total probability on outcomes strictly above the lower median of `p`.
pub fn heavy_fraction<T: Real>(p: &[T]) -> T {
    if p.is_empty() {
        return T::zero();
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite probabilities"));
    let m = sorted[(sorted.len() - 1) / 2];
    p.iter().copied().filter(|&x| x > m).sum()
}

/// `1 − KL(ideal, obs) / KL(ideal, tc)`, clamped below at 0.
///
/// An observed distribution missing part of the ideal support counts as
/// infinitely far away and gives 0.
pub fn fidelity<T: Real>(ideal: &[T], obs: &[T], tc: &[T]) -> Result<T> {
    let den = kl_divergence(ideal, tc)?;
    if !(den >= T::lit(1e-12)) {
        return Err(Error::DegenerateReference(den.as_f64()));
    }
    let num = match kl_divergence(ideal, obs) {
        Ok(v) => v,
        Err(Error::SupportViolation { .. }) => return Ok(T::zero()),
        Err(e) => return Err(e),
    };
    Ok((T::one() - num / den).max(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReferenceKind {
    /// Expected rank-ordered Porter-Thomas probabilities over `n` outcomes.
    PorterThomas { n: usize },
    /// Uniform over `n` outcomes.
    Iur { n: usize },
    /// Uniform within each photon-number sector, sectors weighted by a Poisson law.
    Wiur { l: usize, n0: usize, delta_n: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution<T> {
    pub kind: ReferenceKind,
    probs: Vec<T>,
}

impl<T: Real> ReferenceDistribution<T> {
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }

    pub fn iur(n: usize) -> Self {
        Self {
            kind: ReferenceKind::Iur { n },
            probs: vec![T::one() / T::lit(n as f64); n],
        }
    }
}

/// `p_j = (1/N) Σ_{i=j}^{N} 1/i`, descending in `j`.
pub fn porter_thomas_rank_reference<T: Real>(n: usize) -> ReferenceDistribution<T> {
    let mut tail = vec![0.0f64; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += 1.0 / (j + 1) as f64;
        tail[j] = acc / n as f64;
    }
    let total: f64 = tail.iter().sum();
    ReferenceDistribution {
        kind: ReferenceKind::PorterThomas { n },
        probs: tail.into_iter().map(|x| T::lit(x / total)).collect(),
    }
}

/// Estimator used to compare a distribution with Porter-Thomas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtEstimator {
    /// Sorted probabilities matched against expected order statistics.
    #[default]
    Rank,
    /// Histogram of `N·P_k` against the exponential density.
    Histogram,
}

impl std::str::FromStr for PtEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(Self::Rank),
            "histogram" => Ok(Self::Histogram),
            other => Err(Error::Argument(format!("unknown Porter-Thomas estimator {other:?}"))),
        }
    }
}

const HIST_WIDTH: f64 = 0.25;
const HIST_BINS: usize = 32;

/// `KL(sort_desc(P), PT_rank)`.
pub fn kl_from_porter_thomas<T: Real>(p: &[T]) -> Result<T> {
    kl_from_porter_thomas_with(p, PtEstimator::Rank)
}

pub fn kl_from_porter_thomas_with<T: Real>(p: &[T], estimator: PtEstimator) -> Result<T> {
    let n = p.len();
    match estimator {
        PtEstimator::Rank => {
            let mut sorted = p.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite probabilities"));
            kl_divergence(&sorted, porter_thomas_rank_reference::<T>(n).probs())
        }
        PtEstimator::Histogram => {
            // bins of width 0.25 in x = N p up to 8, then one overflow bin
            let mut observed = vec![T::zero(); HIST_BINS + 1];
            let inc = T::one() / T::lit(n as f64);
            for &pk in p {
                let x = pk.as_f64() * n as f64;
                let b = ((x / HIST_WIDTH) as usize).min(HIST_BINS);
                observed[b] += inc;
            }
            let expected: Vec<T> = (0..=HIST_BINS)
                .map(|b| {
                    let lo = (-(b as f64) * HIST_WIDTH).exp();
                    let hi = if b == HIST_BINS { 0.0 } else { (-((b + 1) as f64) * HIST_WIDTH).exp() };
                    T::lit(lo - hi)
                })
                .collect();
            kl_divergence(&observed, &expected)
        }
    }
}

/// Poisson-reweighted incoherent uniform randomness over `L` qubits.
pub fn wiur<T: Real>(l: usize, n0: usize, delta_n: f64) -> Result<ReferenceDistribution<T>> {
    if n0 > l || !(delta_n >= 0.0) {
        return Err(Error::Argument(format!(
            "wiur needs 0 ≤ N0 ≤ L and δN ≥ 0 (L = {l}, N0 = {n0}, δN = {delta_n})"
        )));
    }
    let sector: Vec<f64> = (0..=l)
        .map(|nk| {
            if nk < n0 {
                return 0.0;
            }
            let extra = (nk - n0) as i32;
            let fact: f64 = (1..=extra).map(f64::from).product();
            let pois = (-delta_n).exp() * delta_n.powi(extra) / fact;
            pois / binomial(l as u64, nk as u64) as f64
        })
        .collect();
    let weights: Vec<f64> = (0..1u64 << l).map(|k| sector[k.count_ones() as usize]).collect();
    let total: f64 = weights.iter().sum();
    Ok(ReferenceDistribution {
        kind: ReferenceKind::Wiur { l, n0, delta_n },
        probs: weights.into_iter().map(|w| T::lit(w / total)).collect(),
    })
}
