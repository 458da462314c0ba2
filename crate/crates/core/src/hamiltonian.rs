//! Sparse Hamiltonian of the pulsed chain.
//!
//! The Hamiltonian is split into static pieces that are scaled by the
//! instantaneous waveform values:
//!
//! ```text
//! H(t) = D + g(t)·Hop + g(t)²·Q + Ω(t)·S
//! ```
//!
//! with `D` the detuning/dispersive diagonal, `Hop` nearest-neighbour
//! exchange, `Q` the perturbative interaction (diagonal `4/δ n_i n_{i+1}` and
//! the mediated hop `2/δ σ⁺_i n_{i+1} σ⁻_{i+2}`) and `S` the blue sideband.
//! Matrix elements that would leave the truncated space are dropped.

use crate::error::{Error, Result};
use crate::hilbert::{BasisState, HilbertSpace};
use crate::pulses::ProtocolInstance;
use crate::scalar::{cplx, czero, Cplx, Real};

/// Compressed sparse row matrix with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Cplx<T>>,
}

impl<T: Real> SparseOperator<T> {
    /// Builds from unordered triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Cplx<T>)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, Cplx<T>)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dim {dim}");
            match merged.last_mut() {
                Some(top) if (top.0, top.1) == (r, c) => top.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != czero());

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let (cols, vals) = merged.into_iter().map(|(_, c, v)| (c, v)).unzip();
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Cplx<T>)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Cplx<T> {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or_else(czero, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = czero();
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            *out = acc;
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Cplx<T>)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Largest entrywise deviation `|A_rc − conj(A_cr)|`.
    pub fn hermiticity_defect(&self) -> T {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(T::zero(), T::max)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn to_dense(&self) -> Vec<Vec<Cplx<T>>> {
        let mut m = vec![vec![czero(); self.dim]; self.dim];
        for (r, c, v) in self.triplets() {
            m[r][c] = v;
        }
        m
    }
}

/// Which waveform coefficient scales a stored matrix element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Scaling {
    Coupler = 0,
    CouplerSquared = 1,
    Sideband = 2,
}

/// Instantaneous waveform coefficients `(g, g², Ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive<T> {
    pub g: T,
    pub omega: T,
}

impl<T: Real> Drive<T> {
    pub fn off() -> Self {
        Self {
            g: T::zero(),
            omega: T::zero(),
        }
    }

    fn factors(&self) -> [T; 3] {
        [self.g, self.g * self.g, self.omega]
    }
}

/// Static, time-independent pieces of `H(t)` over one Hilbert space.
#[derive(Debug, Clone)]
pub struct HamiltonianParts<T> {
    dim: usize,
    diag_static: Vec<T>,
    diag_quad: Vec<T>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    kinds: Vec<u8>,
    cavity_number: Vec<T>,
    qubit_number: Vec<T>,
    gamma_c: T,
}

impl<T: Real> HamiltonianParts<T> {
    pub fn build(space: &HilbertSpace, inst: &ProtocolInstance<T>) -> Result<Self> {
        inst.validate()?;
        if inst.sites != space.sites() {
            return Err(Error::Argument(format!(
                "instance has {} sites, space has {}",
                inst.sites,
                space.sites()
            )));
        }
        let l = space.sites();
        let dim = space.dim();
        let quad = T::lit(4.0) / inst.delta;
        let mediated = T::lit(2.0) / inst.delta;

        let mut diag_static = Vec::with_capacity(dim);
        let mut diag_quad = Vec::with_capacity(dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut kinds = Vec::new();
        row_ptr.push(0);

        for &s in space.states() {
            let mut d = T::zero();
            for i in 0..l {
                let n = s.qubit(i);
                let nc = s.cavity(i);
                if n {
                    d += inst.h[i];
                }
                if nc {
                    d += inst.h_c[i];
                }
                if n && nc {
                    d += inst.dispersive;
                }
            }
            diag_static.push(d);
            let pairs = (0..l.saturating_sub(1))
                .filter(|&i| s.qubit(i) && s.qubit(i + 1))
                .count();
            diag_quad.push(quad * T::lit(pairs as f64));

            let mut row: Vec<(u32, T, u8)> = Vec::new();
            // exchange: −g (σ⁺_i σ⁻_{i+1} + h.c.)
            for i in 0..l.saturating_sub(1) {
                if s.qubit(i) != s.qubit(i + 1) {
                    let t = BasisState::new(s.qubits ^ (0b11 << i), s.cavities);
                    if let Some(c) = space.index_of(t) {
                        row.push((c as u32, -T::one(), Scaling::Coupler as u8));
                    }
                }
            }
            // mediated hop: 2g²/δ (σ⁺_i n_{i+1} σ⁻_{i+2} + h.c.)
            for i in 0..l.saturating_sub(2) {
                if s.qubit(i + 1) && s.qubit(i) != s.qubit(i + 2) {
                    let t = BasisState::new(s.qubits ^ (0b101 << i), s.cavities);
                    if let Some(c) = space.index_of(t) {
                        row.push((c as u32, mediated, Scaling::CouplerSquared as u8));
                    }
                }
            }
            // blue sideband: Ω (σ⁺_i σ⁺_Ci + h.c.)
            for i in 0..l {
                if s.qubit(i) == s.cavity(i) {
                    let t = BasisState::new(s.qubits ^ (1 << i), s.cavities ^ (1 << i));
                    if let Some(c) = space.index_of(t) {
                        row.push((c as u32, T::one(), Scaling::Sideband as u8));
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            for (c, v, k) in row {
                cols.push(c);
                vals.push(v);
                kinds.push(k);
            }
            row_ptr.push(cols.len());
        }

        let cavity_number = space
            .states()
            .iter()
            .map(|s| T::lit(s.cavity_count() as f64))
            .collect();
        let qubit_number = space
            .states()
            .iter()
            .map(|s| T::lit(s.qubit_count() as f64))
            .collect();

        Ok(Self {
            dim,
            diag_static,
            diag_quad,
            row_ptr,
            cols,
            vals,
            kinds,
            cavity_number,
            qubit_number,
            gamma_c: inst.gamma_c,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma_c(&self) -> T {
        self.gamma_c
    }

    pub fn cavity_number(&self) -> &[T] {
        &self.cavity_number
    }

    pub fn qubit_number(&self) -> &[T] {
        &self.qubit_number
    }

    /// Assembles `H` for the given drive as an explicit sparse operator.
    pub fn assemble(&self, drive: Drive<T>) -> SparseOperator<T> {
        let f = drive.factors();
        let g2 = f[1];
        let mut trip = Vec::with_capacity(self.vals.len() + self.dim);
        for r in 0..self.dim {
            let d = self.diag_static[r] + g2 * self.diag_quad[r];
            trip.push((r, r, cplx(d, T::zero())));
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k] * f[self.kinds[k] as usize];
                trip.push((r, self.cols[k] as usize, cplx(v, T::zero())));
            }
        }
        SparseOperator::from_triplets(self.dim, trip)
    }

    /// `out = −i H x` for the Hermitian part only.
    pub fn apply_hamiltonian(&self, drive: Drive<T>, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        self.apply_generator_with_loss(drive, T::zero(), x, out);
    }

    /// `out = −i H_eff x` with `H_eff = H − (i/2) Γ_C N_c`.
    pub fn apply_generator(&self, drive: Drive<T>, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        self.apply_generator_with_loss(drive, self.gamma_c, x, out);
    }

    fn apply_generator_with_loss(&self, drive: Drive<T>, gamma: T, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let f = drive.factors();
        let half_gamma = gamma / T::lit(2.0);
        for r in 0..self.dim {
            let d = self.diag_static[r] + f[1] * self.diag_quad[r];
            let mut acc = x[r] * d;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k] as usize] * (self.vals[k] * f[self.kinds[k] as usize]);
            }
            // −i·acc − (Γ/2) n_c x
            let decay = half_gamma * self.cavity_number[r];
            out[r] = cplx(acc.im - decay * x[r].re, -acc.re - decay * x[r].im);
        }
    }

    /// Sparse `H · M` for a row-major dense `dim × dim` matrix `m`.
    pub(crate) fn left_multiply(&self, drive: Drive<T>, m: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let f = drive.factors();
        let n = self.dim;
        for r in 0..n {
            let d = self.diag_static[r] + f[1] * self.diag_quad[r];
            let dst = &mut out[r * n..(r + 1) * n];
            for (o, &v) in dst.iter_mut().zip(&m[r * n..(r + 1) * n]) {
                *o = v * d;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let w = self.vals[k] * f[self.kinds[k] as usize];
                let c = self.cols[k] as usize;
                for (o, &v) in dst.iter_mut().zip(&m[c * n..(c + 1) * n]) {
                    *o += v * w;
                }
            }
        }
    }

    /// Largest number of stored elements (including the diagonal) in any row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.dim)
            .map(|r| self.row_ptr[r + 1] - self.row_ptr[r] + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Waveform coefficients for `cycle` at local time `t` (ns from the cycle start).
pub fn drive_at<T: Real>(inst: &ProtocolInstance<T>, cycle: usize, t: T) -> Drive<T> {
    let c = &inst.cycles[cycle];
    Drive {
        g: c.coupler.value(t),
        omega: c.sideband.value(t),
    }
}

/// Assembles `H(t)` for `cycle` at local time `t`.
pub fn assemble_hamiltonian<T: Real>(
    space: &HilbertSpace,
    inst: &ProtocolInstance<T>,
    cycle: usize,
    t: T,
) -> Result<SparseOperator<T>> {
    if cycle >= inst.n_cycles() {
        return Err(Error::Argument(format!(
            "cycle {cycle} out of range (N_c = {})",
            inst.n_cycles()
        )));
    }
    let parts = HamiltonianParts::build(space, inst)?;
    Ok(parts.assemble(drive_at(inst, cycle, t)))
}

/// `H_eff = H − (i/2) Γ_C Σ_i n_Ci`.
pub fn effective_hamiltonian<T: Real>(
    h: &SparseOperator<T>,
    space: &HilbertSpace,
    gamma_c: T,
) -> SparseOperator<T> {
    let half = gamma_c / T::lit(2.0);
    let mut trip: Vec<_> = h.triplets().collect();
    for (r, s) in space.states().iter().enumerate() {
        let nc = T::lit(s.cavity_count() as f64);
        trip.push((r, r, cplx(T::zero(), -half * nc)));
    }
    SparseOperator::from_triplets(h.dim(), trip)
}

/// Single-particle spectrum of the open chain with hopping `−g`, ascending.
pub fn hopping_eigenvalues<T: Real>(l: usize, g: T) -> Vec<T> {
    (1..=l)
        .map(|j| {
            if 2 * j == l + 1 {
                T::zero()
            } else {
                let theta = T::PI() * T::lit(j as f64) / T::lit((l + 1) as f64);
                -T::lit(2.0) * g * theta.cos()
            }
        })
        .collect()
}

/// Maps of a lowering operator: pairs `(source, target)` with `target = a·source`.
#[derive(Debug, Clone)]
pub struct LoweringMap {
    pub pairs: Vec<(usize, usize)>,
}

impl LoweringMap {
    pub fn cavity(space: &HilbertSpace, site: usize) -> Self {
        Self::build(space, |s| {
            s.cavity(site)
                .then(|| BasisState::new(s.qubits, s.cavities & !(1 << site)))
        })
    }

    pub fn qubit(space: &HilbertSpace, site: usize) -> Self {
        Self::build(space, |s| {
            s.qubit(site)
                .then(|| BasisState::new(s.qubits & !(1 << site), s.cavities))
        })
    }

    fn build(space: &HilbertSpace, f: impl Fn(BasisState) -> Option<BasisState>) -> Self {
        let pairs = space
            .states()
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| {
                f(s).map(|t| (i, space.index_of(t).expect("lowering stays in truncation")))
            })
            .collect();
        Self { pairs }
    }

    /// Applies the operator to `x`, writing a fresh vector.
    pub fn apply<T: Real>(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut out = vec![czero(); x.len()];
        for &(src, dst) in &self.pairs {
            out[dst] = x[src];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{CyclePulses, Parametrization, PhysicsParams, WaveformParams};
    use crate::scalar::norm_sqr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(l: usize, seed: u64, param: Parametrization) -> ProtocolInstance<f64> {
        let p = PhysicsParams::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cycles = (0..3)
            .map(|_| {
                let d = rng.random_range(20.0..30.0);
                CyclePulses {
                    coupler: WaveformParams::new(p.g_max, d, 1.0, 4.0).unwrap(),
                    sideband: WaveformParams::new(p.omega_max, d, 1.0, 5.0).unwrap(),
                }
            })
            .collect();
        ProtocolInstance {
            sites: l,
            parametrization: param,
            h: (0..l).map(|_| rng.random_range(-0.12..0.12)).collect(),
            h_c: (0..l).map(|_| rng.random_range(-0.3..0.3)).collect(),
            delta: p.delta,
            dispersive: p.dispersive,
            gamma_c: p.gamma_c,
            cycles,
            n0: 1,
            seed,
        }
    }

    #[test]
    fn drive_off_gives_diagonal() {
        let space = HilbertSpace::build(3, 2).unwrap();
        let inst = instance(3, 1, Parametrization::B);
        let h = HamiltonianParts::build(&space, &inst).unwrap().assemble(Drive::off());
        assert!(h.triplets().all(|(r, c, _)| r == c));
        for (r, s) in space.states().iter().enumerate() {
            let mut expect = 0.0;
            for i in 0..3 {
                let n = s.qubit(i) as u8 as f64;
                let nc = s.cavity(i) as u8 as f64;
                expect += inst.h[i] * n + inst.h_c[i] * nc + inst.dispersive * n * nc;
            }
            assert!((h.get(r, r).re - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn two_site_block_by_hand() {
        let space = HilbertSpace::build(2, 1).unwrap();
        let mut inst = instance(2, 2, Parametrization::A);
        inst.h = vec![0.0; 2];
        inst.h_c = vec![0.0; 2];
        let p = PhysicsParams::<f64>::default();
        let g = p.g_max;
        let h = HamiltonianParts::build(&space, &inst)
            .unwrap()
            .assemble(Drive { g, omega: 0.0 });
        let idx = |q, c| space.state_index(BasisState::new(q, c)).unwrap();
        // hand-written 2-site matrix in the (|01>,|10>) block, cavities empty
        assert_eq!(h.get(idx(0b01, 0), idx(0b10, 0)).re, -g);
        assert_eq!(h.get(idx(0b10, 0), idx(0b01, 0)).re, -g);
        assert_eq!(h.get(idx(0b01, 0), idx(0b01, 0)).re, 0.0);
        assert!((h.get(idx(0b11, 0), idx(0b11, 0)).re - 4.0 * g * g / p.delta).abs() < 1e-15);
        assert!(h.get(idx(0b11, 0), idx(0b11, 0)).re < 0.0);
        // no sideband element without Ω
        assert_eq!(h.get(idx(0b00, 0), idx(0b01, 0b01)).re, 0.0);
    }

    #[test]
    fn sideband_and_cap_truncation() {
        let space = HilbertSpace::build(2, 1).unwrap();
        let inst = instance(2, 3, Parametrization::A);
        let h = HamiltonianParts::build(&space, &inst)
            .unwrap()
            .assemble(Drive { g: 0.0, omega: 0.5 });
        let idx = |q, c| space.state_index(BasisState::new(q, c)).unwrap();
        assert_eq!(h.get(idx(0, 0), idx(0b01, 0b01)).re, 0.5);
        assert_eq!(h.get(idx(0b10, 0b10), idx(0, 0)).re, 0.5);
        // second cavity photon would exceed the cap: dropped
        let row = idx(0b01, 0b01);
        assert!(h.row(row).all(|(c, _)| space.state(c).cavity_count() <= 1));
        assert_eq!(h.row_nnz(row), 2);
    }

    #[test]
    fn mediated_hop_requires_middle_photon() {
        let space = HilbertSpace::build(3, 0).unwrap();
        let inst = instance(3, 4, Parametrization::A);
        let g = 0.2;
        let h = HamiltonianParts::build(&space, &inst)
            .unwrap()
            .assemble(Drive { g, omega: 0.0 });
        let idx = |q| space.state_index(BasisState::new(q, 0)).unwrap();
        assert!((h.get(idx(0b011), idx(0b110)).re - 2.0 * g * g / inst.delta).abs() < 1e-15);
        assert_eq!(h.get(idx(0b001), idx(0b100)).re, 0.0);
    }

    #[test]
    fn hermitian_for_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..100 {
            let l = rng.random_range(2..=5);
            let cap = rng.random_range(0..=2.min(l));
            let space = HilbertSpace::build(l, cap).unwrap();
            let inst = instance(l, k, Parametrization::B);
            let cycle = rng.random_range(0..3);
            let t = rng.random_range(0.0..inst.cycles[cycle].duration());
            let h = assemble_hamiltonian(&space, &inst, cycle, t).unwrap();
            assert!(h.is_hermitian(1e-12));
        }
    }

    #[test]
    fn symmetric_pulse_gives_identical_operator() {
        let space = HilbertSpace::build(3, 1).unwrap();
        let inst = instance(3, 5, Parametrization::A);
        let d = inst.cycles[1].duration();
        for t in [0.5, 3.0, 7.25] {
            let a = assemble_hamiltonian(&space, &inst, 1, t).unwrap();
            let b = assemble_hamiltonian(&space, &inst, 1, d - t).unwrap();
            for ((ra, ca, va), (rb, cb, vb)) in a.triplets().zip(b.triplets()) {
                assert_eq!((ra, ca), (rb, cb));
                assert!((va - vb).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn conserves_qubit_minus_cavity_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let space = HilbertSpace::build(4, 2).unwrap();
        let inst = instance(4, 9, Parametrization::A);
        let h = assemble_hamiltonian(&space, &inst, 0, 11.0).unwrap();
        let k: Vec<f64> = space
            .states()
            .iter()
            .map(|s| s.qubit_count() as f64 - s.cavity_count() as f64)
            .collect();
        for _ in 0..10 {
            let psi: Vec<Cplx<f64>> = (0..space.dim())
                .map(|_| cplx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let kpsi: Vec<_> = psi.iter().zip(&k).map(|(a, b)| a * b).collect();
            let mut hk = vec![czero(); space.dim()];
            let mut hpsi = vec![czero(); space.dim()];
            h.apply(&kpsi, &mut hk);
            h.apply(&psi, &mut hpsi);
            let defect = hk
                .iter()
                .zip(hpsi.iter().zip(&k))
                .map(|(a, (b, kk))| norm_sqr(a - b * kk))
                .sum::<f64>()
                .sqrt();
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn row_sparsity_bound() {
        for l in 2..=7 {
            let space = HilbertSpace::build(l, 2.min(l)).unwrap();
            let inst = instance(l, l as u64, Parametrization::A);
            let parts = HamiltonianParts::build(&space, &inst).unwrap();
            let bound = 2 * (l - 1) + (l - 2) * 2 + l + 1;
            assert!(parts.max_row_nnz() <= bound);
            let h = parts.assemble(Drive { g: 1.0, omega: 1.0 });
            assert!((0..h.dim()).all(|r| h.row_nnz(r) <= bound));
        }
    }

    #[test]
    fn generator_matches_assembled_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let space = HilbertSpace::build(4, 2).unwrap();
        let inst = instance(4, 1, Parametrization::B);
        let parts = HamiltonianParts::build(&space, &inst).unwrap();
        let drive = drive_at(&inst, 2, 9.3);
        let heff = effective_hamiltonian(&parts.assemble(drive), &space, inst.gamma_c);
        let psi: Vec<Cplx<f64>> = (0..space.dim())
            .map(|_| cplx(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut a = vec![czero(); space.dim()];
        let mut b = vec![czero(); space.dim()];
        parts.apply_generator(drive, &psi, &mut a);
        heff.apply(&psi, &mut b);
        for (x, y) in a.iter().zip(&b) {
            let expect = y * cplx(0.0, -1.0);
            assert!((x - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn effective_hamiltonian_diagonal() {
        let space = HilbertSpace::build(3, 2).unwrap();
        let inst = instance(3, 1, Parametrization::A);
        let h = HamiltonianParts::build(&space, &inst).unwrap().assemble(Drive::off());
        let same = effective_hamiltonian(&h, &space, 0.0);
        assert_eq!(same, h);
        let heff = effective_hamiltonian(&h, &space, 0.01);
        let empty = space.state_index(BasisState::new(0b010, 0)).unwrap();
        assert_eq!(heff.get(empty, empty).im, 0.0);
        let two = space.state_index(BasisState::new(0, 0b101)).unwrap();
        assert!((heff.get(two, two).im + 0.01).abs() < 1e-16);
        assert!(!heff.is_hermitian(1e-12));
    }

    #[test]
    fn hopping_spectrum() {
        assert_eq!(hopping_eigenvalues(1, 0.3f64), vec![0.0]);
        let e = hopping_eigenvalues(3, 1.0f64);
        let s2 = 2f64.sqrt();
        assert!((e[0] + s2).abs() < 1e-15 && e[1] == 0.0 && (e[2] - s2).abs() < 1e-15);
        for l in (1..20).step_by(2) {
            assert!(hopping_eigenvalues(l, 0.25f64).contains(&0.0));
        }
        for l in 1..12 {
            let e = hopping_eigenvalues(l, 0.7f64);
            assert!(e.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn hopping_spectrum_matches_diagonalization() {
        let l = 6;
        let g = 0.4f64;
        let m = nalgebra::DMatrix::<f64>::from_fn(l, l, |i, j| {
            if i.abs_diff(j) == 1 {
                -g
            } else {
                0.0
            }
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(hopping_eigenvalues(l, g)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lowering_maps() {
        let space = HilbertSpace::build(3, 2).unwrap();
        let a = LoweringMap::cavity(&space, 1);
        for &(src, dst) in &a.pairs {
            let (s, t) = (space.state(src), space.state(dst));
            assert!(s.cavity(1) && !t.cavity(1));
            assert_eq!(s.qubits, t.qubits);
        }
        let q = LoweringMap::qubit(&space, 0);
        assert_eq!(q.pairs.len(), space.dim() / 2);
    }
}
