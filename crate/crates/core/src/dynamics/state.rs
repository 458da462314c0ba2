use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, OutputDistribution};
use crate::scalar::{cplx, czero, norm_sqr, Cplx, Real};

/// Pure state over a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    pub amps: Vec<Cplx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(amps: Vec<Cplx<T>>) -> Self {
        Self { amps }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![czero(); dim];
        amps[index] = cplx(T::one(), T::zero());
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|&a| norm_sqr(a)).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::NumericalIntegrity(format!("cannot normalize state with norm² {n}")));
        }
        let s = T::one() / n.sqrt();
        for a in &mut self.amps {
            *a *= s;
        }
        Ok(())
    }

    pub fn normalized(&self) -> Result<Self> {
        let mut out = self.clone();
        out.normalize()?;
        Ok(out)
    }

    /// `|ψ_k|²` for each basis state.
    pub fn weights(&self) -> Vec<T> {
        self.amps.iter().map(|&a| norm_sqr(a)).collect()
    }

    /// `⟨ψ|D|ψ⟩ / ⟨ψ|ψ⟩` for a diagonal observable.
    pub fn expectation_diag(&self, diag: &[T]) -> T {
        let num: T = self.amps.iter().zip(diag).map(|(&a, &d)| norm_sqr(a) * d).sum();
        num / self.norm_sqr()
    }

    pub fn qubit_distribution(&self, space: &HilbertSpace) -> Result<OutputDistribution<T>> {
        let n = self.norm_sqr();
        let w: Vec<T> = self.amps.iter().map(|&a| norm_sqr(a) / n).collect();
        space.qubit_marginal(&w)
    }

    pub fn inner(&self, other: &Self) -> Cplx<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * b)
    }
}

/// Dense density matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    dim: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Largest dimension stored densely (1 GiB of `f64` complex entries).
    pub const MAX_DIM: usize = 8192;

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim > Self::MAX_DIM {
            return Err(Error::Capacity(format!(
                "dense {dim}×{dim} density matrix exceeds the {} limit",
                Self::MAX_DIM
            )));
        }
        Ok(Self {
            dim,
            data: vec![czero(); dim * dim],
        })
    }

    pub fn from_data(dim: usize, data: Vec<Cplx<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Argument(format!("{} entries for dim {dim}", data.len())));
        }
        Ok(Self { dim, data })
    }

    /// `|ψ⟩⟨ψ|` for the normalized version of `psi`.
    pub fn from_pure(psi: &StateVector<T>) -> Result<Self> {
        let mut rho = Self::zeros(psi.dim())?;
        rho.add_projector(&psi.normalized()?, T::one());
        Ok(rho)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Cplx<T> {
        self.data[r * self.dim + c]
    }

    /// `ρ += w |ψ⟩⟨ψ|` (no normalization of ψ).
    pub fn add_projector(&mut self, psi: &StateVector<T>, w: T) {
        let n = self.dim;
        for r in 0..n {
            let a = psi.amps[r] * w;
            if a == czero() {
                continue;
            }
            let row = &mut self.data[r * n..(r + 1) * n];
            for (dst, b) in row.iter_mut().zip(&psi.amps) {
                *dst += a * b.conj();
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn purity(&self) -> T {
        // Tr ρ² = Σ_rc |ρ_rc|² for Hermitian ρ
        self.data.iter().map(|&z| norm_sqr(z)).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn expectation_diag(&self, diag: &[T]) -> T {
        (0..self.dim).map(|i| self.get(i, i).re * diag[i]).sum()
    }

    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn qubit_distribution(&self, space: &HilbertSpace) -> Result<OutputDistribution<T>> {
        let tr = self.trace();
        let w: Vec<T> = self.diagonal().into_iter().map(|x| x / tr).collect();
        space.qubit_marginal(&w)
    }

    /// Copy promoted to a double-precision nalgebra matrix.
    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| {
            let z = self.get(r, c);
            Complex64::new(z.re.as_f64(), z.im.as_f64())
        })
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_nalgebra();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerances.
    pub fn check(&self, herm_tol: f64, trace_tol: f64, eig_tol: f64) -> Result<()> {
        let herm = self.hermiticity_defect().as_f64();
        if herm > herm_tol {
            return Err(Error::NumericalIntegrity(format!("hermiticity defect {herm:e}")));
        }
        let tr = self.trace().as_f64();
        if (tr - 1.0).abs() > trace_tol {
            return Err(Error::NumericalIntegrity(format!("trace {tr}")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -eig_tol {
            return Err(Error::NumericalIntegrity(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }
}
