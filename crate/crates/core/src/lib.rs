//! Simulation of a driven hard-core photon chain coupled to lossy cavities,
//! with the statistics used to judge its output distributions.
//!
//! Kernels are generic over [`Real`] (`f32` or `f64`); the `*64` aliases below
//! fix the precision used by the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod hamiltonian;
pub mod hilbert;
pub mod observables;
pub mod protocol;
pub mod pulses;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type StateVector64 = dynamics::StateVector<f64>;
pub type DensityMatrix64 = dynamics::DensityMatrix<f64>;
pub type TrajectoryResult64 = dynamics::TrajectoryResult<f64>;
pub type OutputDistribution64 = hilbert::OutputDistribution<f64>;
pub type ProtocolInstance64 = pulses::ProtocolInstance<f64>;
pub type PhysicsParams64 = pulses::PhysicsParams<f64>;
pub type SparseOperator64 = hamiltonian::SparseOperator<f64>;
