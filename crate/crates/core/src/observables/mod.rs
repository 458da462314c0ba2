//! Statistics computed from density matrices, trajectory sets and output distributions.

mod distributions;
mod negativity;
mod series;

pub use distributions::{
    abs_distance, fidelity, heavy_fraction, ipr, kl_divergence, kl_from_porter_thomas,
    kl_from_porter_thomas_with, porter_thomas_rank_reference, wiur, PtEstimator,
    ReferenceDistribution, ReferenceKind,
};
pub use negativity::{
    conditioned_negativity, jump_histogram, max_negativity, max_qubit_negativity, negativity,
    pure_negativity, qubit_negativity, ModeLabel, Partition,
};
pub use series::{mean_se, number_series_oracle, number_series_trajectories, NumberPoint};
