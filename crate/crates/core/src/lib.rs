//! Translation-invariant compactification of sub-probability measures on
//! regular grids, with the numerical machinery around it: concentration and
//! peeling, Donsker-Varadhan rates, a radial Pekar solver and a Metropolis
//! sampler for Coulomb-tilted Brownian paths.

// Negated comparisons are the NaN-rejecting form of every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

mod conv;
pub mod decompose;
pub mod error;
pub mod family;
pub mod grid;
pub mod pekar;
pub mod rate;
pub mod sampler;
pub mod stats;

pub use decompose::{peel, Decomposition, PeelParams, PeelReport};
pub use error::{Error, Result};
pub use family::{
    enumerate_family, lambda_collection, lambda_measure, metric_d, pair_energy, MetricParams, MetricResult, PairKernel,
    TestFunctionSpec,
};
pub use grid::{gaussian_measure, mixture, Collection, DiscreteMeasure, GridSpec};
pub use sampler::{
    energy_h, free_energy_estimate, occupation_measure, sample_path, tilted_sampler, McReport, PathSample, TiltConfig,
};
