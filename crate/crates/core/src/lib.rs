//! Sequential Monte Carlo with genealogy tracking.
//!
//! The crate runs interacting particle systems (bootstrap particle filters
//! and neutral systems), records the ancestor indices produced by
//! resampling, and analyses the reverse-time genealogy they induce: offspring
//! counts, the pair-coalescence statistic `c_N`, the multiple-merger bound
//! `D_N`, the random time change `tau_N`, and partition-valued traces of
//! sampled leaves. The [`kingman`] module provides the exact Kingman
//! n-coalescent the rescaled genealogies are compared against, and
//! [`oracle`] contains brute-force enumerations used to validate the
//! analytic transition probabilities.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. IO, configuration and parallel experiment drivers live in the
//! companion harness crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod genealogy;
pub mod kingman;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod resampling;
pub mod rng;

pub use engine::{ess, run_smc, run_smc_with_rng, Ancestry, ParticleHistory, Retention, RunMeta, SmcConfig};
pub use error::{Error, Result};
pub use genealogy::{
    c_n_stat, d_n_stat, falling_factorial, offspring_counts, rescaled_height, time_change,
    trace_genealogy, transition_probability, tree_height, CoalescenceSeries, GenealogyTrace,
    Height, OffspringCounts,
};
pub use kingman::{
    build_generator, enumerate_partitions, height_moments, simulate_coalescent, transition_matrix,
    CoalescentRealization, GeneratorMatrix,
};
pub use matrix::SquareMatrix;
pub use model::{
    bootstrap_model, simulate_ou_trajectory, BootstrapOu, NeutralModel, OuModelConfig, OuParams,
    StateSpaceModel,
};
pub use partition::Partition;
pub use resampling::{
    permute_ancestors, resample_multinomial, resample_residual, resample_stratified,
    resample_systematic, AncestorVector, PermutePolicy, Resampler, Scheme, WeightVector,
};
