//! Experiment drivers. Replicates run on a rayon pool; every random stream
//! is derived from the master seed and the replicate's labels, and results
//! are collected in replicate order, so output never depends on scheduling.

mod heights;
mod sweep;

pub use heights::{run_height_experiment, DumpedRun, HeightOutcome};
pub use sweep::{
    fdd_report, kingman_chain_law, run_sweep, scaling_report, DoublingRow, FddCell, FddLawRow, FddReport,
    FddTrendRow, FddTvRow, ScalingFitRow, ScalingReport, ScalingRow, SweepCell, SweepOutcome, FDD_LEAVES,
};

use rand::seq::SliceRandom;
use smc_genealogy::model::OuModelConfig;
use smc_genealogy::rng::{self, Domain};
use smc_genealogy::{
    bootstrap_model, run_smc, simulate_ou_trajectory, Ancestry, BootstrapOu, NeutralModel, Retention, RunMeta,
    Scheme, SmcConfig,
};

use crate::config::{ExperimentConfig, ModelSpec};
use crate::error::{HarnessError, Result};

/// Counts of per-path invariant checks and their failures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvariantTally {
    pub checked: u64,
    pub violations: u64,
    pub first_violation: Option<String>,
}

impl InvariantTally {
    pub fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(what());
            }
        }
    }

    pub fn merge(&mut self, other: InvariantTally) {
        self.checked += other.checked;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation;
        }
    }
}

/// A replicate whose particle system failed (e.g. all weights zero) and
/// was left out of the statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub replicate: usize,
    pub scheme: Scheme,
    pub particles: usize,
    pub reason: String,
}

pub(crate) fn run_parallel<T, F>(threads: usize, replicates: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| (0..replicates).into_par_iter().map(job).collect()))
}

/// Observation sequence of a replicate, long enough for every `N`; shorter
/// horizons use a prefix.
pub(crate) fn replicate_observations(cfg: &ExperimentConfig, replicate: usize) -> Result<Option<Vec<f64>>> {
    let Some(params) = cfg.ou_params() else {
        return Ok(None);
    };
    let seed = rng::stream_seed(cfg.seed, Domain::Observations, &[replicate as u64]);
    Ok(Some(simulate_ou_trajectory(params, cfg.max_horizon(), seed)?.observations))
}

pub(crate) enum BuiltModel {
    Neutral(NeutralModel),
    Ou(BootstrapOu),
}

impl BuiltModel {
    pub(crate) fn new(cfg: &ExperimentConfig, particles: usize, observations: Option<&[f64]>) -> Result<Self> {
        let horizon = cfg.horizon(particles);
        Ok(match (cfg.model, observations) {
            (ModelSpec::Neutral, _) => BuiltModel::Neutral(NeutralModel::new(horizon)?),
            (ModelSpec::Ou { .. }, Some(obs)) => BuiltModel::Ou(bootstrap_model(
                OuModelConfig {
                    params: cfg.ou_params().expect("ou model"),
                    observations: obs[..=horizon].to_vec(),
                },
                horizon,
            )?),
            (ModelSpec::Ou { .. }, None) => unreachable!("observations are simulated for the ou model"),
        })
    }

    /// Ancestry, metadata and ESS path of one run.
    pub(crate) fn run(
        &self,
        config: &SmcConfig,
        seed: u64,
    ) -> smc_genealogy::Result<(Ancestry, RunMeta, Vec<f64>)> {
        fn split<S>(h: smc_genealogy::ParticleHistory<S>) -> (Ancestry, RunMeta, Vec<f64>) {
            let meta = h.meta().clone();
            let ess = h.ess().to_vec();
            (h.into_ancestry(), meta, ess)
        }
        match self {
            BuiltModel::Neutral(m) => run_smc(m, config, seed).map(split),
            BuiltModel::Ou(m) => run_smc(m, config, seed).map(split),
        }
    }

    pub(crate) fn observations(&self) -> Option<&[f64]> {
        match self {
            BuiltModel::Neutral(_) => None,
            BuiltModel::Ou(m) => Some(m.observations()),
        }
    }
}

pub(crate) fn smc_config(cfg: &ExperimentConfig, particles: usize, scheme: Scheme) -> SmcConfig {
    SmcConfig::new(particles, scheme)
        .with_permute(cfg.permute)
        .with_retention(Retention::AncestorsOnly)
}

/// The SMC seed of `(N, replicate)`, shared by every scheme.
pub(crate) fn smc_seed(cfg: &ExperimentConfig, particles: usize, replicate: usize) -> u64 {
    rng::stream_seed(cfg.seed, Domain::Smc, &[particles as u64, replicate as u64])
}

/// A uniformly random ordering of the final particles; a leaf set of size
/// `n` is its first `n` entries, so leaf sets are nested in `n`.
pub(crate) fn leaf_order(cfg: &ExperimentConfig, particles: usize, replicate: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..particles).collect();
    order.shuffle(&mut rng::stream(cfg.seed, Domain::Leaves, &[particles as u64, replicate as u64]));
    order
}
