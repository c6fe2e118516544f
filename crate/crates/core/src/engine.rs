//! The particle system driver.
//!
//! Generation 0 is drawn from the initial law and weighted by `g_0`; every
//! later generation resamples ancestors from the current weights,
//! propagates each child from its parent's state and reweights with
//! `g_{t+1}(parent, child)`. Weights are normalised from log-potentials with
//! a max shift. Resampling happens at every generation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::StateSpaceModel;
use crate::resampling::{AncestorVector, PermutePolicy, Resampler, Scheme, WeightVector};
use crate::rng::{self, RNG_ALGORITHM};

/// What a run keeps besides the ancestor matrix and ESS series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retention {
    /// States and weights of every generation.
    #[default]
    Full,
    /// Only the final generation's states and weights.
    AncestorsOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcConfig {
    pub particles: usize,
    pub scheme: Scheme,
    pub permute: PermutePolicy,
    pub retention: Retention,
}

impl SmcConfig {
    pub fn new(particles: usize, scheme: Scheme) -> Self {
        Self {
            particles,
            scheme,
            permute: PermutePolicy::Auto,
            retention: Retention::Full,
        }
    }

    pub fn with_permute(mut self, permute: PermutePolicy) -> Self {
        self.permute = permute;
        self
    }

    pub fn with_retention(mut self, retention: Retention) -> Self {
        self.retention = retention;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub particles: usize,
    pub horizon: usize,
    pub scheme: Scheme,
    pub permuted: bool,
    pub seed: Option<u64>,
    pub model: String,
    pub rng: &'static str,
}

/// Ancestor indices of a run: row `t` (forward time, `0..T`) holds
/// `a_t`, mapping generation `t + 1` children to generation `t` parents.
///
/// Genealogies run in reverse time: reverse generation `r` (`1..=T`) is the
/// resampling step from forward generation `T - r` to `T - r + 1`, so
/// reverse generation 0 is the final particle population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ancestry {
    particles: usize,
    horizon: usize,
    parents: Vec<u32>,
}

impl Ancestry {
    pub(crate) fn with_capacity(particles: usize, horizon: usize) -> Self {
        Self {
            particles,
            horizon: 0,
            parents: Vec::with_capacity(particles * horizon),
        }
    }

    pub(crate) fn push(&mut self, row: &[u32]) {
        debug_assert_eq!(row.len(), self.particles);
        self.parents.extend_from_slice(row);
        self.horizon += 1;
    }

    /// Builds an ancestry from forward-time rows `a_0, ..., a_{T-1}`.
    pub fn from_rows(rows: &[AncestorVector]) -> Result<Self> {
        let particles = rows.first().map(AncestorVector::len).ok_or_else(|| Error::input("no ancestor rows"))?;
        let mut ancestry = Self::with_capacity(particles, rows.len());
        for (t, row) in rows.iter().enumerate() {
            if row.len() != particles {
                return Err(Error::input(alloc::format!(
                    "row {t} has {} entries, expected {particles}",
                    row.len()
                )));
            }
            ancestry.push(row.as_slice());
        }
        Ok(ancestry)
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Number of resampling steps `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `a_t` in forward time, `t < T`.
    pub fn forward(&self, t: usize) -> &[u32] {
        &self.parents[t * self.particles..(t + 1) * self.particles]
    }

    /// Parents at reverse generation `r` (`1..=T`) of the particles at
    /// reverse generation `r - 1`.
    pub fn reverse(&self, r: usize) -> &[u32] {
        assert!(r >= 1 && r <= self.horizon, "reverse generation {r} outside 1..={}", self.horizon);
        self.forward(self.horizon - r)
    }
}

/// Output of [`run_smc`].
#[derive(Debug, Clone)]
pub struct ParticleHistory<S> {
    meta: RunMeta,
    ancestry: Ancestry,
    retention: Retention,
    /// Flat `(generations kept) x N`.
    states: Vec<S>,
    weights: Vec<f64>,
    ess: Vec<f64>,
}

impl<S> ParticleHistory<S> {
    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn ancestry(&self) -> &Ancestry {
        &self.ancestry
    }

    pub fn into_ancestry(self) -> Ancestry {
        self.ancestry
    }

    pub fn retention(&self) -> Retention {
        self.retention
    }

    pub fn particles(&self) -> usize {
        self.meta.particles
    }

    pub fn horizon(&self) -> usize {
        self.meta.horizon
    }

    fn row_of(&self, t: usize) -> Option<usize> {
        match self.retention {
            Retention::Full if t <= self.horizon() => Some(t),
            Retention::AncestorsOnly if t == self.horizon() => Some(0),
            _ => None,
        }
    }

    /// Weights of forward generation `t`, if retained.
    pub fn weights(&self, t: usize) -> Option<&[f64]> {
        let n = self.particles();
        self.row_of(t).map(|row| &self.weights[row * n..(row + 1) * n])
    }

    pub fn states(&self, t: usize) -> Option<&[S]> {
        let n = self.particles();
        self.row_of(t).map(|row| &self.states[row * n..(row + 1) * n])
    }

    pub fn final_weights(&self) -> &[f64] {
        self.weights(self.horizon()).expect("final generation is always retained")
    }

    pub fn final_states(&self) -> &[S] {
        self.states(self.horizon()).expect("final generation is always retained")
    }

    /// Effective sample size of every forward generation `0..=T`.
    pub fn ess(&self) -> &[f64] {
        &self.ess
    }
}

/// Effective sample size `1 / sum w_i^2`.
pub fn ess(weights: &WeightVector) -> f64 {
    ess_of(weights.as_slice())
}

fn ess_of(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Runs the particle system with a ChaCha8 stream seeded by `seed`.
pub fn run_smc<M: StateSpaceModel>(model: &M, config: &SmcConfig, seed: u64) -> Result<ParticleHistory<M::State>> {
    let mut history = run_smc_with_rng(model, config, &mut rng::seeded(seed))?;
    history.meta.seed = Some(seed);
    Ok(history)
}

/// Runs the particle system drawing from `rng`.
pub fn run_smc_with_rng<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    config: &SmcConfig,
    rng: &mut R,
) -> Result<ParticleHistory<M::State>> {
    let n = config.particles;
    let horizon = model.horizon();
    if n < 2 {
        return Err(Error::config("at least two particles are required"));
    }
    if n > u32::MAX as usize {
        return Err(Error::config("too many particles"));
    }
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let full = config.retention == Retention::Full;
    let kept = if full { horizon + 1 } else { 1 };

    let mut resampler = Resampler::new(config.scheme, config.permute);
    let mut ancestry = Ancestry::with_capacity(n, horizon);
    let mut states: Vec<M::State> = Vec::with_capacity(kept * n);
    let mut weights: Vec<f64> = Vec::with_capacity(kept * n);
    let mut ess = Vec::with_capacity(horizon + 1);

    let mut log_w = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut parents = vec![0u32; n];

    let mut current: Vec<M::State> = (0..n).map(|_| model.sample_initial(rng)).collect();
    for (lw, x) in log_w.iter_mut().zip(&current) {
        *lw = model.log_potential(0, None, x);
    }
    normalize_log_weights(&log_w, &mut w, 0)?;
    ess.push(ess_of(&w));
    if full {
        states.extend_from_slice(&current);
        weights.extend_from_slice(&w);
    }

    let mut next: Vec<M::State> = Vec::with_capacity(n);
    for t in 0..horizon {
        resampler.resample_into(&w, rng, &mut parents);
        ancestry.push(&parents);
        next.clear();
        for (&p, lw) in parents.iter().zip(log_w.iter_mut()) {
            let parent = &current[p as usize];
            let child = model.sample_transition(t + 1, parent, rng);
            *lw = model.log_potential(t + 1, Some(parent), &child);
            next.push(child);
        }
        core::mem::swap(&mut current, &mut next);
        normalize_log_weights(&log_w, &mut w, t + 1)?;
        ess.push(ess_of(&w));
        if full {
            states.extend_from_slice(&current);
            weights.extend_from_slice(&w);
        }
    }
    if !full {
        states = current;
        weights = w;
    }

    Ok(ParticleHistory {
        meta: RunMeta {
            particles: n,
            horizon,
            scheme: config.scheme,
            permuted: resampler.permutes(),
            seed: None,
            model: model.name().into(),
            rng: RNG_ALGORITHM,
        },
        ancestry,
        retention: config.retention,
        states,
        weights,
        ess,
    })
}

fn normalize_log_weights(log_w: &[f64], w: &mut [f64], generation: usize) -> Result<()> {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for (particle, &lw) in log_w.iter().enumerate() {
        if lw.is_nan() || lw == f64::INFINITY {
            return Err(Error::NonFinitePotential { generation, particle });
        }
        max = max.max(lw);
        min = min.min(lw);
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights { generation });
    }
    if min == max {
        // exp(0) = 1 for every particle, so this matches the general path bit for bit.
        w.fill(1.0 / w.len() as f64);
        return Ok(());
    }
    let mut sum = 0.0;
    for (wi, &lw) in w.iter_mut().zip(log_w) {
        *wi = libm::exp(lw - max);
        sum += *wi;
    }
    let inv = 1.0 / sum;
    w.iter_mut().for_each(|wi| *wi *= inv);
    Ok(())
}
