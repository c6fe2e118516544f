//! State-space models driving the particle system.
//!
//! A model supplies the initial law, the propagation kernel and the
//! potential (unnormalised importance weight) of each generation. Potentials
//! are reported on the log scale so that weights can be normalised with a
//! max shift; a potential of zero is `f64::NEG_INFINITY`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Initial law, kernels `K_t` and potentials `g_t` of an interacting
/// particle system.
pub trait StateSpaceModel {
    type State: Clone;

    /// Identifier recorded in run metadata.
    fn name(&self) -> &str;

    /// Number of forward steps `T`.
    fn horizon(&self) -> usize;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// Draws generation `generation` (>= 1) from `K_generation(previous, .)`.
    fn sample_transition<R: Rng + ?Sized>(
        &self,
        generation: usize,
        previous: &Self::State,
        rng: &mut R,
    ) -> Self::State;

    /// `log g_generation(parent, state)`; `parent` is `None` at generation 0.
    fn log_potential(
        &self,
        generation: usize,
        parent: Option<&Self::State>,
        state: &Self::State,
    ) -> f64;

    fn potential(&self, generation: usize, parent: Option<&Self::State>, state: &Self::State) -> f64 {
        libm::exp(self.log_potential(generation, parent, state))
    }
}

/// Neutral system: constant potential `g == 1` and no state.
///
/// All weights are uniform, so the genealogy is that of exchangeable
/// multinomial (or other) resampling of equally weighted particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeutralModel {
    horizon: usize,
}

impl NeutralModel {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        Ok(Self { horizon })
    }
}

impl StateSpaceModel for NeutralModel {
    type State = ();

    fn name(&self) -> &str {
        "neutral"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _rng: &mut R) {}

    fn sample_transition<R: Rng + ?Sized>(&self, _generation: usize, _previous: &(), _rng: &mut R) {}

    fn log_potential(&self, _generation: usize, _parent: Option<&()>, _state: &()) -> f64 {
        0.0
    }
}

/// Parameters of the discretised Ornstein-Uhlenbeck model
/// `X_{t+1} = (1 - step) X_t + sqrt(step) xi_t`, `Y_t ~ N(X_t, obs_noise^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub step_size: f64,
    /// Observation noise standard deviation.
    pub obs_noise: f64,
}

impl OuParams {
    pub fn new(step_size: f64, obs_noise: f64) -> Result<Self> {
        let params = Self { step_size, obs_noise };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config(format!(
                "step size must be positive and finite, got {}",
                self.step_size
            )));
        }
        if !(self.obs_noise > 0.0 && self.obs_noise.is_finite()) {
            return Err(Error::config(format!(
                "observation noise must be positive and finite, got {}",
                self.obs_noise
            )));
        }
        Ok(())
    }
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            obs_noise: 0.1,
        }
    }
}

/// OU parameters together with an observed sequence `y_0..y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuModelConfig {
    pub params: OuParams,
    pub observations: Vec<f64>,
}

/// Latent states and observations of one simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OuTrajectory {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

/// Simulates `horizon + 1` states and observations from the OU model.
pub fn simulate_ou_trajectory(params: OuParams, horizon: usize, seed: u64) -> Result<OuTrajectory> {
    simulate_ou_trajectory_with_rng(params, horizon, &mut rng::seeded(seed))
}

/// As [`simulate_ou_trajectory`] with a caller-supplied generator.
///
/// Draw order per generation: observation noise for `y_t`, then the
/// innovation for `x_{t+1}`.
pub fn simulate_ou_trajectory_with_rng<R: Rng + ?Sized>(
    params: OuParams,
    horizon: usize,
    rng: &mut R,
) -> Result<OuTrajectory> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let decay = 1.0 - params.step_size;
    let scale = libm::sqrt(params.step_size);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon + 1);
    let mut x: f64 = rng.sample(StandardNormal);
    for t in 0..=horizon {
        states.push(x);
        let noise: f64 = rng.sample(StandardNormal);
        observations.push(x + params.obs_noise * noise);
        if t < horizon {
            let xi: f64 = rng.sample(StandardNormal);
            x = decay * x + scale * xi;
        }
    }
    Ok(OuTrajectory { states, observations })
}

/// Bootstrap particle filter for the OU model: propagate with the model
/// dynamics, weight with the Gaussian emission density of the current
/// observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOu {
    params: OuParams,
    observations: Vec<f64>,
    decay: f64,
    innovation_scale: f64,
    log_norm: f64,
    inv_two_var: f64,
}

/// Builds the bootstrap filter for `config` over `horizon` steps.
pub fn bootstrap_model(config: OuModelConfig, horizon: usize) -> Result<BootstrapOu> {
    BootstrapOu::new(config, horizon)
}

impl BootstrapOu {
    pub fn new(config: OuModelConfig, horizon: usize) -> Result<Self> {
        let OuModelConfig { params, observations } = config;
        params.validate()?;
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if observations.len() != horizon + 1 {
            return Err(Error::config(format!(
                "expected {} observations for horizon {}, got {}",
                horizon + 1,
                horizon,
                observations.len()
            )));
        }
        if let Some(bad) = observations.iter().position(|y| !y.is_finite()) {
            return Err(Error::config(format!("observation {bad} is not finite")));
        }
        let var = params.obs_noise * params.obs_noise;
        Ok(Self {
            params,
            observations,
            decay: 1.0 - params.step_size,
            innovation_scale: libm::sqrt(params.step_size),
            log_norm: -0.5 * libm::log(2.0 * PI * var),
            inv_two_var: 1.0 / (2.0 * var),
        })
    }

    pub fn params(&self) -> OuParams {
        self.params
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// Standard normal density of the initial law.
    pub fn initial_density(x: f64) -> f64 {
        libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
    }

    /// OU transition density `p(x, x')`.
    pub fn transition_density(&self, x: f64, x_next: f64) -> f64 {
        let step = self.params.step_size;
        let d = x_next - self.decay * x;
        libm::exp(-d * d / (2.0 * step)) / libm::sqrt(2.0 * PI * step)
    }
}

impl StateSpaceModel for BootstrapOu {
    type State = f64;

    fn name(&self) -> &str {
        "ou-bootstrap"
    }

    fn horizon(&self) -> usize {
        self.observations.len() - 1
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, _generation: usize, previous: &f64, rng: &mut R) -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        self.decay * previous + self.innovation_scale * xi
    }

    // Bootstrap potential depends only on the new state and y_t.
    fn log_potential(&self, generation: usize, _parent: Option<&f64>, state: &f64) -> f64 {
        let d = self.observations[generation] - state;
        self.log_norm - d * d * self.inv_two_var
    }
}
