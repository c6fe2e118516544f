//! Experiment configuration: a TOML file, optionally overridden from the
//! command line, resolved into a validated [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smc_genealogy::{OuParams, PermutePolicy, Scheme};

use crate::error::{HarnessError, Result};

/// Built-in presets, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("desk", include_str!("../../../configs/desk.toml")),
    ("paper", include_str!("../../../configs/paper.toml")),
    ("neutral", include_str!("../../../configs/neutral.toml")),
    ("ou_fdd", include_str!("../../../configs/ou_fdd.toml")),
];

/// The file as written; every field optional so CLI overrides can fill gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub particles: Option<Vec<usize>>,
    pub leaves: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub schemes: Option<Vec<String>>,
    pub permute_ancestors: Option<String>,
    pub horizon_factor: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub model: Option<RawModel>,
    pub fdd: Option<RawFdd>,
    pub output: Option<RawOutput>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub kind: Option<String>,
    pub step_size: Option<f64>,
    pub obs_noise: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFdd {
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    /// Write per-replicate genealogy traces.
    pub traces: Option<bool>,
    /// Write ancestors, observations, meta and a binary dump for replicate 0.
    pub dump_runs: Option<bool>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| HarnessError::Config(format!("unknown preset {name:?}")))?;
        Self::parse(text, Path::new(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Neutral,
    Ou {
        step_size: f64,
        obs_noise: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Neutral => "neutral",
            ModelSpec::Ou { .. } => "ou",
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Particle counts `N`, in the order given.
    pub particles: Vec<usize>,
    /// Leaf-set sizes `n`; `None` means powers of two `2, 4, ..., N` per `N`.
    pub leaves: Option<Vec<usize>>,
    pub replicates: usize,
    pub schemes: Vec<Scheme>,
    pub permute: PermutePolicy,
    /// Horizon `T = horizon_factor * N`.
    pub horizon_factor: usize,
    pub model: ModelSpec,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub fdd_times: Vec<f64>,
    pub write_traces: bool,
    pub dump_runs: bool,
}

impl ExperimentConfig {
    /// Applies defaults and validates. Warnings are returned, not printed.
    pub fn resolve(raw: RawConfig) -> Result<(Self, Vec<String>)> {
        let model_raw = raw.model.unwrap_or_default();
        let model = match model_raw.kind.as_deref().unwrap_or("ou") {
            "neutral" => ModelSpec::Neutral,
            "ou" => {
                let params = OuParams::new(
                    model_raw.step_size.unwrap_or(OuParams::default().step_size),
                    model_raw.obs_noise.unwrap_or(OuParams::default().obs_noise),
                )?;
                ModelSpec::Ou {
                    step_size: params.step_size,
                    obs_noise: params.obs_noise,
                }
            }
            other => return Err(HarnessError::Config(format!("unknown model kind {other:?}"))),
        };
        let schemes = raw
            .schemes
            .unwrap_or_else(|| Scheme::ALL.iter().map(|s| s.name().to_string()).collect())
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<Result<Vec<_>, _>>()?;
        let permute = raw.permute_ancestors.as_deref().unwrap_or("auto").parse::<PermutePolicy>()?;
        let output = raw.output.unwrap_or_default();
        let config = Self {
            seed: raw.seed.unwrap_or(0),
            particles: raw.particles.unwrap_or_else(|| vec![256]),
            leaves: raw.leaves,
            replicates: raw.replicates.unwrap_or(200),
            schemes,
            permute,
            horizon_factor: raw.horizon_factor.unwrap_or(50),
            model,
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            threads: raw.threads.unwrap_or(0),
            fdd_times: raw.fdd.and_then(|f| f.times).unwrap_or_else(|| vec![0.5, 1.0]),
            write_traces: output.traces.unwrap_or(false),
            dump_runs: output.dump_runs.unwrap_or(false),
        };
        let warnings = config.validate()?;
        Ok((config, warnings))
    }

    fn validate(&self) -> Result<Vec<String>> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.particles.is_empty() {
            return fail("particle count list is empty".into());
        }
        if let Some(&n) = self.particles.iter().find(|&&n| n < 2) {
            return fail(format!("particle count {n} is below 2"));
        }
        if self.replicates == 0 {
            return fail("replicate count must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return fail("resampling scheme list is empty".into());
        }
        if self.horizon_factor == 0 {
            return fail("horizon_factor must be at least 1".into());
        }
        if let Some(leaves) = &self.leaves {
            if leaves.is_empty() {
                return fail("leaf-size list is empty".into());
            }
            let max_n = *self.particles.iter().max().expect("nonempty");
            for &n in leaves {
                if n == 0 {
                    return fail("leaf-set size must be at least 1".into());
                }
                if n > max_n {
                    return fail(format!("leaf-set size {n} exceeds every particle count"));
                }
            }
        }
        if self.fdd_times.is_empty() {
            return fail("fdd time list is empty".into());
        }
        if self.fdd_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return fail("fdd times must be finite and nonnegative".into());
        }
        if self.fdd_times.windows(2).any(|w| w[1] <= w[0]) {
            return fail("fdd times must be strictly increasing".into());
        }

        let mut warnings = Vec::new();
        for &n_particles in &self.particles {
            let n_max = self.leaves_for(n_particles).into_iter().max().unwrap_or(1);
            let depth = 2.0 * n_particles as f64 * (1.0 - 1.0 / n_max as f64);
            let horizon = self.horizon(n_particles);
            if (horizon as f64) < 10.0 * depth {
                warnings.push(format!(
                    "N={n_particles}: horizon {horizon} is less than 10x the expected MRCA depth {depth:.0} for n={n_max}; expect censoring"
                ));
            }
        }
        Ok(warnings)
    }

    pub fn horizon(&self, particles: usize) -> usize {
        self.horizon_factor * particles
    }

    pub fn max_horizon(&self) -> usize {
        self.particles.iter().map(|&n| self.horizon(n)).max().unwrap_or(0)
    }

    /// Leaf-set sizes paired with `particles`: the configured sizes not
    /// exceeding it, or powers of two up to it.
    pub fn leaves_for(&self, particles: usize) -> Vec<usize> {
        match &self.leaves {
            Some(list) => list.iter().copied().filter(|&n| n <= particles).collect(),
            None => std::iter::successors(Some(2usize), |n| n.checked_mul(2))
                .take_while(|&n| n <= particles)
                .collect(),
        }
    }

    pub fn ou_params(&self) -> Option<OuParams> {
        match self.model {
            ModelSpec::Ou { step_size, obs_noise } => Some(OuParams { step_size, obs_noise }),
            ModelSpec::Neutral => None,
        }
    }
}
