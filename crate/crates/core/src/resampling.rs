//! Resampling schemes.
//!
//! Every scheme maps normalised weights `w` of `N` particles to `N` ancestor
//! indices whose offspring counts `nu_i` sum to `N` with `E[nu_i] = N w_i`.
//!
//! * multinomial: `N` independent categorical draws (inverse CDF with a
//!   binary search over the cumulative weights).
//! * residual: `floor(N w_i)` deterministic copies of particle `i`, the
//!   remaining `R = N - sum floor(N w_i)` indices drawn multinomially from
//!   the residual weights `N w_i - floor(N w_i)`.
//! * stratified: one uniform per stratum, `u_k = (k + U_k) / N`, pushed
//!   through the inverse CDF.
//! * systematic: as stratified with a single shared offset
//!   `u_k = (k + U) / N`.
//!
//! Residual, stratified and systematic output is ordered by parent and thus
//! not exchangeable. [`Resampler`] applies a uniform random permutation to
//! the ancestor vector according to a [`PermutePolicy`], which makes the
//! ancestor vector uniform over all vectors consistent with its offspring
//! counts. A particle with weight exactly zero is never selected.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Normalised, nonnegative particle weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Allowed deviation of the input sum from one.
    pub const SUM_TOLERANCE: f64 = 1e-12;

    /// Validates weights that already sum to one (within
    /// [`Self::SUM_TOLERANCE`]) and renormalises away the residual drift.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = check_entries(&weights)?;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::input(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self::rescaled(weights, sum))
    }

    /// Normalises nonnegative weights with a positive sum.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let sum = check_entries(&weights)?;
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::input(format!("weights must have a positive finite sum, got {sum}")));
        }
        Ok(Self::rescaled(weights, sum))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "weight vector must be nonempty");
        Self(vec![1.0 / n as f64; n])
    }

    fn rescaled(mut weights: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Self(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_entries(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::input("weight vector is empty"));
    }
    if weights.len() > u32::MAX as usize {
        return Err(Error::input("too many particles"));
    }
    let mut sum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::input(format!("weight {i} is {w}; weights must be finite and nonnegative")));
        }
        sum += w;
    }
    Ok(sum)
}

/// Zero-based parent indices `a^{(i)}` of the `N` offspring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AncestorVector(Vec<u32>);

impl AncestorVector {
    /// Parents must index into a previous generation of the same size.
    pub fn new(parents: Vec<u32>) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::input("ancestor vector is empty"));
        }
        if let Some(i) = parents.iter().position(|&p| p as usize >= n) {
            return Err(Error::input(format!("parent {} of child {i} out of range 0..{n}", parents[i])));
        }
        Ok(Self(parents))
    }

    /// From the one-based convention used in exported files.
    pub fn from_one_based(parents: &[usize]) -> Result<Self> {
        let n = parents.len();
        let mut out = Vec::with_capacity(n);
        for (i, &p) in parents.iter().enumerate() {
            if p == 0 || p > n {
                return Err(Error::input(format!("one-based parent {p} of child {} out of range 1..={n}", i + 1)));
            }
            out.push((p - 1) as u32);
        }
        Ok(Self(out))
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&p| p as usize + 1).collect()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

/// Resampling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Multinomial,
    Residual,
    Stratified,
    Systematic,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Multinomial,
        Scheme::Residual,
        Scheme::Stratified,
        Scheme::Systematic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Multinomial => "multinomial",
            Scheme::Residual => "residual",
            Scheme::Stratified => "stratified",
            Scheme::Systematic => "systematic",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown resampling scheme '{s}'")))
    }
}

/// Whether to permute ancestor vectors after resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermutePolicy {
    On,
    Off,
    /// On for every scheme except multinomial, which is already
    /// exchangeable.
    #[default]
    Auto,
}

impl PermutePolicy {
    pub fn applies_to(self, scheme: Scheme) -> bool {
        match self {
            PermutePolicy::On => true,
            PermutePolicy::Off => false,
            PermutePolicy::Auto => scheme != Scheme::Multinomial,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PermutePolicy::On => "on",
            PermutePolicy::Off => "off",
            PermutePolicy::Auto => "auto",
        }
    }
}

impl fmt::Display for PermutePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PermutePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" => Ok(PermutePolicy::On),
            "off" => Ok(PermutePolicy::Off),
            "auto" => Ok(PermutePolicy::Auto),
            other => Err(Error::config(format!("unknown permutation policy '{other}'"))),
        }
    }
}

/// Reusable resampler holding scratch buffers.
#[derive(Debug, Clone)]
pub struct Resampler {
    scheme: Scheme,
    permute: bool,
    cumulative: Vec<f64>,
    residual: Vec<f64>,
}

impl Resampler {
    pub fn new(scheme: Scheme, policy: PermutePolicy) -> Self {
        Self {
            scheme,
            permute: policy.applies_to(scheme),
            cumulative: Vec::new(),
            residual: Vec::new(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn permutes(&self) -> bool {
        self.permute
    }

    /// Writes `weights.len()` ancestors into `out`. `weights` must be
    /// normalised (as produced by [`WeightVector`] or the engine).
    pub fn resample_into<R: Rng + ?Sized>(&mut self, weights: &[f64], rng: &mut R, out: &mut [u32]) {
        debug_assert_eq!(weights.len(), out.len());
        match self.scheme {
            Scheme::Multinomial => categorical_into(weights, rng, out, &mut self.cumulative),
            Scheme::Residual => residual_into(weights, rng, out, &mut self.residual, &mut self.cumulative),
            Scheme::Stratified => stratified_into(weights, rng, out, &mut self.cumulative),
            Scheme::Systematic => {
                let u: f64 = rng.random();
                systematic_into(weights, u, out, &mut self.cumulative)
            }
        }
        if self.permute {
            out.shuffle(rng);
        }
    }

    pub fn resample<R: Rng + ?Sized>(&mut self, weights: &WeightVector, rng: &mut R) -> AncestorVector {
        let mut out = vec![0; weights.len()];
        self.resample_into(weights.as_slice(), rng, &mut out);
        AncestorVector(out)
    }
}

/// Multinomial resampling: `N` i.i.d. categorical draws.
pub fn resample_multinomial<R: Rng + ?Sized>(weights: &WeightVector, rng: &mut R) -> AncestorVector {
    let mut out = vec![0; weights.len()];
    categorical_into(weights.as_slice(), rng, &mut out, &mut Vec::new());
    AncestorVector(out)
}

/// Residual resampling, unpermuted (deterministic copies first).
pub fn resample_residual<R: Rng + ?Sized>(weights: &WeightVector, rng: &mut R) -> AncestorVector {
    let mut out = vec![0; weights.len()];
    residual_into(weights.as_slice(), rng, &mut out, &mut Vec::new(), &mut Vec::new());
    AncestorVector(out)
}

/// Stratified resampling, unpermuted.
pub fn resample_stratified<R: Rng + ?Sized>(weights: &WeightVector, rng: &mut R) -> AncestorVector {
    let mut out = vec![0; weights.len()];
    stratified_into(weights.as_slice(), rng, &mut out, &mut Vec::new());
    AncestorVector(out)
}

/// Systematic resampling, unpermuted.
pub fn resample_systematic<R: Rng + ?Sized>(weights: &WeightVector, rng: &mut R) -> AncestorVector {
    systematic_from_uniform(weights, rng.random())
}

/// Systematic resampling with the shared uniform `u` in `[0, 1)` given
/// explicitly.
pub fn systematic_from_uniform(weights: &WeightVector, u: f64) -> AncestorVector {
    let mut out = vec![0; weights.len()];
    systematic_into(weights.as_slice(), u, &mut out, &mut Vec::new());
    AncestorVector(out)
}

/// Applies a uniformly random permutation `sigma` to the children:
/// returns `(a_{sigma(1)}, ..., a_{sigma(N)})`.
pub fn permute_ancestors<R: Rng + ?Sized>(ancestors: &AncestorVector, rng: &mut R) -> AncestorVector {
    let mut out = ancestors.0.clone();
    out.shuffle(rng);
    AncestorVector(out)
}

fn cumulate(weights: &[f64], cumulative: &mut Vec<f64>) -> f64 {
    cumulative.clear();
    let mut acc = 0.0;
    cumulative.extend(weights.iter().map(|&w| {
        acc += w;
        acc
    }));
    acc
}

fn last_positive(weights: &[f64]) -> usize {
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Fills `out` with i.i.d. draws from the categorical law proportional to
/// `weights` (which need not be normalised).
fn categorical_into<R: Rng + ?Sized>(weights: &[f64], rng: &mut R, out: &mut [u32], cumulative: &mut Vec<f64>) {
    let n = weights.len();
    let first = weights[0];
    if first > 0.0 && weights.iter().all(|&w| w == first) {
        for slot in out.iter_mut() {
            *slot = rng.random_range(0..n as u32);
        }
        return;
    }
    let total = cumulate(weights, cumulative);
    let last = last_positive(weights);
    for slot in out.iter_mut() {
        let u = rng.random::<f64>() * total;
        // First index whose cumulative weight exceeds u; zero-weight entries
        // share their predecessor's cumulative value and are never chosen.
        let idx = cumulative.partition_point(|&c| c <= u);
        *slot = idx.min(last) as u32;
    }
}

fn residual_into<R: Rng + ?Sized>(
    weights: &[f64],
    rng: &mut R,
    out: &mut [u32],
    residual: &mut Vec<f64>,
    cumulative: &mut Vec<f64>,
) {
    let n = weights.len();
    let nf = n as f64;
    residual.clear();
    let mut filled = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let expected = nf * w;
        let copies = (libm::floor(expected) as usize).min(n - filled);
        out[filled..filled + copies].fill(i as u32);
        filled += copies;
        residual.push((expected - copies as f64).max(0.0));
    }
    if filled < n {
        if residual.iter().all(|&r| r <= 0.0) {
            // Only reachable through rounding; fall back to the raw weights.
            residual.copy_from_slice(weights);
        }
        categorical_into(residual, rng, &mut out[filled..], cumulative);
    }
}

fn inverse_cdf_sorted(weights: &[f64], points: impl Iterator<Item = f64>, out: &mut [u32], cumulative: &mut Vec<f64>) {
    let total = cumulate(weights, cumulative);
    let last = last_positive(weights);
    let mut j = 0usize;
    for (slot, u) in out.iter_mut().zip(points) {
        let u = u * total;
        while j < last && cumulative[j] <= u {
            j += 1;
        }
        *slot = j as u32;
    }
}

fn stratified_into<R: Rng + ?Sized>(weights: &[f64], rng: &mut R, out: &mut [u32], cumulative: &mut Vec<f64>) {
    let nf = weights.len() as f64;
    let points = (0..weights.len()).map(|k| (k as f64 + rng.random::<f64>()) / nf);
    inverse_cdf_sorted(weights, points, out, cumulative);
}

fn systematic_into(weights: &[f64], u: f64, out: &mut [u32], cumulative: &mut Vec<f64>) {
    let nf = weights.len() as f64;
    let points = (0..weights.len()).map(|k| (k as f64 + u) / nf);
    inverse_cdf_sorted(weights, points, out, cumulative);
}

/// Names of all schemes, comma separated.
pub fn scheme_names() -> String {
    let mut s = String::new();
    for (i, scheme) in Scheme::ALL.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(scheme.name());
    }
    s
}
