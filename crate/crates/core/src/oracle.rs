//! Brute-force counterparts of the analytic formulas, for tiny sizes.
//!
//! Given offspring counts, the ancestor vector is uniform over all vectors
//! consistent with them. The oracle lists those vectors and counts how often
//! the designated child slots (slot `k` carries block `k` of `xi`) fall into
//! the parent pattern of `eta`. Exchangeability makes the choice of slots
//! irrelevant.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::genealogy::{transition_probability, OffspringCounts};
use crate::partition::{self, Partition};
use crate::resampling::AncestorVector;

/// Largest `N` the oracle enumerates.
pub const MAX_PARTICLES: usize = 6;
/// Largest `|xi|` for [`brute_force_transition`].
pub const MAX_BLOCKS: usize = 4;

/// One analytic-versus-brute-force comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationReport {
    pub case: String,
    pub analytic: f64,
    pub brute_force: f64,
    pub abs_diff: f64,
    /// Monte Carlo standard error of `brute_force`, when it is an estimate.
    pub std_error: Option<f64>,
}

impl EnumerationReport {
    pub fn exact(case: String, analytic: f64, brute_force: f64) -> Self {
        Self {
            case,
            analytic,
            brute_force,
            abs_diff: (analytic - brute_force).abs(),
            std_error: None,
        }
    }

    /// `abs_diff / std_error`, or `None` for exact comparisons.
    pub fn standardized_error(&self) -> Option<f64> {
        self.std_error.map(|se| if se > 0.0 { self.abs_diff / se } else if self.abs_diff == 0.0 { 0.0 } else { f64::INFINITY })
    }
}

fn guard_particles(n: usize) -> Result<()> {
    if n > MAX_PARTICLES {
        return Err(Error::SizeGuard {
            what: "N",
            value: n,
            max: MAX_PARTICLES,
        });
    }
    Ok(())
}

/// `N! / prod_i nu_i!`.
pub fn multinomial_coefficient(counts: &[u32]) -> u128 {
    let mut result: u128 = 1;
    let mut placed: u128 = 0;
    for &c in counts {
        for k in 1..=c as u128 {
            placed += 1;
            result = result * placed / k;
        }
    }
    result
}

/// Every ancestor vector whose offspring counts equal `counts`, in
/// lexicographic order.
pub fn enumerate_consistent_ancestors(counts: &OffspringCounts) -> Result<Vec<AncestorVector>> {
    let n = counts.particles();
    guard_particles(n)?;
    let mut remaining = counts.as_slice().to_vec();
    let mut prefix = Vec::with_capacity(n);
    let mut out = Vec::new();
    fill(&mut remaining, &mut prefix, n, &mut out);
    Ok(out)
}

fn fill(remaining: &mut [u32], prefix: &mut Vec<u32>, n: usize, out: &mut Vec<AncestorVector>) {
    if prefix.len() == n {
        out.push(AncestorVector::new(prefix.clone()).expect("parents are in range"));
        return;
    }
    for parent in 0..remaining.len() {
        if remaining[parent] > 0 {
            remaining[parent] -= 1;
            prefix.push(parent as u32);
            fill(remaining, prefix, n, out);
            prefix.pop();
            remaining[parent] += 1;
        }
    }
}

/// Fraction of consistent ancestor vectors under which the lineages of
/// `from` (block `k` in child slot `k`) group exactly as `to`.
pub fn brute_force_transition(counts: &OffspringCounts, from: &Partition, to: &Partition) -> Result<f64> {
    let n = counts.particles();
    guard_particles(n)?;
    let blocks = from.num_blocks();
    if blocks > MAX_BLOCKS {
        return Err(Error::SizeGuard {
            what: "|xi|",
            value: blocks,
            max: MAX_BLOCKS,
        });
    }
    if blocks > n {
        return Err(Error::input(format!("{blocks} lineages exceed {n} particles")));
    }
    if from.n() != to.n() {
        return Err(Error::input("partitions are over different leaf sets"));
    }
    let vectors = enumerate_consistent_ancestors(counts)?;
    let mut hits = 0usize;
    let mut leaf_parent = vec![0u32; from.n()];
    for a in &vectors {
        for (slot, &block) in leaf_parent.iter_mut().zip(from.labels()) {
            *slot = a.as_slice()[block as usize];
        }
        if Partition::from_labels(&leaf_parent) == *to {
            hits += 1;
        }
    }
    Ok(hits as f64 / vectors.len() as f64)
}

/// All offspring-count vectors of length `n` summing to `n`.
pub fn compositions(n: usize) -> Vec<OffspringCounts> {
    fn extend(prefix: &mut Vec<u32>, left: u32, n: usize, out: &mut Vec<OffspringCounts>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            out.push(OffspringCounts::new(prefix.clone()).expect("sums to n"));
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            extend(prefix, left - c, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        extend(&mut Vec::with_capacity(n), n as u32, n, &mut out);
    }
    out
}

/// Compares the analytic transition probability with enumeration for every
/// `N <= max_particles`, every composition of `N`, every `xi` over
/// `n <= max_blocks` leaves with `|xi| <= min(N, max_blocks)`, and every `eta`
/// over the same leaves. Also returns, per `(nu, xi)`, the analytic row sum.
pub fn transition_sweep(max_particles: usize, max_blocks: usize) -> Result<(Vec<EnumerationReport>, Vec<f64>)> {
    guard_particles(max_particles)?;
    let mut reports = Vec::new();
    let mut row_sums = Vec::new();
    for n_particles in 1..=max_particles {
        for nu in compositions(n_particles) {
            for leaves in 1..=max_blocks {
                let states = partition::enumerate(leaves);
                for xi in states.iter().filter(|xi| xi.num_blocks() <= n_particles) {
                    let mut row = 0.0;
                    for eta in &states {
                        let analytic = transition_probability(&nu, xi, eta)?;
                        let brute = brute_force_transition(&nu, xi, eta)?;
                        row += analytic;
                        let case = format!("N={n_particles};nu={:?};xi={xi};eta={eta}", nu.as_slice());
                        reports.push(EnumerationReport::exact(case, analytic, brute));
                    }
                    row_sums.push(row);
                }
            }
        }
    }
    Ok((reports, row_sums))
}

/// Falling factorial as a float, `(x)_q`.
fn falling_f64(x: u64, q: u32) -> f64 {
    (0..q as u64).map(|k| x as f64 - k as f64).product()
}

/// `E[(X)_q]` for `X ~ Bin(N, p)` by summing over the probability mass
/// function.
pub fn binomial_falling_moment_exact(n: u64, p: f64, q: u32) -> f64 {
    let mut pmf = libm::pow(1.0 - p, n as f64);
    let mut total = 0.0;
    for x in 0..=n {
        if x > 0 {
            // pmf(x) = pmf(x-1) * (n-x+1)/x * p/(1-p), restarted if 1-p = 0.
            pmf = if p < 1.0 {
                pmf * (n - x + 1) as f64 / x as f64 * p / (1.0 - p)
            } else if x == n {
                1.0
            } else {
                0.0
            };
        }
        total += pmf * falling_f64(x, q);
    }
    total
}

/// Monte Carlo mean of `(X)_q` against `(N)_q p^q`.
pub fn verify_binomial_falling_moments<R: Rng + ?Sized>(
    n: u64,
    p: f64,
    q: u32,
    draws: usize,
    rng: &mut R,
) -> Result<EnumerationReport> {
    if !(1..=4).contains(&q) {
        return Err(Error::input(format!("moment order must be in 1..=4, got {q}")));
    }
    if draws < 2 {
        return Err(Error::input("need at least two draws"));
    }
    let binomial = Binomial::new(n, p).map_err(|e| Error::input(format!("binomial({n}, {p}): {e}")))?;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=draws {
        let x = falling_f64(binomial.sample(rng), q);
        let delta = x - mean;
        mean += delta / k as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (draws - 1) as f64;
    let analytic = falling_f64(n, q) * libm::pow(p, q as f64);
    let mut report = EnumerationReport::exact(format!("N={n};p={p};q={q};draws={draws}"), analytic, mean);
    report.std_error = Some(libm::sqrt(var / draws as f64));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genealogy::c_n_stat;

    fn counts(v: &[u32]) -> OffspringCounts {
        OffspringCounts::new(v.to_vec()).unwrap()
    }

    #[test]
    fn consistent_ancestor_counts() {
        let two = enumerate_consistent_ancestors(&counts(&[1, 1])).unwrap();
        let one_based: Vec<_> = two.iter().map(AncestorVector::to_one_based).collect();
        assert_eq!(one_based, [vec![1, 2], vec![2, 1]]);
        assert_eq!(enumerate_consistent_ancestors(&counts(&[2, 1, 0])).unwrap().len(), 3);
        assert_eq!(enumerate_consistent_ancestors(&counts(&[2, 1, 1, 0])).unwrap().len(), 12);
        assert!(matches!(
            enumerate_consistent_ancestors(&counts(&[1; 7])),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn compositions_are_complete() {
        // C(2n-1, n) weak compositions of n into n parts.
        assert_eq!(compositions(1).len(), 1);
        assert_eq!(compositions(3).len(), 10);
        assert_eq!(compositions(5).len(), 126);
        for nu in compositions(5) {
            assert_eq!(
                enumerate_consistent_ancestors(&nu).unwrap().len() as u128,
                multinomial_coefficient(nu.as_slice())
            );
        }
    }

    #[test]
    fn brute_force_examples() {
        let xi = Partition::singletons(2);
        let merged = Partition::single_block(2);
        let nu = counts(&[2, 1, 1, 0]);
        assert!((brute_force_transition(&nu, &xi, &merged).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(brute_force_transition(&counts(&[1; 4]), &Partition::singletons(3), &Partition::singletons(3)), Ok(1.0));
        for nu in compositions(4) {
            assert_eq!(brute_force_transition(&nu, &xi, &merged).unwrap(), c_n_stat(&nu).unwrap());
        }
    }

    #[test]
    fn small_sweep_agrees() {
        let (reports, rows) = transition_sweep(4, 3).unwrap();
        assert!(reports.iter().all(|r| r.abs_diff <= 1e-12));
        assert!(rows.iter().all(|s| (s - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn binomial_moments() {
        assert!((binomial_falling_moment_exact(10, 0.3, 2) - 8.1).abs() < 1e-12);
        assert!((binomial_falling_moment_exact(7, 0.4, 1) - 2.8).abs() < 1e-12);
        assert_eq!(binomial_falling_moment_exact(5, 1.0, 3), 60.0);
        let mut rng = crate::rng::seeded(5);
        let r = verify_binomial_falling_moments(10, 0.3, 2, 20_000, &mut rng).unwrap();
        assert!((r.analytic - 8.1).abs() < 1e-12);
        assert!(r.standardized_error().unwrap() < 5.0);
        let zero = verify_binomial_falling_moments(10, 0.0, 3, 100, &mut rng).unwrap();
        assert_eq!((zero.analytic, zero.brute_force), (0.0, 0.0));
        assert!(verify_binomial_falling_moments(10, 0.3, 5, 100, &mut rng).is_err());
    }
}
