//! Exact Kingman n-coalescent on partitions of `[n]`.
//!
//! Each pair of blocks merges at rate 1, so from `k` blocks the next merger
//! happens after an `Exp(k(k-1)/2)` holding time.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::partition::{self, Partition};

/// Largest `n` for which partition-space matrices are built.
pub const MAX_LEAVES: usize = 6;

/// `lim E[T_n]` as `n -> infinity`.
pub const LIMIT_MEAN_HEIGHT: f64 = 2.0;

/// `lim Var[T_n] = 4 pi^2 / 3 - 12`.
pub const LIMIT_VAR_HEIGHT: f64 = 4.0 * core::f64::consts::PI * core::f64::consts::PI / 3.0 - 12.0;

const EXPM_SCALED_NORM: f64 = 0.5;
const EXPM_TAIL_TOL: f64 = 1e-12;

fn pairs(k: usize) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

fn check_leaves(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::input(alloc::format!("need at least {min} leaves, got {n}")));
    }
    if n > MAX_LEAVES {
        return Err(Error::SizeGuard {
            what: "n",
            value: n,
            max: MAX_LEAVES,
        });
    }
    Ok(())
}

/// All partitions of `[n]`, singletons first and the single block last.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    check_leaves(n, 1)?;
    Ok(partition::enumerate(n))
}

/// Generator `Q` over partitions of `[n]`, rows and columns in the order of
/// [`enumerate_partitions`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    partitions: Vec<Partition>,
    q: SquareMatrix,
}

impl GeneratorMatrix {
    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.partitions[0].n()
    }

    pub fn dim(&self) -> usize {
        self.partitions.len()
    }

    /// Row index of `p`. The enumeration is strictly decreasing, so this is
    /// a binary search.
    pub fn index_of(&self, p: &Partition) -> Option<usize> {
        self.partitions.binary_search_by(|probe| p.cmp(probe)).ok()
    }
}

/// `q_{xi eta} = 1` if `eta` merges exactly two blocks of `xi`, the diagonal
/// is `-|xi|(|xi|-1)/2`, and every other entry is zero.
pub fn build_generator(n: usize) -> Result<GeneratorMatrix> {
    check_leaves(n, 2)?;
    let partitions = partition::enumerate(n);
    let mut q = SquareMatrix::zeros(partitions.len());
    let lookup = |p: &Partition| partitions.binary_search_by(|probe| p.cmp(probe)).expect("merge stays in the enumeration");
    for (i, xi) in partitions.iter().enumerate() {
        let k = xi.num_blocks();
        if k > 1 {
            q[(i, i)] = -pairs(k);
        }
        for a in 0..k {
            for b in a + 1..k {
                q[(i, lookup(&xi.merge(a, b)))] = 1.0;
            }
        }
    }
    Ok(GeneratorMatrix { partitions, q })
}

/// `e^{Qt}` by scaling and squaring a truncated Taylor series.
pub fn transition_matrix(generator: &GeneratorMatrix, t: f64) -> Result<SquareMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::input(alloc::format!("time must be finite and nonnegative, got {t}")));
    }
    let mut p = expm(&generator.q.scaled(t));
    p.map_in_place(|x| x.clamp(0.0, 1.0));
    Ok(p)
}

fn expm(a: &SquareMatrix) -> SquareMatrix {
    let norm = a.norm_inf();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > EXPM_SCALED_NORM {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a.scaled(scale);
    let mut sum = SquareMatrix::identity(a.dim());
    let mut term = SquareMatrix::identity(a.dim());
    for k in 1..64 {
        term = term.mul(&a).scaled(1.0 / k as f64);
        sum.add_assign(&term);
        if term.norm_inf() < EXPM_TAIL_TOL {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    sum
}

/// One realisation of the n-coalescent.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescentRealization {
    /// Holding times with `n, n-1, ..., 2` blocks.
    pub waiting_times: Vec<f64>,
    /// `T_n`, the time to the most recent common ancestor.
    pub height: f64,
    /// `(jump time, partition)` starting with `(0, singletons)`.
    pub path: Vec<(f64, Partition)>,
}

impl CoalescentRealization {
    /// State at time `t >= 0`.
    pub fn partition_at(&self, t: f64) -> &Partition {
        let idx = self.path.partition_point(|(s, _)| *s <= t);
        &self.path[idx.max(1) - 1].1
    }
}

/// Simulates the n-coalescent: exponential holding times and a uniformly
/// chosen pair of blocks to merge.
pub fn simulate_coalescent<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CoalescentRealization> {
    if n == 0 {
        return Err(Error::input("need at least one leaf"));
    }
    let mut current = Partition::singletons(n);
    let mut path = Vec::with_capacity(n);
    let mut waiting_times = Vec::with_capacity(n - 1);
    let mut clock = 0.0;
    path.push((0.0, current.clone()));
    for k in (2..=n).rev() {
        let wait = holding_time(k, rng);
        clock += wait;
        waiting_times.push(wait);
        let a = rng.random_range(0..k);
        let mut b = rng.random_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        current = current.merge(a, b);
        path.push((clock, current.clone()));
    }
    Ok(CoalescentRealization {
        waiting_times,
        height: clock,
        path,
    })
}

fn holding_time<R: Rng + ?Sized>(k: usize, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / pairs(k)
}

/// `T_n` alone, without tracking the partition.
pub fn sample_height<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    (2..=n).rev().map(|k| holding_time(k, rng)).sum()
}

/// `(E[T_n], Var[T_n]) = (2(1 - 1/n), sum_{k=2}^n (k(k-1)/2)^{-2})`.
pub fn height_moments(n: usize) -> (f64, f64) {
    if n < 2 {
        return (0.0, 0.0);
    }
    let mean = 2.0 * (1.0 - 1.0 / n as f64);
    let var = (2..=n).map(|k| 1.0 / (pairs(k) * pairs(k))).sum();
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn enumeration_guards() {
        assert_eq!(enumerate_partitions(4).unwrap().len(), 15);
        assert!(enumerate_partitions(0).is_err());
        assert!(matches!(enumerate_partitions(7), Err(Error::SizeGuard { .. })));
        assert!(build_generator(1).is_err());
    }

    #[test]
    fn generator_n3() {
        let g = build_generator(3).unwrap();
        let shown: Vec<_> = g.partitions().iter().map(|p| p.to_string()).collect();
        assert_eq!(shown, ["{1}{2}{3}", "{1}{2,3}", "{1,3}{2}", "{1,2}{3}", "{1,2,3}"]);
        let q = g.matrix();
        assert_eq!(q.row(0), &[-3.0, 1.0, 1.0, 1.0, 0.0]);
        for i in 1..4 {
            assert_eq!(q[(i, i)], -1.0);
            assert_eq!(q[(i, 4)], 1.0);
        }
        assert_eq!(q.row(4), &[0.0; 5]);
        for i in 0..g.dim() {
            assert_eq!(g.index_of(&g.partitions()[i]), Some(i));
        }
    }

    #[test]
    fn generator_rows_sum_to_zero() {
        for n in 2..=MAX_LEAVES {
            let g = build_generator(n).unwrap();
            assert!(g.matrix().row_sums().iter().all(|s| s.abs() < 1e-12));
        }
    }

    #[test]
    fn two_leaf_transition_matches_closed_form() {
        let g = build_generator(2).unwrap();
        for &t in &[0.0, 0.1, 1.0, 3.0, 20.0] {
            let p = transition_matrix(&g, t).unwrap();
            assert!((p[(0, 0)] - (-t).exp()).abs() < 1e-12);
            assert!((p[(0, 1)] - (1.0 - (-t).exp())).abs() < 1e-12);
            assert_eq!(p[(1, 1)], 1.0);
        }
        assert!(transition_matrix(&g, f64::NAN).is_err());
        assert!(transition_matrix(&g, -1.0).is_err());
    }

    #[test]
    fn transition_semigroup() {
        let g = build_generator(4).unwrap();
        let a = transition_matrix(&g, 0.3).unwrap();
        let b = transition_matrix(&g, 0.7).unwrap();
        let ab = transition_matrix(&g, 1.0).unwrap();
        assert!(a.mul(&b).max_abs_diff(&ab) < 1e-12);
        assert!(ab.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn moments() {
        assert_eq!(height_moments(2), (1.0, 1.0));
        let (m, v) = height_moments(3);
        assert!((m - 4.0 / 3.0).abs() < 1e-15);
        assert!((v - 10.0 / 9.0).abs() < 1e-15);
        let (m, v) = height_moments(100_000);
        assert!((m - LIMIT_MEAN_HEIGHT).abs() < 1e-4);
        assert!((v - LIMIT_VAR_HEIGHT).abs() < 1e-4);
        assert!((LIMIT_VAR_HEIGHT - 1.159_472_534_785_811).abs() < 1e-12);
    }

    #[test]
    fn realisation_shape() {
        let mut rng = seeded(3);
        let r = simulate_coalescent(5, &mut rng).unwrap();
        assert_eq!(r.waiting_times.len(), 4);
        assert_eq!(r.path.len(), 5);
        assert!((r.height - r.waiting_times.iter().sum::<f64>()).abs() < 1e-12);
        assert!(r.partition_at(0.0).is_singletons());
        assert!(r.partition_at(r.height).is_single_block());
        for w in r.path.windows(2) {
            assert_eq!(w[1].1.num_blocks() + 1, w[0].1.num_blocks());
            assert!(w[1].1.is_coarsening_of(&w[0].1));
        }
        assert_eq!(simulate_coalescent(1, &mut rng).unwrap().height, 0.0);
    }
}
