//! Reverse-time genealogies of a particle system.
//!
//! Reverse generation 0 is the final population. Reverse generation `r`
//! (`1..=T`) has offspring counts `nu_r` computed from the ancestor row
//! that produced generation `r - 1`. From the counts we get the pair
//! coalescence probability
//!
//! ```text
//! c_N(r) = sum_i (nu_i)_2 / (N)_2
//! ```
//!
//! the multiple-merger bound
//!
//! ```text
//! D_N(r) = 1 / (N (N)_2) * sum_i (nu_i)_2 (nu_i + 1/N sum_{j != i} nu_j^2)
//! ```
//!
//! and the time change `tau_N(t) = min { s >= 1 : c_N(1) + ... + c_N(s) >= t }`
//! that rescales generations to coalescent time.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::Ancestry;
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::partition::Partition;
use crate::resampling::AncestorVector;

/// Largest `|xi|` accepted by [`transition_probability`].
pub const MAX_TRANSITION_BLOCKS: usize = 6;

/// Offspring counts `nu_i` of one generation; they sum to `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OffspringCounts(Vec<u32>);

impl OffspringCounts {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if counts.is_empty() || total != counts.len() as u64 {
            return Err(Error::input(format!(
                "offspring counts sum to {total}, expected {}",
                counts.len()
            )));
        }
        Ok(Self(counts))
    }

    pub fn from_ancestors(ancestors: &AncestorVector) -> Self {
        let mut counts = vec![0; ancestors.len()];
        count_offspring(ancestors.as_slice(), &mut counts);
        Self(counts)
    }

    /// Number of particles `N`.
    pub fn particles(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

/// `nu_i = #{ j : a_j = i }`.
pub fn offspring_counts(ancestors: &AncestorVector) -> OffspringCounts {
    OffspringCounts::from_ancestors(ancestors)
}

/// Writes the offspring counts of `parents` into `counts` (length `N`).
pub fn count_offspring(parents: &[u32], counts: &mut [u32]) {
    counts.fill(0);
    for &p in parents {
        counts[p as usize] += 1;
    }
}

/// Falling factorial `(x)_b = x (x - 1) ... (x - b + 1)`, with `(x)_0 = 1`.
pub fn falling_factorial(x: i64, b: i64) -> Result<i64> {
    if b < 0 {
        return Err(Error::input(format!("falling factorial order must be nonnegative, got {b}")));
    }
    let mut acc: i64 = 1;
    for k in 0..b {
        let term = x.checked_sub(k).ok_or(Error::Overflow("falling factorial"))?;
        if term == 0 {
            return Ok(0);
        }
        acc = acc.checked_mul(term).ok_or(Error::Overflow("falling factorial"))?;
    }
    Ok(acc)
}

fn falling_u128(x: u64, b: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for k in 0..b as u64 {
        if k >= x {
            return Some(0);
        }
        acc = acc.checked_mul((x - k) as u128)?;
    }
    Some(acc)
}

fn check_counts_for_stats(counts: &OffspringCounts) -> Result<()> {
    if counts.particles() < 2 {
        return Err(Error::input("c_N and D_N need at least two particles"));
    }
    Ok(())
}

/// Pair coalescence probability `c_N`.
pub fn c_n_stat(counts: &OffspringCounts) -> Result<f64> {
    check_counts_for_stats(counts)?;
    Ok(coalescence_stats(counts.as_slice()).0)
}

/// Multiple-merger bound `D_N`.
pub fn d_n_stat(counts: &OffspringCounts) -> Result<f64> {
    check_counts_for_stats(counts)?;
    Ok(coalescence_stats(counts.as_slice()).1)
}

/// `(c_N, D_N)` for counts summing to `N >= 2`. Integer sums are exact; each
/// statistic is one integer (or integer ratio) divided by a normaliser.
pub(crate) fn coalescence_stats(counts: &[u32]) -> (f64, f64) {
    let n = counts.len() as u64;
    let mut pairs: u64 = 0;
    let mut squares: u64 = 0;
    for &c in counts {
        let c = c as u64;
        pairs += c * c.saturating_sub(1);
        squares += c * c;
    }
    // sum_i (nu_i)_2 (N nu_i + sum_{j != i} nu_j^2), all integers.
    let mut weighted: u128 = 0;
    if pairs > 0 {
        for &c in counts {
            let c = c as u64;
            if c >= 2 {
                weighted += (c * (c - 1)) as u128 * (n * c + squares - c * c) as u128;
            }
        }
    }
    let falling2 = (n * (n - 1)) as f64;
    let c_n = pairs as f64 / falling2;
    let d_n = weighted as f64 / ((n * n) as f64 * falling2);
    (c_n, d_n)
}

/// `c_N`, `D_N` and the cumulative sum `C(r) = c_N(1) + ... + c_N(r)` for
/// reverse generations `r = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceSeries {
    c: Vec<f64>,
    d: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CoalescenceSeries {
    /// Series from explicit values; `c[r - 1]` is `c_N(r)`.
    pub fn new(c: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if c.len() != d.len() {
            return Err(Error::input("c_N and D_N series differ in length"));
        }
        for (r, (&cr, &dr)) in c.iter().zip(&d).enumerate() {
            if !(0.0 <= dr && dr <= cr && cr <= 1.0) {
                return Err(Error::input(format!(
                    "generation {}: need 0 <= D_N ({dr}) <= c_N ({cr}) <= 1",
                    r + 1
                )));
            }
        }
        Ok(Self::from_parts(c, d))
    }

    fn from_parts(c: Vec<f64>, d: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = c
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        Self { c, d, cumulative }
    }

    /// Series of a whole run, in reverse time.
    pub fn from_ancestry(ancestry: &Ancestry) -> Self {
        let n = ancestry.particles();
        let horizon = ancestry.horizon();
        let mut counts = vec![0u32; n];
        let mut c = Vec::with_capacity(horizon);
        let mut d = Vec::with_capacity(horizon);
        for r in 1..=horizon {
            count_offspring(ancestry.reverse(r), &mut counts);
            let (cr, dr) = coalescence_stats(&counts);
            c.push(cr);
            d.push(dr);
        }
        Self::from_parts(c, d)
    }

    pub fn from_counts(counts: &[OffspringCounts]) -> Result<Self> {
        let mut c = Vec::with_capacity(counts.len());
        let mut d = Vec::with_capacity(counts.len());
        for nu in counts {
            c.push(c_n_stat(nu)?);
            d.push(d_n_stat(nu)?);
        }
        Ok(Self::from_parts(c, d))
    }

    /// Number of reverse generations `T`.
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `c_N(r)`, `r` in `1..=T`.
    pub fn c(&self, r: usize) -> f64 {
        self.c[r - 1]
    }

    pub fn d(&self, r: usize) -> f64 {
        self.d[r - 1]
    }

    pub fn c_values(&self) -> &[f64] {
        &self.c
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d
    }

    /// `C(r)` with `C(0) = 0`.
    pub fn cumulative(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.cumulative[r - 1]
        }
    }

    /// `C(T)`.
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Generations violating `0 <= D_N <= c_N <= 1`, or where `C` decreases.
    pub fn invariant_violations(&self) -> usize {
        let bounds = self
            .c
            .iter()
            .zip(&self.d)
            .filter(|(&c, &d)| !(0.0 <= d && d <= c && c <= 1.0))
            .count();
        let monotone = self.cumulative.windows(2).filter(|w| w[1] < w[0]).count();
        bounds + monotone
    }
}

/// Random time change `tau_N(t)`: the first reverse generation `s >= 1`
/// with `C(s) >= t`.
pub fn time_change(series: &CoalescenceSeries, t: f64) -> Result<usize> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::input(format!("time change needs a positive finite time, got {t}")));
    }
    let s = series.cumulative.partition_point(|&c| c < t);
    if s == series.len() {
        return Err(Error::HorizonExhausted {
            target: t,
            achieved: series.total(),
        });
    }
    Ok(s + 1)
}

/// Checks `t <= C(tau) < t + 1`.
pub fn time_change_sandwich_holds(series: &CoalescenceSeries, t: f64, tau: usize) -> bool {
    let c = series.cumulative(tau);
    t <= c && c < t + 1.0
}

/// Partition-valued genealogy of `n` sampled leaves.
///
/// Only the generations where the partition changes are stored; the trace
/// stops at the most recent common ancestor (MRCA) or at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct GenealogyTrace {
    horizon: usize,
    events: Vec<(usize, Partition)>,
    mrca: Option<usize>,
}

impl GenealogyTrace {
    /// Number of leaves `n`.
    pub fn leaves(&self) -> usize {
        self.events[0].1.n()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Reverse generation at which all leaves first share an ancestor.
    pub fn mrca(&self) -> Option<usize> {
        self.mrca
    }

    /// `(generation, partition)` at every change, starting with
    /// `(0, singletons)`.
    pub fn events(&self) -> &[(usize, Partition)] {
        &self.events
    }

    /// `G_r`. After the MRCA the single block persists; beyond an unreached
    /// horizon the state is unknown.
    pub fn partition_at(&self, generation: usize) -> Option<&Partition> {
        if self.mrca.is_none() && generation > self.horizon {
            return None;
        }
        let idx = self.events.partition_point(|(g, _)| *g <= generation);
        Some(&self.events[idx - 1].1)
    }

    pub fn num_blocks_at(&self, generation: usize) -> Option<usize> {
        self.partition_at(generation).map(Partition::num_blocks)
    }

    /// Each stored partition coarsens its predecessor with strictly fewer
    /// blocks, and the first is the singleton partition.
    pub fn is_monotone(&self) -> bool {
        self.events[0].0 == 0
            && self.events[0].1.is_singletons()
            && self.events.windows(2).all(|w| {
                w[0].0 < w[1].0 && w[1].1.num_blocks() < w[0].1.num_blocks() && w[1].1.is_coarsening_of(&w[0].1)
            })
    }
}

/// Traces the leaves (zero-based particle indices of the final generation)
/// back through `ancestry`.
pub fn trace_genealogy(ancestry: &Ancestry, leaves: &[usize]) -> Result<GenealogyTrace> {
    let n_particles = ancestry.particles();
    let n = leaves.len();
    if n == 0 {
        return Err(Error::input("at least one leaf is required"));
    }
    if n > n_particles {
        return Err(Error::input(format!("{n} leaves exceed {n_particles} particles")));
    }
    let mut seen = vec![false; n_particles];
    for &leaf in leaves {
        if leaf >= n_particles {
            return Err(Error::input(format!("leaf {leaf} outside 0..{n_particles}")));
        }
        if core::mem::replace(&mut seen[leaf], true) {
            return Err(Error::input(format!("leaf {leaf} listed twice")));
        }
    }

    let horizon = ancestry.horizon();
    let mut events = vec![(0, Partition::singletons(n))];
    if n == 1 {
        return Ok(GenealogyTrace {
            horizon,
            events,
            mrca: Some(0),
        });
    }

    // block_ancestor[b]: particle carrying block b at the current generation.
    let mut block_ancestor: Vec<u32> = leaves.iter().map(|&l| l as u32).collect();
    let mut labels: Vec<u32> = (0..n as u32).collect();
    // owner[p] = block that claimed particle p at generation stamp[p].
    let mut owner = vec![0u32; n_particles];
    let mut stamp = vec![0u32; n_particles];
    let mut remap: Vec<u32> = Vec::with_capacity(n);
    let mut next_ancestor: Vec<u32> = Vec::with_capacity(n);
    let mut scratch = Vec::new();

    for r in 1..=horizon {
        let parents = ancestry.reverse(r);
        let mark = r as u32;
        remap.clear();
        next_ancestor.clear();
        for &a in &block_ancestor {
            let p = parents[a as usize];
            if stamp[p as usize] == mark {
                remap.push(owner[p as usize]);
            } else {
                stamp[p as usize] = mark;
                owner[p as usize] = next_ancestor.len() as u32;
                remap.push(next_ancestor.len() as u32);
                next_ancestor.push(p);
            }
        }
        let merged = next_ancestor.len() < block_ancestor.len();
        core::mem::swap(&mut block_ancestor, &mut next_ancestor);
        if merged {
            labels.iter_mut().for_each(|l| *l = remap[*l as usize]);
            let partition = Partition::from_dense_labels(&labels, &mut scratch, block_ancestor.len());
            events.push((r, partition));
            if block_ancestor.len() == 1 {
                return Ok(GenealogyTrace {
                    horizon,
                    events,
                    mrca: Some(r),
                });
            }
        }
    }
    Ok(GenealogyTrace {
        horizon,
        events,
        mrca: None,
    })
}

/// Tree height, or a censoring marker when the MRCA lies beyond the
/// recorded horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Height<T> {
    Reached(T),
    Censored { horizon: usize },
}

impl<T: Copy> Height<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Height::Reached(v) => Some(*v),
            Height::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Height::Censored { .. })
    }
}

/// Generations from the leaves to their MRCA.
pub fn tree_height(trace: &GenealogyTrace) -> Height<usize> {
    match trace.mrca {
        Some(g) => Height::Reached(g),
        None => Height::Censored { horizon: trace.horizon },
    }
}

/// Height in coalescent time units: `C(MRCA generation)`.
pub fn rescaled_height(trace: &GenealogyTrace, series: &CoalescenceSeries) -> Height<f64> {
    match trace.mrca {
        Some(g) => Height::Reached(series.cumulative(g)),
        None => Height::Censored { horizon: trace.horizon },
    }
}

/// Offspring counts grouped by value: `(value, multiplicity)` for every
/// value >= 1 that occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountClasses {
    particles: u64,
    classes: Vec<(u64, u64)>,
}

impl CountClasses {
    pub fn new(counts: &OffspringCounts) -> Self {
        Self::from_slice(counts.as_slice())
    }

    pub fn from_slice(counts: &[u32]) -> Self {
        let max = counts.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0u64; max + 1];
        for &c in counts {
            hist[c as usize] += 1;
        }
        let classes = hist
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &m)| m > 0)
            .map(|(v, &m)| (v as u64, m))
            .collect();
        Self {
            particles: counts.len() as u64,
            classes,
        }
    }

    /// `sum over distinct (i_1, ..., i_m) of prod_k (nu_{i_k})_{b_k}`.
    ///
    /// Each class of particles sharing an offspring count `v` and
    /// multiplicity `M` can host any subset `S` of the tuple positions, in
    /// `(M)_{|S|}` ordered ways, contributing `prod_{k in S} (v)_{b_k}`. A
    /// subset DP over positions combines the classes exactly.
    pub fn distinct_tuple_sum(&self, b: &[usize]) -> Result<u128> {
        let m = b.len();
        let full = (1usize << m) - 1;
        let mut dp = vec![0u128; 1 << m];
        dp[0] = 1;
        let mut weight = vec![0u128; 1 << m];
        let overflow = Error::Overflow("transition probability");
        for &(v, mult) in &self.classes {
            for (s, w) in weight.iter_mut().enumerate() {
                let size = s.count_ones() as usize;
                let mut acc = falling_u128(mult, size).ok_or(overflow.clone())?;
                for (k, &bk) in b.iter().enumerate() {
                    if acc == 0 {
                        break;
                    }
                    if s & (1 << k) != 0 {
                        acc = acc
                            .checked_mul(falling_u128(v, bk).ok_or(overflow.clone())?)
                            .ok_or(overflow.clone())?;
                    }
                }
                *w = acc;
            }
            let mut next = dp.clone();
            for mask in 0..=full {
                let base = dp[mask];
                if base == 0 {
                    continue;
                }
                let free = full ^ mask;
                let mut s = free;
                while s != 0 {
                    if weight[s] != 0 {
                        let add = base.checked_mul(weight[s]).ok_or(overflow.clone())?;
                        next[mask | s] = next[mask | s].checked_add(add).ok_or(overflow.clone())?;
                    }
                    s = (s - 1) & free;
                }
            }
            dp = next;
        }
        Ok(dp[full])
    }

    /// Conditional probability of moving from `from` to `to` in one reverse
    /// generation; zero unless `to` coarsens `from`.
    pub fn transition_probability(&self, from: &Partition, to: &Partition) -> Result<f64> {
        let blocks = from.num_blocks();
        if from.n() != to.n() {
            return Err(Error::input("partitions are over different leaf sets"));
        }
        if blocks > self.particles as usize {
            return Err(Error::input(format!(
                "{blocks} lineages exceed {} particles",
                self.particles
            )));
        }
        if blocks > MAX_TRANSITION_BLOCKS {
            return Err(Error::SizeGuard {
                what: "|xi|",
                value: blocks,
                max: MAX_TRANSITION_BLOCKS,
            });
        }
        let Some(b) = to.merge_sizes(from) else {
            return Ok(0.0);
        };
        let numerator = self.distinct_tuple_sum(&b)?;
        let denominator = falling_u128(self.particles, blocks).ok_or(Error::Overflow("transition probability"))?;
        Ok(numerator as f64 / denominator as f64)
    }
}

/// Conditional transition probability `p_{xi eta}` of the genealogy given
/// the offspring counts of one generation:
///
/// ```text
/// p = 1 / (N)_{|xi|} * sum over distinct (i_1..i_{|eta|}) of prod_k (nu_{i_k})_{b_k}
/// ```
///
/// where `b_k` is the number of blocks of `xi` merged into block `k` of `eta`.
pub fn transition_probability(counts: &OffspringCounts, from: &Partition, to: &Partition) -> Result<f64> {
    CountClasses::new(counts).transition_probability(from, to)
}

/// `P_N` restricted to `states`: entry `(i, j)` is the probability of moving
/// from `states[i]` to `states[j]`.
pub fn conditional_transition_matrix(classes: &CountClasses, states: &[Partition]) -> Result<SquareMatrix> {
    let mut m = SquareMatrix::zeros(states.len());
    for (i, from) in states.iter().enumerate() {
        for (j, to) in states.iter().enumerate() {
            if to.num_blocks() <= from.num_blocks() {
                m[(i, j)] = classes.transition_probability(from, to)?;
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition;

    fn counts(v: &[u32]) -> OffspringCounts {
        OffspringCounts::new(v.to_vec()).unwrap()
    }

    fn ancestors(one_based: &[usize]) -> AncestorVector {
        AncestorVector::from_one_based(one_based).unwrap()
    }

    #[test]
    fn offspring_count_examples() {
        assert_eq!(offspring_counts(&ancestors(&[1, 2, 3])).as_slice(), &[1, 1, 1]);
        assert_eq!(offspring_counts(&ancestors(&[1, 1, 1])).as_slice(), &[3, 0, 0]);
        assert_eq!(offspring_counts(&ancestors(&[2, 2, 3, 1])).as_slice(), &[1, 2, 1, 0]);
        assert!(OffspringCounts::new(vec![2, 2, 0]).is_err());
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling_factorial(5, 2), Ok(20));
        assert_eq!(falling_factorial(7, 0), Ok(1));
        assert_eq!(falling_factorial(3, 4), Ok(0));
        assert_eq!(falling_factorial(-2, 2), Ok(6));
        assert!(matches!(falling_factorial(3, -1), Err(Error::Input(_))));
        assert!(matches!(falling_factorial(i64::MAX, 3), Err(Error::Overflow(_))));
    }

    #[test]
    fn coalescence_stat_examples() {
        assert_eq!(c_n_stat(&counts(&[1, 1, 1, 1])), Ok(0.0));
        assert_eq!(d_n_stat(&counts(&[1, 1, 1, 1])), Ok(0.0));
        assert_eq!(c_n_stat(&counts(&[5, 0, 0, 0, 0])), Ok(1.0));
        assert!((c_n_stat(&counts(&[2, 1, 1, 0])).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((d_n_stat(&counts(&[2, 1, 1, 0])).unwrap() - 5.0 / 48.0).abs() < 1e-15);
        assert!(c_n_stat(&counts(&[1])).is_err());
    }

    #[test]
    fn time_change_examples() {
        let n = 50;
        let c = vec![1.0 / n as f64; 200];
        let series = CoalescenceSeries::new(c, vec![0.0; 200]).unwrap();
        assert_eq!(time_change(&series, 1.0), Ok(n));
        assert_eq!(time_change(&series, 0.001), Ok(1));
        assert!(matches!(time_change(&series, 0.0), Err(Error::Input(_))));
        match time_change(&series, 5.0) {
            Err(Error::HorizonExhausted { target, achieved }) => {
                assert_eq!(target, 5.0);
                assert!((achieved - 4.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        for k in 1..300 {
            let t = k as f64 * 0.013;
            let tau = time_change(&series, t).unwrap();
            assert!(time_change_sandwich_holds(&series, t, tau));
        }
    }

    #[test]
    fn series_rejects_bad_values() {
        assert!(CoalescenceSeries::new(vec![0.1], vec![0.2]).is_err());
        assert!(CoalescenceSeries::new(vec![1.5], vec![0.0]).is_err());
    }

    #[test]
    fn single_leaf_trace() {
        let a = Ancestry::from_rows(&[ancestors(&[2, 2, 1])]).unwrap();
        let trace = trace_genealogy(&a, &[1]).unwrap();
        assert_eq!(trace.mrca(), Some(0));
        assert_eq!(tree_height(&trace), Height::Reached(0));
        assert_eq!(trace.partition_at(5).unwrap(), &Partition::singletons(1));
    }

    #[test]
    fn immediate_merger() {
        let a = Ancestry::from_rows(&[ancestors(&[1, 1, 3]), ancestors(&[3, 3, 1])]).unwrap();
        let trace = trace_genealogy(&a, &[0, 1]).unwrap();
        assert_eq!(trace.partition_at(1).unwrap().to_string(), "{1,2}");
        assert_eq!(tree_height(&trace), Height::Reached(1));
        let series = CoalescenceSeries::from_ancestry(&a);
        assert_eq!(rescaled_height(&trace, &series), Height::Reached(series.c(1)));
    }

    #[test]
    fn hand_built_trace() {
        // Forward rows a_0 = (1,1,2,3), a_1 = (2,2,2,4), a_2 = (1,2,3,4).
        // Reverse r=1 uses a_2: leaves 1..4 -> parents 1,2,3,4 (no merger).
        // r=2 uses a_1: 1,2,3,4 -> 2,2,2,4, so {1,2,3}{4}.
        // r=3 uses a_0: 2 -> 1, 4 -> 3, so still two blocks.
        let a = Ancestry::from_rows(&[
            ancestors(&[1, 1, 2, 3]),
            ancestors(&[2, 2, 2, 4]),
            ancestors(&[1, 2, 3, 4]),
        ])
        .unwrap();
        let trace = trace_genealogy(&a, &[0, 1, 2, 3]).unwrap();
        let shown: Vec<_> = (0..=3).map(|g| trace.partition_at(g).unwrap().to_string()).collect();
        assert_eq!(shown, ["{1}{2}{3}{4}", "{1}{2}{3}{4}", "{1,2,3}{4}", "{1,2,3}{4}"]);
        assert_eq!(trace.mrca(), None);
        assert_eq!(tree_height(&trace), Height::Censored { horizon: 3 });
        assert!(trace.partition_at(4).is_none());
        assert!(trace.is_monotone());

        // With a_0 = (1,1,2,1) both ancestors 2 and 4 map to 1 at r=3.
        let b = Ancestry::from_rows(&[
            ancestors(&[1, 1, 2, 1]),
            ancestors(&[2, 2, 2, 4]),
            ancestors(&[1, 2, 3, 4]),
        ])
        .unwrap();
        let trace = trace_genealogy(&b, &[0, 1, 2, 3]).unwrap();
        assert_eq!(trace.mrca(), Some(3));
        assert_eq!(trace.num_blocks_at(3), Some(1));
    }

    #[test]
    fn trace_rejects_bad_leaves() {
        let a = Ancestry::from_rows(&[ancestors(&[1, 1, 3])]).unwrap();
        assert!(trace_genealogy(&a, &[0, 3]).is_err());
        assert!(trace_genealogy(&a, &[1, 1]).is_err());
        assert!(trace_genealogy(&a, &[]).is_err());
    }

    #[test]
    fn transition_examples() {
        let xi = Partition::singletons(2);
        let merged = Partition::single_block(2);
        assert_eq!(transition_probability(&counts(&[2, 0]), &xi, &merged), Ok(1.0));
        let nu = counts(&[2, 1, 1, 0]);
        let p_merge = transition_probability(&nu, &xi, &merged).unwrap();
        let p_stay = transition_probability(&nu, &xi, &xi).unwrap();
        assert!((p_merge - 1.0 / 6.0).abs() < 1e-15);
        assert!((p_stay - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(transition_probability(&nu, &merged, &xi), Ok(0.0));
    }

    #[test]
    fn identity_counts_never_merge() {
        let nu = counts(&[1; 5]);
        for n in 1..=4 {
            for xi in partition::enumerate(n) {
                for eta in xi.coarsenings() {
                    let p = transition_probability(&nu, &xi, &eta).unwrap();
                    assert_eq!(p, if eta == xi { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn transition_guards() {
        let nu = counts(&[2, 0]);
        let three = Partition::singletons(3);
        assert!(matches!(
            transition_probability(&nu, &three, &three),
            Err(Error::Input(_))
        ));
        let big = counts(&[1; 8]);
        let seven = Partition::singletons(7);
        assert!(matches!(
            transition_probability(&big, &seven, &seven),
            Err(Error::SizeGuard { .. })
        ));
        assert!(transition_probability(&big, &Partition::singletons(2), &Partition::singletons(3)).is_err());
    }

    #[test]
    fn pair_transition_equals_c_n_on_random_counts() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(17);
        for _ in 0..200 {
            let n = rng.random_range(2..40usize);
            let parents: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
            let nu = offspring_counts(&AncestorVector::new(parents).unwrap());
            let p = transition_probability(&nu, &Partition::singletons(2), &Partition::single_block(2)).unwrap();
            assert_eq!(p, c_n_stat(&nu).unwrap());
            assert!(d_n_stat(&nu).unwrap() <= c_n_stat(&nu).unwrap());
        }
    }
}
