use std::collections::hash_map::Entry;
use std::collections::HashMap;

use serde::Serialize;
use smc_genealogy::genealogy::{
    conditional_transition_matrix, count_offspring, time_change_sandwich_holds, CountClasses,
};
use smc_genealogy::kingman::{build_generator, transition_matrix, GeneratorMatrix};
use smc_genealogy::partition::tuple_label;
use smc_genealogy::{
    rescaled_height, time_change, trace_genealogy, tree_height, Ancestry, CoalescenceSeries, Error, Height,
    Partition, Scheme, SquareMatrix,
};

use super::{
    leaf_order, replicate_observations, run_parallel, smc_config, smc_seed, BuiltModel, Exclusion, InvariantTally,
};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::stats::{fit_log_log, mean_var, total_variation};

/// Leaf-set sizes the fdd comparison supports.
pub const FDD_LEAVES: std::ops::RangeInclusive<usize> = 2..=3;

/// Joint laws of `(G at tau_N(t_1), ..., G at tau_N(t_k))` accumulated over
/// replicates.
///
/// Two estimators of the same law are kept. `empirical_counts` tallies the
/// realised partitions. `conditional_sums` adds, per replicate, the exact
/// conditional law of the genealogy given that replicate's offspring
/// counts, i.e. the product of one-generation transition matrices; its
/// average has the same expectation with far smaller variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FddCell {
    pub states: Vec<Partition>,
    /// Chains of state indices `(x_1, ..., x_k)`, each a coarsening of the last.
    pub tuples: Vec<Vec<usize>>,
    pub empirical_counts: Vec<u64>,
    pub conditional_sums: Vec<f64>,
    pub used: usize,
    pub censored: usize,
}

impl FddCell {
    fn new(states: Vec<Partition>, times: usize) -> Self {
        let mut tuples: Vec<Vec<usize>> = (0..states.len()).map(|i| vec![i]).collect();
        for _ in 1..times {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    let last = &states[*t.last().expect("nonempty")];
                    (0..states.len())
                        .filter(|&j| states[j].is_coarsening_of(last))
                        .map(|j| {
                            let mut next = t.clone();
                            next.push(j);
                            next
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        let k = tuples.len();
        Self {
            states,
            tuples,
            empirical_counts: vec![0; k],
            conditional_sums: vec![0.0; k],
            used: 0,
            censored: 0,
        }
    }

    pub fn empirical(&self) -> Vec<f64> {
        self.empirical_counts.iter().map(|&c| c as f64 / self.used as f64).collect()
    }

    pub fn conditional(&self) -> Vec<f64> {
        self.conditional_sums.iter().map(|&c| c / self.used as f64).collect()
    }

    pub fn label(&self, tuple: usize) -> String {
        let parts: Vec<Partition> = self.tuples[tuple].iter().map(|&i| self.states[i].clone()).collect();
        tuple_label(&parts)
    }
}

/// Results for one `(scheme, N, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub particles: usize,
    pub n: usize,
    /// Replicates that ran (configured minus excluded).
    pub replicates: usize,
    pub excluded: usize,
    /// Heights in generations, of replicates that reached the MRCA.
    pub heights: Vec<f64>,
    /// The same heights in coalescent units.
    pub rescaled: Vec<f64>,
    pub censored_heights: usize,
    pub fdd: Option<FddCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub times: Vec<f64>,
    /// Ordered by scheme, `N`, `n`.
    pub cells: Vec<SweepCell>,
    pub exclusions: Vec<Exclusion>,
    pub invariants: InvariantTally,
}

struct FddSample {
    realized: Option<Vec<usize>>,
    conditional: Vec<f64>,
}

struct CellSample {
    height: Height<usize>,
    rescaled: Height<f64>,
    fdd: Option<FddSample>,
}

/// Runs every `(scheme, N)` for every replicate and records, for each leaf
/// size, tree heights and (when `with_fdd` and `n` is 2 or 3) the genealogy
/// at the rescaled query times.
pub fn run_sweep(cfg: &ExperimentConfig, with_fdd: bool) -> Result<SweepOutcome> {
    let mut generators: HashMap<usize, (GeneratorMatrix, Vec<Vec<usize>>)> = HashMap::new();
    if with_fdd {
        for &particles in &cfg.particles {
            for n in cfg.leaves_for(particles) {
                if FDD_LEAVES.contains(&n) && !generators.contains_key(&n) {
                    let g = build_generator(n)?;
                    let tuples = FddCell::new(g.partitions().to_vec(), cfg.fdd_times.len()).tuples;
                    generators.insert(n, (g, tuples));
                }
            }
        }
    }
    let results = run_parallel(cfg.threads, cfg.replicates, |rep| sweep_replicate(cfg, rep, &generators))?;

    let mut cells = Vec::new();
    for &scheme in &cfg.schemes {
        for &particles in &cfg.particles {
            for n in cfg.leaves_for(particles) {
                let fdd = generators
                    .get(&n)
                    .map(|(g, _)| FddCell::new(g.partitions().to_vec(), cfg.fdd_times.len()));
                cells.push(SweepCell {
                    scheme,
                    particles,
                    n,
                    replicates: 0,
                    excluded: 0,
                    heights: Vec::new(),
                    rescaled: Vec::new(),
                    censored_heights: 0,
                    fdd,
                });
            }
        }
    }
    let index: HashMap<(Scheme, usize, usize), usize> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.scheme, c.particles, c.n), i))
        .collect();
    let mut exclusions = Vec::new();
    let mut invariants = InvariantTally::default();

    for (rep, result) in results.into_iter().enumerate() {
        let (samples, tally) = result?;
        invariants.merge(tally);
        for ((scheme, particles), outcome) in samples {
            match outcome {
                Err(reason) => {
                    for n in cfg.leaves_for(particles) {
                        let cell = &mut cells[index[&(scheme, particles, n)]];
                        cell.excluded += 1;
                    }
                    exclusions.push(Exclusion {
                        replicate: rep,
                        scheme,
                        particles,
                        reason,
                    });
                }
                Ok(per_n) => {
                    for (n, s) in per_n {
                        let cell = &mut cells[index[&(scheme, particles, n)]];
                        cell.replicates += 1;
                        match (s.height, s.rescaled) {
                            (Height::Reached(g), Height::Reached(c)) => {
                                cell.heights.push(g as f64);
                                cell.rescaled.push(c);
                            }
                            _ => cell.censored_heights += 1,
                        }
                        if let (Some(f), Some(sample)) = (cell.fdd.as_mut(), s.fdd) {
                            match sample.realized {
                                None => f.censored += 1,
                                Some(tuple) => {
                                    let k = f.tuples.iter().position(|t| *t == tuple).expect("realised chain is enumerated");
                                    f.empirical_counts[k] += 1;
                                    f.conditional_sums.iter_mut().zip(&sample.conditional).for_each(|(a, b)| *a += b);
                                    f.used += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(SweepOutcome {
        times: cfg.fdd_times.clone(),
        cells,
        exclusions,
        invariants,
    })
}

type ReplicateSamples = Vec<((Scheme, usize), Result<Vec<(usize, CellSample)>, String>)>;

fn sweep_replicate(
    cfg: &ExperimentConfig,
    rep: usize,
    generators: &HashMap<usize, (GeneratorMatrix, Vec<Vec<usize>>)>,
) -> Result<(ReplicateSamples, InvariantTally)> {
    let observations = replicate_observations(cfg, rep)?;
    let mut tally = InvariantTally::default();
    let mut out = Vec::new();
    for &particles in &cfg.particles {
        let model = BuiltModel::new(cfg, particles, observations.as_deref())?;
        let order = leaf_order(cfg, particles, rep);
        let seed = smc_seed(cfg, particles, rep);
        for &scheme in &cfg.schemes {
            let ancestry = match model.run(&smc_config(cfg, particles, scheme), seed) {
                Ok((a, _, _)) => a,
                Err(e) => {
                    out.push(((scheme, particles), Err(e.to_string())));
                    continue;
                }
            };
            let series = CoalescenceSeries::from_ancestry(&ancestry);
            tally.record(series.invariant_violations() == 0, || {
                format!("replicate {rep}, {scheme}, N={particles}: D_N <= c_N <= 1 violated")
            });
            let taus = query_generations(&series, &cfg.fdd_times, &mut tally)?;
            let mut per_n = Vec::new();
            for n in cfg.leaves_for(particles) {
                let trace = trace_genealogy(&ancestry, &order[..n])?;
                tally.record(trace.is_monotone(), || {
                    format!("replicate {rep}, {scheme}, N={particles}, n={n}: trace is not a coarsening chain")
                });
                let fdd = match generators.get(&n) {
                    None => None,
                    Some((generator, tuples)) => Some(match &taus {
                        None => FddSample {
                            realized: None,
                            conditional: Vec::new(),
                        },
                        Some(taus) => {
                            let realized = taus
                                .iter()
                                .map(|&g| {
                                    let p = trace.partition_at(g).expect("query within horizon");
                                    generator.index_of(p).expect("partition of [n]")
                                })
                                .collect();
                            FddSample {
                                realized: Some(realized),
                                conditional: conditional_law(&ancestry, generator.partitions(), taus, tuples)?,
                            }
                        }
                    }),
                };
                per_n.push((
                    n,
                    CellSample {
                        height: tree_height(&trace),
                        rescaled: rescaled_height(&trace, &series),
                        fdd,
                    },
                ));
            }
            out.push(((scheme, particles), Ok(per_n)));
        }
    }
    Ok((out, tally))
}

/// `tau_N(t)` for each query time (`t = 0` maps to generation 0), or `None`
/// if the horizon runs out first.
fn query_generations(series: &CoalescenceSeries, times: &[f64], tally: &mut InvariantTally) -> Result<Option<Vec<usize>>> {
    let mut taus = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            taus.push(0);
            continue;
        }
        match time_change(series, t) {
            Ok(tau) => {
                tally.record(time_change_sandwich_holds(series, t, tau), || {
                    format!("t={t}: C(tau={tau}) = {} outside [t, t+1)", series.cumulative(tau))
                });
                taus.push(tau);
            }
            Err(Error::HorizonExhausted { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(taus))
}

/// Exact law of the chain at `taus` given the offspring counts of every
/// generation up to the last query: the products of one-generation
/// transition matrices between consecutive query generations.
fn conditional_law(ancestry: &Ancestry, states: &[Partition], taus: &[usize], tuples: &[Vec<usize>]) -> Result<Vec<f64>> {
    let dim = states.len();
    let mut segments = vec![SquareMatrix::identity(dim); taus.len()];
    let mut counts = vec![0u32; ancestry.particles()];
    let mut seg = 0;
    for r in 1..=taus.last().copied().unwrap_or(0) {
        while taus[seg] < r {
            seg += 1;
        }
        count_offspring(ancestry.reverse(r), &mut counts);
        let step = conditional_transition_matrix(&CountClasses::from_slice(&counts), states)?;
        segments[seg] = segments[seg].mul(&step);
    }
    Ok(chain_probabilities(&segments, tuples))
}

/// `P(x_1, ..., x_k) = M_1[0, x_1] M_2[x_1, x_2] ... M_k[x_{k-1}, x_k]`,
/// starting from state 0 (the singleton partition).
fn chain_probabilities(segments: &[SquareMatrix], tuples: &[Vec<usize>]) -> Vec<f64> {
    tuples
        .iter()
        .map(|t| {
            let mut prev = 0;
            let mut p = 1.0;
            for (m, &x) in segments.iter().zip(t) {
                p *= m[(prev, x)];
                prev = x;
            }
            p
        })
        .collect()
}

/// Exact Kingman law of the chain at `times`.
pub fn kingman_chain_law(generator: &GeneratorMatrix, times: &[f64], tuples: &[Vec<usize>]) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    let segments = times
        .iter()
        .map(|&t| {
            let m = transition_matrix(generator, t - prev);
            prev = t;
            m
        })
        .collect::<smc_genealogy::Result<Vec<_>>>()?;
    Ok(chain_probabilities(&segments, tuples))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FddLawRow {
    pub scheme: String,
    #[serde(rename = "N")]
    pub particles: usize,
    pub n: usize,
    pub state: String,
    pub empirical: f64,
    pub conditional: f64,
    pub kingman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FddTvRow {
    pub scheme: String,
    #[serde(rename = "N")]
    pub particles: usize,
    pub n: usize,
    pub replicates: usize,
    pub censored: usize,
    pub tv_empirical: f64,
    pub tv_conditional: f64,
}

/// Whether the distance decreases strictly with `N`, and its log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FddTrendRow {
    pub scheme: String,
    pub n: usize,
    pub estimator: String,
    pub monotone_decreasing: bool,
    pub log_log_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FddReport {
    pub law: Vec<FddLawRow>,
    pub tv: Vec<FddTvRow>,
    pub trend: Vec<FddTrendRow>,
    /// `(file stem, states, matrix)` for the generator and each Kingman
    /// transition matrix used.
    pub matrices: Vec<(String, Vec<Partition>, SquareMatrix)>,
}

pub fn fdd_report(outcome: &SweepOutcome) -> Result<FddReport> {
    let mut report = FddReport {
        law: Vec::new(),
        tv: Vec::new(),
        trend: Vec::new(),
        matrices: Vec::new(),
    };
    let mut exact: HashMap<usize, Vec<f64>> = HashMap::new();
    for cell in &outcome.cells {
        let Some(f) = &cell.fdd else { continue };
        if let Entry::Vacant(slot) = exact.entry(cell.n) {
            let generator = build_generator(cell.n)?;
            slot.insert(kingman_chain_law(&generator, &outcome.times, &f.tuples)?);
            let states = generator.partitions().to_vec();
            let mut prev = 0.0;
            for &t in &outcome.times {
                let p = transition_matrix(&generator, t - prev)?;
                report.matrices.push((format!("kingman_n{}_from{prev}_to{t}", cell.n), states.clone(), p));
                prev = t;
            }
            report.matrices.push((format!("generator_n{}", cell.n), states, generator.matrix().clone()));
        }
        if f.used == 0 {
            return Err(HarnessError::Config(format!(
                "{} N={} n={}: every replicate was censored before the last query time",
                cell.scheme, cell.particles, cell.n
            )));
        }
        let kingman = &exact[&cell.n];
        let (emp, cond) = (f.empirical(), f.conditional());
        for (k, ((&e, &c), &q)) in emp.iter().zip(&cond).zip(kingman).enumerate() {
            report.law.push(FddLawRow {
                scheme: cell.scheme.name().into(),
                particles: cell.particles,
                n: cell.n,
                state: f.label(k),
                empirical: e,
                conditional: c,
                kingman: q,
            });
        }
        report.tv.push(FddTvRow {
            scheme: cell.scheme.name().into(),
            particles: cell.particles,
            n: cell.n,
            replicates: f.used,
            censored: f.censored,
            tv_empirical: total_variation(&emp, kingman),
            tv_conditional: total_variation(&cond, kingman),
        });
    }

    let mut groups: Vec<(String, usize)> = report.tv.iter().map(|r| (r.scheme.clone(), r.n)).collect();
    groups.sort();
    groups.dedup();
    for (scheme, n) in groups {
        let mut rows: Vec<&FddTvRow> = report.tv.iter().filter(|r| r.scheme == scheme && r.n == n).collect();
        rows.sort_by_key(|r| r.particles);
        let xs: Vec<f64> = rows.iter().map(|r| r.particles as f64).collect();
        for (estimator, ys) in [
            ("empirical", rows.iter().map(|r| r.tv_empirical).collect::<Vec<_>>()),
            ("conditional", rows.iter().map(|r| r.tv_conditional).collect()),
        ] {
            let slope = if ys.iter().all(|&y| y > 0.0) {
                fit_log_log(&xs, &ys).map_or(f64::NAN, |f| f.slope)
            } else {
                f64::NAN
            };
            report.trend.push(FddTrendRow {
                scheme: scheme.clone(),
                n,
                estimator: estimator.into(),
                monotone_decreasing: ys.windows(2).all(|w| w[1] < w[0]),
                log_log_slope: slope,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub scheme: String,
    #[serde(rename = "N")]
    pub particles: usize,
    pub n: usize,
    pub replicates: usize,
    pub censored: usize,
    pub mean_height: f64,
    pub var_height: f64,
    pub mean_rescaled: f64,
    pub var_rescaled: f64,
}

/// Log-log fits of height moments against `N`, plus ratios between
/// consecutive particle counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFitRow {
    pub scheme: String,
    pub n: usize,
    pub quantity: String,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingRow {
    pub scheme: String,
    pub n: usize,
    pub n_low: usize,
    pub n_high: usize,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFitRow>,
    pub doubling: Vec<DoublingRow>,
}

pub fn scaling_report(outcome: &SweepOutcome) -> Result<ScalingReport> {
    let rows: Vec<ScalingRow> = outcome
        .cells
        .iter()
        .map(|c| {
            let (mean_height, var_height) = mean_var(&c.heights);
            let (mean_rescaled, var_rescaled) = mean_var(&c.rescaled);
            ScalingRow {
                scheme: c.scheme.name().into(),
                particles: c.particles,
                n: c.n,
                replicates: c.replicates,
                censored: c.censored_heights,
                mean_height,
                var_height,
                mean_rescaled,
                var_rescaled,
            }
        })
        .collect();
    let mut groups: Vec<(String, usize)> = rows.iter().map(|r| (r.scheme.clone(), r.n)).collect();
    groups.sort();
    groups.dedup();
    let mut fits = Vec::new();
    let mut doubling = Vec::new();
    for (scheme, n) in groups {
        let mut sel: Vec<&ScalingRow> = rows.iter().filter(|r| r.scheme == scheme && r.n == n).collect();
        sel.sort_by_key(|r| r.particles);
        let xs: Vec<f64> = sel.iter().map(|r| r.particles as f64).collect();
        if xs.len() < 3 {
            return Err(HarnessError::Config(format!(
                "scaling fit for {scheme}, n={n} needs at least 3 particle counts, got {}",
                xs.len()
            )));
        }
        for (quantity, ys) in [
            ("mean_height", sel.iter().map(|r| r.mean_height).collect::<Vec<_>>()),
            ("var_height", sel.iter().map(|r| r.var_height).collect()),
        ] {
            let fit = fit_log_log(&xs, &ys).ok_or_else(|| {
                HarnessError::Config(format!("cannot fit {quantity} for {scheme}, n={n}"))
            })?;
            fits.push(ScalingFitRow {
                scheme: scheme.clone(),
                n,
                quantity: quantity.into(),
                slope: fit.slope,
                ci_low: fit.ci_low,
                ci_high: fit.ci_high,
            });
        }
        for w in sel.windows(2) {
            doubling.push(DoublingRow {
                scheme: scheme.clone(),
                n,
                n_low: w[0].particles,
                n_high: w[1].particles,
                mean_ratio: w[1].mean_height / w[0].mean_height,
            });
        }
    }
    Ok(ScalingReport { rows, fits, doubling })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_tuples_for_two_leaves_two_times() {
        let cell = FddCell::new(smc_genealogy::partition::enumerate(2), 2);
        assert_eq!(cell.tuples, vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(cell.label(1), "{1}{2}|{1,2}");
    }

    #[test]
    fn kingman_two_leaf_joint_law() {
        let g = build_generator(2).unwrap();
        let cell = FddCell::new(g.partitions().to_vec(), 2);
        let law = kingman_chain_law(&g, &[0.5, 1.0], &cell.tuples).unwrap();
        let (a, b) = ((-0.5f64).exp(), (-1.0f64).exp());
        assert!((law[0] - b).abs() < 1e-12);
        assert!((law[1] - (a - b)).abs() < 1e-12);
        assert!((law[2] - (1.0 - a)).abs() < 1e-12);
        let at_zero = kingman_chain_law(&g, &[0.0], &FddCell::new(g.partitions().to_vec(), 1).tuples).unwrap();
        assert_eq!(at_zero, vec![1.0, 0.0]);
    }
}
