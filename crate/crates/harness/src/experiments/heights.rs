use smc_genealogy::{
    rescaled_height, trace_genealogy, tree_height, Ancestry, CoalescenceSeries, Height, RunMeta, Scheme,
};

use super::{
    leaf_order, replicate_observations, run_parallel, smc_config, smc_seed, BuiltModel, Exclusion, InvariantTally,
};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io::{HeightRow, SummaryRow, TraceRow};
use crate::stats::mean_var;

/// Everything needed to write replicate 0 of one `(scheme, N)` run to disk.
#[derive(Debug, Clone)]
pub struct DumpedRun {
    pub scheme: Scheme,
    pub particles: usize,
    pub meta: RunMeta,
    pub ancestry: Ancestry,
    pub ess: Vec<f64>,
    pub observations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct HeightOutcome {
    /// Ordered by scheme, `N`, replicate, `n`.
    pub rows: Vec<HeightRow>,
    /// Ordered by scheme, `N`, `n`.
    pub summary: Vec<SummaryRow>,
    /// Trace rows per `(scheme, N)`, when requested.
    pub traces: Vec<(Scheme, usize, Vec<TraceRow>)>,
    pub exclusions: Vec<Exclusion>,
    pub invariants: InvariantTally,
    pub dumps: Vec<DumpedRun>,
}

struct RunResult {
    heights: Vec<(usize, Height<usize>, Height<f64>)>,
    traces: Vec<TraceRow>,
}

struct ReplicateResult {
    /// Indexed `[scheme][particle index]`.
    runs: Vec<Vec<Result<RunResult, String>>>,
    invariants: InvariantTally,
    dumps: Vec<DumpedRun>,
}

/// Tree heights of nested uniformly sampled leaf sets, for every scheme,
/// particle count and replicate. Within a replicate all schemes share the
/// observations, the SMC seed and the leaf sets.
pub fn run_height_experiment(cfg: &ExperimentConfig) -> Result<HeightOutcome> {
    let results = run_parallel(cfg.threads, cfg.replicates, |rep| run_replicate(cfg, rep))?;
    let mut out = HeightOutcome::default();
    let mut per_replicate = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        out.invariants.merge(r.invariants);
        out.dumps.extend(r.dumps);
        per_replicate.push(r.runs);
    }

    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        for (pi, &particles) in cfg.particles.iter().enumerate() {
            let leaves = cfg.leaves_for(particles);
            let mut traces = Vec::new();
            let mut excluded = 0;
            let mut by_n: Vec<(Vec<f64>, Vec<f64>, usize)> = vec![(Vec::new(), Vec::new(), 0); leaves.len()];
            for (rep, runs) in per_replicate.iter_mut().enumerate() {
                match &mut runs[si][pi] {
                    Err(reason) => {
                        excluded += 1;
                        out.exclusions.push(Exclusion {
                            replicate: rep,
                            scheme,
                            particles,
                            reason: reason.clone(),
                        });
                    }
                    Ok(run) => {
                        for (k, &(n, raw, rescaled)) in run.heights.iter().enumerate() {
                            let slot = &mut by_n[k];
                            match (raw, rescaled) {
                                (Height::Reached(g), Height::Reached(c)) => {
                                    slot.0.push(g as f64);
                                    slot.1.push(c);
                                }
                                _ => slot.2 += 1,
                            }
                            out.rows.push(HeightRow {
                                replicate: rep,
                                scheme: scheme.name().into(),
                                particles,
                                n,
                                height_generations: raw.value(),
                                height_rescaled: rescaled.value(),
                                censored: raw.is_censored() as u8,
                            });
                        }
                        traces.append(&mut run.traces);
                    }
                }
            }
            let replicates = cfg.replicates - excluded;
            for (&n, (raw, rescaled, censored)) in leaves.iter().zip(by_n) {
                let (mean_height, var_height) = mean_var(&raw);
                let (mean_rescaled, var_rescaled) = mean_var(&rescaled);
                out.summary.push(SummaryRow {
                    scheme: scheme.name().into(),
                    particles,
                    n,
                    mean_height,
                    var_height,
                    mean_rescaled,
                    var_rescaled,
                    censor_rate: if replicates > 0 { censored as f64 / replicates as f64 } else { f64::NAN },
                    replicates,
                });
            }
            if cfg.write_traces {
                out.traces.push((scheme, particles, traces));
            }
        }
    }
    Ok(out)
}

fn run_replicate(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicateResult> {
    let observations = replicate_observations(cfg, rep)?;
    let mut invariants = InvariantTally::default();
    let mut dumps = Vec::new();
    let mut runs: Vec<Vec<Result<RunResult, String>>> = cfg.schemes.iter().map(|_| Vec::new()).collect();
    for &particles in &cfg.particles {
        let model = BuiltModel::new(cfg, particles, observations.as_deref())?;
        let order = leaf_order(cfg, particles, rep);
        let leaves = cfg.leaves_for(particles);
        let seed = smc_seed(cfg, particles, rep);
        for (si, &scheme) in cfg.schemes.iter().enumerate() {
            let (ancestry, meta, ess) = match model.run(&smc_config(cfg, particles, scheme), seed) {
                Ok(run) => run,
                Err(e) => {
                    runs[si].push(Err(e.to_string()));
                    continue;
                }
            };
            let series = CoalescenceSeries::from_ancestry(&ancestry);
            invariants.record(series.invariant_violations() == 0, || {
                format!("replicate {rep}, {scheme}, N={particles}: D_N <= c_N <= 1 violated")
            });
            let mut result = RunResult {
                heights: Vec::with_capacity(leaves.len()),
                traces: Vec::new(),
            };
            for &n in &leaves {
                let trace = trace_genealogy(&ancestry, &order[..n])?;
                invariants.record(trace.is_monotone(), || {
                    format!("replicate {rep}, {scheme}, N={particles}, n={n}: trace is not a coarsening chain")
                });
                result.heights.push((n, tree_height(&trace), rescaled_height(&trace, &series)));
                if cfg.write_traces {
                    result.traces.extend(trace.events().iter().map(|(g, p)| TraceRow {
                        replicate: rep,
                        n,
                        generation: *g,
                        num_blocks: p.num_blocks(),
                    }));
                }
            }
            if cfg.dump_runs && rep == 0 {
                dumps.push(DumpedRun {
                    scheme,
                    particles,
                    meta,
                    ancestry,
                    ess,
                    observations: model.observations().map(<[f64]>::to_vec),
                });
            }
            runs[si].push(Ok(result));
        }
    }
    Ok(ReplicateResult {
        runs,
        invariants,
        dumps,
    })
}
