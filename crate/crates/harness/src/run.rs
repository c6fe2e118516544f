//! Subcommand bodies: run an experiment and write its files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use smc_genealogy::oracle::transition_sweep;
use smc_genealogy::rng::RNG_ALGORITHM;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{
    fdd_report, run_height_experiment, run_sweep, scaling_report, Exclusion, FddReport, HeightOutcome,
    InvariantTally, ScalingReport, SweepOutcome, FDD_LEAVES,
};
use crate::io::{self, OracleRow, SummaryRow};
use crate::plot::emit_plots;

#[derive(Serialize)]
struct ExclusionRow<'a> {
    replicate: usize,
    scheme: &'a str,
    #[serde(rename = "N")]
    particles: usize,
    reason: &'a str,
}

fn write_exclusions(dir: &Path, exclusions: &[Exclusion]) -> Result<PathBuf> {
    let path = dir.join("exclusions.csv");
    io::write_csv(
        &path,
        exclusions.iter().map(|e| ExclusionRow {
            replicate: e.replicate,
            scheme: e.scheme.name(),
            particles: e.particles,
            reason: &e.reason,
        }),
    )?;
    Ok(path)
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    json!({
        "seed": cfg.seed,
        "particles": cfg.particles,
        "leaves": cfg.leaves,
        "replicates": cfg.replicates,
        "schemes": cfg.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "permute_ancestors": cfg.permute.name(),
        "horizon_factor": cfg.horizon_factor,
        "model": cfg.model,
        "fdd_times": cfg.fdd_times,
    })
}

fn write_meta(dir: &Path, command: &str, cfg: &ExperimentConfig, exclusions: usize, tally: &InvariantTally) -> Result<PathBuf> {
    let path = dir.join("meta.json");
    io::write_json(
        &path,
        &json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "rng": RNG_ALGORITHM,
            "config": config_json(cfg),
            "excluded_runs": exclusions,
            "invariant_checks": tally.checked,
            "invariant_violations": tally.violations,
        }),
    )?;
    Ok(path)
}

fn check_invariants(tally: &InvariantTally) -> Result<()> {
    match &tally.first_violation {
        Some(first) => Err(HarnessError::Invariant(format!("{} of {} checks failed; first: {first}", tally.violations, tally.checked))),
        None => Ok(()),
    }
}

/// Files written by a subcommand.
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

impl Written {
    fn add(&mut self, path: PathBuf) {
        self.files.push(path);
    }
}

pub fn heights(cfg: &ExperimentConfig) -> Result<(HeightOutcome, Written)> {
    let outcome = run_height_experiment(cfg)?;
    let written = write_heights(cfg, &outcome)?;
    check_invariants(&outcome.invariants)?;
    Ok((outcome, written))
}

pub fn write_heights(cfg: &ExperimentConfig, outcome: &HeightOutcome) -> Result<Written> {
    let dir = &cfg.out_dir;
    io::ensure_dir(dir)?;
    let mut w = Written::default();
    let path = dir.join("heights.csv");
    io::write_csv(&path, &outcome.rows)?;
    w.add(path);
    let path = dir.join("summary.csv");
    io::write_csv(&path, &outcome.summary)?;
    w.add(path);
    w.add(write_exclusions(dir, &outcome.exclusions)?);
    for (scheme, particles, rows) in &outcome.traces {
        let path = dir.join(format!("traces_{}_N{particles}.csv", scheme.name()));
        io::write_csv(&path, rows)?;
        w.add(path);
    }
    for run in &outcome.dumps {
        let run_dir = dir.join("runs").join(format!("{}_N{}", run.scheme.name(), run.particles));
        io::ensure_dir(&run_dir)?;
        let files = [
            run_dir.join("ancestors.csv"),
            run_dir.join("ancestry.bin"),
            run_dir.join("weights.csv"),
            run_dir.join("meta.json"),
        ];
        io::write_ancestors_csv(&files[0], &run.ancestry)?;
        io::write_ancestry_bin(&files[1], &run.ancestry)?;
        io::write_weights_csv(&files[2], &run.ess)?;
        io::write_json(&files[3], &io::meta_json(&run.meta, json!({ "replicate": 0 })))?;
        w.files.extend(files);
        if let Some(obs) = &run.observations {
            let path = run_dir.join("observations.csv");
            io::write_observations_csv(&path, obs)?;
            w.add(path);
        }
    }
    if !outcome.summary.is_empty() {
        w.files.extend(emit_plots(&outcome.summary, dir)?);
    }
    w.add(write_meta(dir, "heights", cfg, outcome.exclusions.len(), &outcome.invariants)?);
    Ok(w)
}

pub fn fdd(cfg: &ExperimentConfig) -> Result<(SweepOutcome, FddReport, Written)> {
    for &particles in &cfg.particles {
        if let Some(n) = cfg.leaves_for(particles).into_iter().find(|n| !FDD_LEAVES.contains(n)) {
            return Err(HarnessError::Config(format!("fdd supports n in 2..=3, got n={n}")));
        }
    }
    if cfg.leaves.is_none() {
        return Err(HarnessError::Config("fdd needs an explicit leaf-size list (2 and/or 3)".into()));
    }
    let outcome = run_sweep(cfg, true)?;
    let report = fdd_report(&outcome)?;
    let written = write_fdd(cfg, &outcome, &report)?;
    check_invariants(&outcome.invariants)?;
    Ok((outcome, report, written))
}

pub fn write_fdd(cfg: &ExperimentConfig, outcome: &SweepOutcome, report: &FddReport) -> Result<Written> {
    let dir = &cfg.out_dir;
    io::ensure_dir(dir)?;
    let mut w = Written::default();
    let path = dir.join("fdd_law.csv");
    io::write_csv(&path, &report.law)?;
    w.add(path);
    let path = dir.join("fdd_tv.csv");
    io::write_csv(&path, &report.tv)?;
    w.add(path);
    let path = dir.join("fdd_trend.csv");
    io::write_csv(&path, &report.trend)?;
    w.add(path);
    let matrix_dir = dir.join("matrices");
    io::ensure_dir(&matrix_dir)?;
    for (stem, states, matrix) in &report.matrices {
        let path = matrix_dir.join(format!("{stem}.csv"));
        io::write_partition_matrix(&path, states, matrix)?;
        w.add(path);
    }
    w.add(write_exclusions(dir, &outcome.exclusions)?);
    w.add(write_meta(dir, "fdd", cfg, outcome.exclusions.len(), &outcome.invariants)?);
    Ok(w)
}

pub fn scaling(cfg: &ExperimentConfig) -> Result<(SweepOutcome, ScalingReport, Written)> {
    let mut distinct = cfg.particles.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(HarnessError::Config(format!(
            "scaling needs at least 3 distinct particle counts, got {}",
            distinct.len()
        )));
    }
    let outcome = run_sweep(cfg, false)?;
    let report = scaling_report(&outcome)?;
    let written = write_scaling(cfg, &outcome, &report)?;
    check_invariants(&outcome.invariants)?;
    Ok((outcome, report, written))
}

pub fn write_scaling(cfg: &ExperimentConfig, outcome: &SweepOutcome, report: &ScalingReport) -> Result<Written> {
    let dir = &cfg.out_dir;
    io::ensure_dir(dir)?;
    let mut w = Written::default();
    let path = dir.join("scaling.csv");
    io::write_csv(&path, &report.rows)?;
    w.add(path);
    let path = dir.join("scaling_fit.csv");
    io::write_csv(&path, &report.fits)?;
    w.add(path);
    let path = dir.join("scaling_doubling.csv");
    io::write_csv(&path, &report.doubling)?;
    w.add(path);
    w.add(write_exclusions(dir, &outcome.exclusions)?);
    w.add(write_meta(dir, "scaling", cfg, outcome.exclusions.len(), &outcome.invariants)?);
    Ok(w)
}

/// Re-draws the plots from an existing `summary.csv`.
pub fn plot(summary: &Path, out_dir: &Path) -> Result<Written> {
    let rows: Vec<SummaryRow> = io::read_csv(summary)?;
    io::ensure_dir(out_dir)?;
    Ok(Written {
        files: emit_plots(&rows, out_dir)?.to_vec(),
    })
}

/// Exhaustive comparison of the analytic transition probabilities with
/// enumeration; returns the largest deviation and the largest row-sum error.
pub fn oracle(out_dir: &Path, max_particles: usize, max_blocks: usize) -> Result<(f64, f64, Written)> {
    let (reports, rows) = transition_sweep(max_particles, max_blocks)?;
    io::ensure_dir(out_dir)?;
    let path = out_dir.join("oracle.csv");
    io::write_csv(
        &path,
        reports.iter().map(|r| OracleRow {
            case: r.case.clone(),
            analytic: r.analytic,
            brute_force: r.brute_force,
            abs_diff: r.abs_diff,
        }),
    )?;
    let worst = reports.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let worst_row = rows.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    Ok((worst, worst_row, Written { files: vec![path] }))
}
