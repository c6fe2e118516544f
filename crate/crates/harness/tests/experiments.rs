use std::path::Path;

use smc_genealogy_harness::config::RawConfig;
use smc_genealogy_harness::experiments::{fdd_report, run_height_experiment, run_sweep};
use smc_genealogy_harness::io::{self, SummaryRow};
use smc_genealogy_harness::{run, ExperimentConfig};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut raw = RawConfig::parse(text, Path::new("test.toml")).unwrap();
    raw.out_dir = Some(out.to_path_buf());
    ExperimentConfig::resolve(raw).unwrap().0
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn single_replicate_single_scheme_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 3\nparticles = [16]\nleaves = [2]\nreplicates = 1\nschemes = [\"systematic\"]\n";
    let cfg = config(text, dir.path());
    let first = run_height_experiment(&cfg).unwrap();
    assert_eq!(first.summary.len(), 1);
    assert_eq!(first.rows.len(), 1);
    assert_eq!(first.summary[0].replicates, 1);
    assert!(first.summary[0].var_height.is_nan());
    let second = run_height_experiment(&cfg).unwrap();
    assert_eq!(first.rows, second.rows);
}

#[test]
fn summary_counts_heights_and_nesting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("seed = 5\nparticles = [32]\nreplicates = 30\nhorizon_factor = 40\n", dir.path());
    let out = run_height_experiment(&cfg).unwrap();
    assert_eq!(out.summary.len(), 4 * 5);
    assert_eq!(out.invariants.violations, 0);
    assert!(out.exclusions.is_empty());
    for row in &out.summary {
        assert_eq!(row.replicates, cfg.replicates - out.exclusions.len());
        assert!((0.0..=1.0).contains(&row.censor_rate));
        assert!(row.var_height >= 0.0 && row.var_rescaled >= 0.0);
    }
    // Leaf sets are nested, so mean heights cannot decrease with n.
    for w in out.summary.windows(2) {
        if w[0].scheme == w[1].scheme && w[0].particles == w[1].particles {
            assert!(w[1].mean_height >= w[0].mean_height);
        }
    }
    // Every scheme sees the same observations, seed and leaves, but its own
    // resampling, so heights differ between schemes.
    let col = |s: &str| out.rows.iter().filter(|r| r.scheme == s).map(|r| r.height_generations).collect::<Vec<_>>();
    assert_ne!(col("multinomial"), col("systematic"));
}

#[test]
fn plots_have_one_polyline_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("seed = 1\nparticles = [256]\nreplicates = 2\n", dir.path());
    let (_, written) = run::heights(&cfg).unwrap();
    let summary: Vec<SummaryRow> = io::read_csv(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 4 * 8);
    for name in ["heights_mean.svg", "heights_var.svg"] {
        let path = dir.path().join(name);
        assert!(written.files.contains(&path));
        let text = String::from_utf8(read(&path)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
        assert_eq!(lines.len(), 4);
        for line in lines {
            assert_eq!(line.attribute("points").unwrap().split(' ').count(), 8);
        }
    }
}

#[test]
fn fdd_at_time_zero_is_the_singleton_partition() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 2\nparticles = [16, 32]\nleaves = [2, 3]\nreplicates = 50\nschemes = [\"multinomial\"]\nhorizon_factor = 20\n[model]\nkind = \"neutral\"\n[fdd]\ntimes = [0.0, 1.0]\n";
    let cfg = config(text, dir.path());
    let outcome = run_sweep(&cfg, true).unwrap();
    let report = fdd_report(&outcome).unwrap();
    for row in &report.law {
        let first = row.state.split('|').next().unwrap();
        let singletons = first.matches('{').count() == row.n;
        if !singletons {
            assert_eq!((row.empirical, row.conditional, row.kingman), (0.0, 0.0, 0.0), "{row:?}");
        }
    }
    for cell in &outcome.cells {
        let f = cell.fdd.as_ref().unwrap();
        let total: f64 = f.conditional().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(f.used + f.censored, cell.replicates);
    }
    assert_eq!(outcome.invariants.violations, 0);
}

#[test]
fn rescaled_pair_law_is_close_to_kingman_for_moderate_n() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 4\nparticles = [64]\nleaves = [2]\nreplicates = 400\nschemes = [\"multinomial\"]\nhorizon_factor = 10\n[model]\nkind = \"neutral\"\n[fdd]\ntimes = [1.0]\n";
    let outcome = run_sweep(&config(text, dir.path()), true).unwrap();
    let report = fdd_report(&outcome).unwrap();
    let unmerged = &report.law[0];
    assert_eq!(unmerged.state, "{1}{2}");
    assert!((unmerged.kingman - (-1.0f64).exp()).abs() < 1e-12);
    // Binomial standard error at 400 replicates is about 0.024.
    assert!((unmerged.empirical - unmerged.kingman).abs() < 0.1);
    assert!((unmerged.conditional - unmerged.kingman).abs() < 0.02);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let text = "seed = 9\nparticles = [16, 32]\nreplicates = 12\nhorizon_factor = 20\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg_a = config(text, a.path());
    cfg_a.threads = 1;
    let mut cfg_b = config(text, b.path());
    cfg_b.threads = 3;
    run::heights(&cfg_a).unwrap();
    run::heights(&cfg_b).unwrap();
    for name in ["heights.csv", "summary.csv", "heights_mean.svg"] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }
}

#[test]
fn scaling_needs_three_particle_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("particles = [16, 32]\nleaves = [2]\n[model]\nkind = \"neutral\"\n", dir.path());
    assert!(run::scaling(&cfg).is_err());
}

#[test]
fn fdd_rejects_large_leaf_sets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("particles = [16]\nleaves = [4]\n[model]\nkind = \"neutral\"\n", dir.path());
    assert!(run::fdd(&cfg).is_err());
}
