use std::path::Path;
use std::process::{Command, Output};

use smc_genealogy_harness::io::{read_ancestors_csv, read_ancestry_bin};

fn smcgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smcgen")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("{last}: {e}"))
}

#[test]
fn heights_writes_tables_plots_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = smcgen(&[
        "heights", "--particles", "16", "--n", "2,4", "--replicates", "3", "--resampling", "residual,systematic",
        "--seed", "8", "--out-dir", out_dir, "--traces", "--dump", "--horizon-factor", "30",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let heights = std::fs::read_to_string(dir.path().join("heights.csv")).unwrap();
    assert!(heights.starts_with("replicate,scheme,N,n,height_generations,height_rescaled,censored\n"));
    assert_eq!(heights.lines().count(), 1 + 2 * 3 * 2);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("scheme,N,n,mean_height,var_height,mean_rescaled,var_rescaled,censor_rate,replicates\n"));
    let trace = std::fs::read_to_string(dir.path().join("traces_residual_N16.csv")).unwrap();
    assert!(trace.starts_with("replicate,n,generation,num_blocks\n0,2,0,2\n"));

    let run_dir = dir.path().join("runs/systematic_N16");
    let from_csv = read_ancestors_csv(&run_dir.join("ancestors.csv")).unwrap();
    let from_bin = read_ancestry_bin(&run_dir.join("ancestry.bin")).unwrap();
    assert_eq!(from_csv, from_bin);
    assert_eq!(from_csv.horizon(), 30 * 16);
    let obs = std::fs::read_to_string(run_dir.join("observations.csv")).unwrap();
    assert!(obs.starts_with("t,y\n0,"));
    assert_eq!(obs.lines().count(), 1 + 30 * 16 + 1);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(run_dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["scheme"], "systematic");
    assert_eq!(meta["permuted"], true);
    assert_eq!(meta["particles"], 16);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nparticles = [8]\nleaves = [2]\nreplicates = 2\nschemes = [\"multinomial\"]\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = smcgen(&[
        "heights", "--config", cfg.to_str().unwrap(), "--replicates", "4", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().ends_with(",4"));
}

#[test]
fn empty_scheme_list_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "schemes = []\n").unwrap();
    let out = smcgen(&["heights", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "config");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn usage_and_io_errors_are_machine_readable() {
    let out = smcgen(&["heights", "--permute-ancestors", "sometimes"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let out = smcgen(&["plot", "--out-dir", "/nonexistent/place"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "csv");
    assert!(err["message"].as_str().unwrap().contains("/nonexistent/place/summary.csv"));
}

#[test]
fn plot_redraws_from_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(smcgen(&["heights", "--particles", "8", "--replicates", "2", "--out-dir", d]).status.success());
    std::fs::remove_file(dir.path().join("heights_mean.svg")).unwrap();
    assert!(smcgen(&["plot", "--out-dir", d]).status.success());
    assert!(Path::new(d).join("heights_mean.svg").exists());
}

#[test]
fn oracle_and_fdd_and_scaling_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let out = smcgen(&["oracle", "--max-particles", "4", "--out-dir", &d("o")]);
    assert!(out.status.success());
    let oracle = std::fs::read_to_string(dir.path().join("o/oracle.csv")).unwrap();
    assert!(oracle.starts_with("case,analytic,brute_force,abs_diff\n"));

    let common = ["--particles", "8,16,32", "--n", "2", "--replicates", "40", "--preset", "neutral"];
    let out = smcgen(&[&["fdd", "--out-dir", &d("f")], &common[..]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let matrix = std::fs::read_to_string(dir.path().join("f/matrices/generator_n2.csv")).unwrap();
    assert_eq!(matrix, "from,{1}{2},\"{1,2}\"\n{1}{2},-1,1\n\"{1,2}\",0,0\n");
    let out = smcgen(&[&["scaling", "--out-dir", &d("s")], &common[..]].concat());
    assert!(out.status.success());
    let fit = std::fs::read_to_string(dir.path().join("s/scaling_fit.csv")).unwrap();
    assert!(fit.starts_with("scheme,n,quantity,slope,ci_low,ci_high\n"));
}
