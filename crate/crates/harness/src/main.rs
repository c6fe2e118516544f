use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smc_genealogy::{PermutePolicy, Scheme};
use smc_genealogy_harness::config::{RawConfig, RawFdd, RawOutput};
use smc_genealogy_harness::run::{self, Written};
use smc_genealogy_harness::{ExperimentConfig, HarnessError, Result};

/// Genealogies of sequential Monte Carlo particle systems.
#[derive(Parser)]
#[command(name = "smcgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tree heights of sampled leaf sets under each resampling scheme.
    Heights(ExperimentArgs),
    /// Finite-dimensional laws of the rescaled genealogy against Kingman.
    Fdd(ExperimentArgs),
    /// Growth of tree-height moments with the number of particles.
    Scaling(ExperimentArgs),
    /// Redraw the height plots from a summary.csv.
    Plot {
        /// Summary table; defaults to <out-dir>/summary.csv.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Compare analytic transition probabilities with brute-force enumeration.
    Oracle {
        #[arg(long, default_value_t = 5)]
        max_particles: usize,
        #[arg(long, default_value_t = 3)]
        max_blocks: usize,
        #[arg(long, default_value = "out/oracle")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: desk, paper, neutral, ou_fdd.
    #[arg(long)]
    preset: Option<String>,
    /// Leaf-set sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Particle counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    particles: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Resampling schemes, comma separated.
    #[arg(long, value_delimiter = ',')]
    resampling: Option<Vec<Scheme>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_name = "on|off|auto")]
    permute_ancestors: Option<PermutePolicy>,
    /// Horizon as a multiple of N.
    #[arg(long)]
    horizon_factor: Option<usize>,
    /// fdd query times in coalescent units, comma separated.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Write per-replicate genealogy traces.
    #[arg(long)]
    traces: bool,
    /// Write ancestors, observations and metadata of replicate 0.
    #[arg(long)]
    dump: bool,
}

impl ExperimentArgs {
    fn resolve(self, default_preset: &str) -> Result<(ExperimentConfig, Vec<String>)> {
        let mut raw = match (&self.config, &self.preset) {
            (Some(path), _) => RawConfig::load(path)?,
            (None, Some(name)) => RawConfig::preset(name)?,
            (None, None) => RawConfig::preset(default_preset)?,
        };
        if let Some(v) = self.n {
            raw.leaves = Some(v);
        }
        if let Some(v) = self.particles {
            raw.particles = Some(v);
        }
        if let Some(v) = self.replicates {
            raw.replicates = Some(v);
        }
        if let Some(v) = self.resampling {
            raw.schemes = Some(v.iter().map(|s| s.name().to_string()).collect());
        }
        if let Some(v) = self.seed {
            raw.seed = Some(v);
        }
        if let Some(v) = self.out_dir {
            raw.out_dir = Some(v);
        }
        if let Some(v) = self.threads {
            raw.threads = Some(v);
        }
        if let Some(v) = self.permute_ancestors {
            raw.permute_ancestors = Some(v.name().to_string());
        }
        if let Some(v) = self.horizon_factor {
            raw.horizon_factor = Some(v);
        }
        if let Some(v) = self.times {
            raw.fdd.get_or_insert_with(RawFdd::default).times = Some(v);
        }
        if self.traces || self.dump {
            let out = raw.output.get_or_insert_with(RawOutput::default);
            if self.traces {
                out.traces = Some(true);
            }
            if self.dump {
                out.dump_runs = Some(true);
            }
        }
        ExperimentConfig::resolve(raw)
    }
}

fn report(written: &Written) {
    for f in &written.files {
        println!("wrote {}", f.display());
    }
}

fn prepare(args: ExperimentArgs, preset: &str) -> Result<ExperimentConfig> {
    let (cfg, warnings) = args.resolve(preset)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Heights(args) => {
            let cfg = prepare(args, "desk")?;
            let (outcome, written) = run::heights(&cfg)?;
            report(&written);
            println!("scheme,N,n,mean_rescaled,var_rescaled,censor_rate");
            for r in &outcome.summary {
                println!(
                    "{},{},{},{:.4},{:.4},{:.4}",
                    r.scheme, r.particles, r.n, r.mean_rescaled, r.var_rescaled, r.censor_rate
                );
            }
        }
        Command::Fdd(args) => {
            let cfg = prepare(args, "neutral")?;
            let (_, fdd, written) = run::fdd(&cfg)?;
            report(&written);
            println!("scheme,N,n,tv_empirical,tv_conditional,censored");
            for r in &fdd.tv {
                println!(
                    "{},{},{},{:.5},{:.5},{}",
                    r.scheme, r.particles, r.n, r.tv_empirical, r.tv_conditional, r.censored
                );
            }
        }
        Command::Scaling(args) => {
            let cfg = prepare(args, "neutral")?;
            let (_, scaling, written) = run::scaling(&cfg)?;
            report(&written);
            println!("scheme,n,quantity,slope,ci_low,ci_high");
            for f in &scaling.fits {
                println!("{},{},{},{:.4},{:.4},{:.4}", f.scheme, f.n, f.quantity, f.slope, f.ci_low, f.ci_high);
            }
        }
        Command::Plot { summary, out_dir } => {
            let summary = summary.unwrap_or_else(|| out_dir.join("summary.csv"));
            report(&run::plot(&summary, &out_dir)?);
        }
        Command::Oracle {
            max_particles,
            max_blocks,
            out_dir,
        } => {
            let (worst, worst_row, written) = run::oracle(&out_dir, max_particles, max_blocks)?;
            report(&written);
            println!("max_abs_diff={worst:e} max_row_sum_error={worst_row:e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    match e.kind() {
        "config" | "input" | "parse" | "size_guard" => 2,
        _ => 1,
    }
}
