use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsoc::scenarios::ControlMode;
use lsoc_harness::{load_config_with, run_experiment, HarnessError, Mode, Overrides, Summary};

/// Output directory used when neither `--out` nor the config names one.
const OUT_ENV: &str = "LSOC_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "lsoc",
    version,
    about = "Solve, compose and run linearly solvable control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every component task of a grid scenario and cache the tables
    Solve(Common),
    /// Run the team under one component task's controller
    Rollout {
        /// Component task index
        #[arg(long)]
        component: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the team under the composite controller
    Compose(Common),
    /// Compare composed and directly solved composite tasks (grid only)
    Compare(Common),
    /// Print the kernel weights of every subsystem
    Weights(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    /// grid, uav-example1 or uav-example2
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded runs
    #[arg(long)]
    runs: Option<usize>,
    /// Rollouts per control estimate
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    /// Rollout horizon in steps
    #[arg(long)]
    horizon: Option<usize>,
    /// Desirability solver tolerance
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Output directory [default: $LSOC_OUT_DIR, then lsoc-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// receding or tape
    #[arg(long)]
    mode: Option<ControlMode>,
}

fn run(cli: Cli) -> Result<Summary, HarnessError> {
    let (mode, component, common) = match cli.command {
        Command::Solve(c) => (Mode::SolveComponent, None, c),
        Command::Rollout { component, common } => (Mode::RunComponent, component, common),
        Command::Compose(c) => (Mode::Compose, None, c),
        Command::Compare(c) => (Mode::Compare, None, c),
        Command::Weights(c) => (Mode::Weights, None, c),
    };
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?,
        None => String::new(),
    };
    let overrides = Overrides {
        scenario: common.scenario,
        mode: Some(mode),
        seed: common.seed,
        runs: common.runs,
        component,
        samples: common.samples,
        dt: common.dt,
        horizon: common.horizon,
        tol: common.tol,
        control: common.mode,
        out: common.out,
    };
    let config = load_config_with(&text, &overrides)?;
    let out = config
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lsoc-out"));
    let summary = run_experiment(&config, &out)?;
    report(&summary, &out);
    Ok(summary)
}

fn report(s: &Summary, out: &std::path::Path) {
    println!(
        "scenario {} | mode {} | fingerprint {}",
        s.scenario,
        s.mode,
        &s.fingerprint[..16]
    );
    for (i, w) in s.weights.iter().enumerate() {
        println!("subsystem {} kernel weights {:?}", i + 1, w);
    }
    for c in &s.caches {
        match &c.report {
            Some(r) => println!(
                "subsystem {} component {}: {} iterations, residual {:.2e} -> {}",
                c.subsystem, c.component, r.iterations, r.residual, c.file
            ),
            None => println!("subsystem {} component {}: {}", c.subsystem, c.component, c.file),
        }
    }
    for (i, e) in s.spectral.iter().enumerate() {
        println!(
            "subsystem {} spectral radius {:.6} (upper bound {:.6})",
            i + 1,
            e.estimate,
            e.upper
        );
    }
    for (i, r) in s.comparisons.iter().enumerate() {
        println!(
            "subsystem {} max |Z gap| {:.3e}, max TV gap {:.3e}: {}",
            i + 1,
            r.max_z_gap,
            r.max_tv_gap,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    for r in &s.runs {
        let costs: Vec<String> = r.total_costs.iter().map(|c| format!("{c:.3}")).collect();
        println!(
            "seed {}: {} steps, {}, total costs [{}]",
            r.seed,
            r.steps,
            if r.success {
                "reached target"
            } else {
                "missed target"
            },
            costs.join(", ")
        );
    }
    if !s.runs.is_empty() {
        println!("{}/{} runs reached the target", s.successes, s.runs.len());
    }
    println!("{} files written to {}", s.files.len(), out.display());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
