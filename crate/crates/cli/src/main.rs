use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robreg_cli::{
    cmd_certify, cmd_etc_bounds, cmd_reproduce_example1, cmd_simulate, cmd_sweep, cmd_synthesize, cmd_validate,
    CliError, GlobalOptions, SweepTable,
};
use robreg_core::etc_bounds::Bound;

/// Robust output regulation: synthesis, certification, event-triggered bounds
/// and simulation.
///
/// Every flag may also be set through the environment variable shown in its
/// help; an explicit flag wins.
#[derive(Debug, Parser)]
#[command(name = "robreg", version)]
struct Cli {
    /// Seed for realizations and jittered schedules.
    #[arg(long, global = true, env = "ROBREG_SEED")]
    seed: Option<u64>,
    /// Interior-point tolerance.
    #[arg(long, global = true, env = "ROBREG_TOL")]
    tol: Option<f64>,
    /// Maximum outer iterations of the synthesis.
    #[arg(long, global = true, env = "ROBREG_MAX_ITER")]
    max_iter: Option<usize>,
    /// Worker threads for sweeps and parallel solves.
    #[arg(long, global = true, env = "ROBREG_JOBS")]
    jobs: Option<usize>,
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, env = "ROBREG_OUT_DIR", default_value = "robreg-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a problem file.
    Validate { problem: PathBuf },
    /// Synthesize controller gains and their certificate.
    Synthesize {
        problem: PathBuf,
        /// Bound on the spectral norm of the stacked gain matrix.
        #[arg(long)]
        gain_bound: Option<f64>,
    },
    /// Certify given gains.
    Certify {
        problem: PathBuf,
        gains: PathBuf,
        /// Comma-separated list of zeta values.
        #[arg(long, value_delimiter = ',')]
        zeta_grid: Option<Vec<f64>>,
    },
    /// Sampling and error bounds of the event-triggered implementation.
    EtcBounds {
        certificate: PathBuf,
        #[arg(long)]
        q0: f64,
        #[arg(long)]
        q1: f64,
        #[arg(long)]
        h_bar: f64,
        /// Defaults to the model's k_b.
        #[arg(long)]
        k_b: Option<f64>,
    },
    /// Simulate one closed-loop run to trajectory.csv.
    Simulate { certificate: PathBuf, config: PathBuf },
    /// Run a k_b or threshold sweep to table.csv.
    Sweep { certificate: PathBuf, config: PathBuf },
    /// Run the numerical example end to end.
    ReproduceExample1 {
        /// Replaces the built-in preset.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn bound(b: Bound) -> String {
    match b {
        Bound::Defined(v) => format!("{v:e}"),
        Bound::Undefined => "undefined".into(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = GlobalOptions {
        seed: cli.seed,
        tol: cli.tol,
        max_iter: cli.max_iter,
        jobs: cli.jobs,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Validate { problem } => {
            for line in cmd_validate(&problem, &g)? {
                println!("{line}");
            }
        }
        Command::Synthesize { problem, gain_bound } => {
            let c = cmd_synthesize(&problem, gain_bound, &g)?;
            println!("alpha = {:e}, zeta = {:e}, alpha/zeta = {:e}", c.alpha, c.zeta, c.objective);
        }
        Command::Certify { problem, gains, zeta_grid } => {
            let c = cmd_certify(&problem, &gains, zeta_grid, &g)?;
            println!("alpha = {:e}, zeta = {:e}, alpha/zeta = {:e}", c.alpha, c.zeta, c.objective);
        }
        Command::EtcBounds { certificate, q0, q1, h_bar, k_b } => {
            let e = cmd_etc_bounds(&certificate, q0, q1, h_bar, k_b, &g)?;
            println!("h_max = {}, eps_d = {}", bound(e.h_max), bound(e.eps_d));
        }
        Command::Simulate { certificate, config } => {
            let t = cmd_simulate(&certificate, &config, &g)?;
            println!(
                "tail error = {:e}, event rate = {:e}",
                t.regulation_error_tail, t.event_rate
            );
        }
        Command::Sweep { certificate, config } => {
            let rows = match cmd_sweep(&certificate, &config, &g)? {
                SweepTable::Kb(r) => r.len(),
                SweepTable::Threshold(r) => r.len(),
            };
            println!("{rows} rows written");
        }
        Command::ReproduceExample1 { config } => {
            let s = cmd_reproduce_example1(config.as_deref(), &g)?;
            let c = &s.certificate;
            println!("alpha = {:e}, zeta = {:e}, alpha/zeta = {:e}", c.alpha, c.zeta, c.objective);
            match s.h_max_best {
                Some((q1, h)) => println!("h_max = {h:e} at q1 = {q1:e}"),
                None => println!("h_max undefined"),
            }
            println!("outputs in {}", g.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().replace('\n', " "));
            eprintln!("{}", err.structured());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.structured());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
