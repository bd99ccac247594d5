//! Command line: `blowup-lab ode|simulate|energy-report|sweep --config <file>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blowup_lab::config::{RunConfig, SweepConfig};
use blowup_lab::runner;
use blowup_lab::Error;

#[derive(Parser)]
#[command(
    name = "blowup-lab",
    version,
    about = "Finite-time blow-up laboratory for log-damped semilinear wave equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the space-independent equation to blow-up and fit the rate.
    Ode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the wave solver to blow-up; write snapshots and the surface T(x).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transform snapshots to similarity variables and evaluate every
    /// functional; runs `simulate` first if the output directory is empty.
    EnergyReport {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep of independent runs and aggregate a summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_text(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn real_main() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ode { config, out } => {
            let cfg = RunConfig::from_json(&load_text(config)?)?;
            let dir = runner::resolve_out_dir(&cfg.output.dir, out.as_ref());
            let fit = runner::run_ode(&cfg, &dir)?;
            println!(
                "ode: T_est = {:.6}, exponent = {:.4}, amplitude = {:.4} -> {}",
                fit.t_est,
                fit.exponent_est,
                fit.kappa_est,
                dir.display()
            );
        }
        Command::Simulate { config, out } => {
            let cfg = RunConfig::from_json(&load_text(config)?)?;
            let dir = runner::resolve_out_dir(&cfg.output.dir, out.as_ref());
            let art = runner::run_simulate(&cfg, &dir)?;
            println!(
                "simulate: T(x0) = {:.6}, slope = {:.4}, non-characteristic = {} -> {}",
                art.t_hat,
                art.nc.slope,
                matches!(art.nc.verdict, blowup_lab::wave::Verdict::NonCharacteristic),
                dir.display()
            );
        }
        Command::EnergyReport { config, out } => {
            let cfg = RunConfig::from_json(&load_text(config)?)?;
            let dir = runner::resolve_out_dir(&cfg.output.dir, out.as_ref());
            let outcome = runner::run_energy_report(&cfg, &dir)?;
            println!(
                "energy-report: theta = {:.4}, monotone = {}, worst excess = {:.3e} -> {}",
                outcome.theta,
                outcome.mono.pass(),
                outcome.mono.worst_excess,
                dir.display()
            );
        }
        Command::Sweep { config, out } => {
            let cfg = SweepConfig::from_json(&load_text(config)?)?;
            let dir = runner::resolve_out_dir(&cfg.base.output.dir, out.as_ref());
            let rows = runner::run_sweep(&cfg, &dir)?;
            println!("sweep: {} runs ok -> {}", rows.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(runner::exit_code(&err) as u8)
        }
    }
}
