use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use chdbc::eoc::Axis;
use chdbc_cli::commands::{self, Overrides};
use chdbc_cli::config::parse_xi;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chdbc", version, about = "Cahn-Hilliard with dynamic boundary conditions, linear SAV finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Configuration file (TOML); may also be given positionally.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Mesh level, or comma-separated levels for an h study.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long)]
    tau: Option<f64>,
    /// Adsorption rate; `inf` selects the limit model.
    #[arg(long, value_parser = parse_xi)]
    xi: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// VTK snapshot cadence in steps; 0 disables snapshots.
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write diagnostics.csv, VTK snapshots and energy.svg.
    Run {
        #[arg(value_name = "CONFIG")]
        config_file: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Convergence study with respect to h, tau, xi or 1/xi.
    Eoc {
        #[arg(value_name = "CONFIG")]
        config_file: Option<PathBuf>,
        #[arg(long, value_parser = |s: &str| s.parse::<Axis>().map_err(|e| e.to_string()))]
        axis: Option<Axis>,
        /// Use the published resolutions (hours of runtime, several GB of memory).
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check energy identity, conservation, fixed points and the xi = inf constraint.
    Validate {
        #[arg(value_name = "CONFIG")]
        config_file: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute published EOC columns from the published error columns.
    PaperTables,
}

fn overrides(c: &Common, axis: Option<Axis>) -> Overrides {
    Overrides {
        output_dir: c.output_dir.clone(),
        axis,
        levels: c.levels.clone(),
        tau: c.tau,
        xi: c.xi,
        t_end: c.t_end,
        snapshot_every: c.snapshot_every,
    }
}

fn config_path(positional: Option<PathBuf>, c: &Common) -> Result<Option<PathBuf>> {
    match (positional, &c.config) {
        (Some(_), Some(_)) => anyhow::bail!("give the configuration either positionally or with --config"),
        (Some(p), None) => Ok(Some(p)),
        (None, p) => Ok(p.clone()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    chdbc_cli::init_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config_file: config, common } => {
            let path = config_path(config, &common)?;
            let cfg = commands::load_config(path.as_deref(), &overrides(&common, None))?;
            let summary = commands::run(&cfg)?;
            println!(
                "finished at t = {} after {} steps; diagnostics in {}, {} snapshot(s)",
                summary.final_state.t,
                summary.final_state.n,
                summary.csv.display(),
                summary.snapshots.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eoc { config_file: config, axis, full, common } => {
            let path = config_path(config, &common)?;
            let cfg = commands::load_config(path.as_deref(), &overrides(&common, axis))?;
            let (report, out) = commands::eoc(&cfg, axis, full)?;
            print!("{}", report.to_csv());
            println!("written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config_file: config, common } => {
            let path = config_path(config, &common)?;
            let cfg = commands::load_config(path.as_deref(), &overrides(&common, None))?;
            let checks = commands::validate_cmd(&cfg)?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::PaperTables => {
            let (text, ok) = commands::paper_tables();
            print!("{text}");
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
