use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dg_cli::check::{run_checks, CheckOptions};
use dg_cli::config::{self, SweepSection};
use dg_cli::{oracle_cmd, resolve_workers, run, sweep, CliError};

#[derive(Parser)]
#[command(name = "dg", version, about = "Diffusive-Gutzwiller trajectories for driven-dissipative Bose-Hubbard lattices")]
struct Cli {
    /// Worker threads (DG_WORKERS overrides; default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write timeseries.csv, corrmap.csv and summary.json.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one ensemble per value of a config field and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Field to vary (j_hop, delta, u, g2, gamma1, gamma2, dt).
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        /// Leave delta fixed while sweeping j_hop.
        #[arg(long)]
        independent_delta: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the exact master equation for a one- or two-site config.
    Oracle {
        config: PathBuf,
        /// Runge-Kutta step (default: integration.dt).
        #[arg(long)]
        dt_rk: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant battery; exit 0 iff every check passes.
    Check {
        /// Fewer trajectories in the statistical checks.
        #[arg(long)]
        fast: bool,
        /// Step for the dt-convergence check.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Redo the analysis of a finished run directory.
    Analyze {
        run_dir: PathBuf,
        #[arg(long)]
        noise_floor: Option<f64>,
        #[arg(long)]
        steady_state_start: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let workers = resolve_workers(cli.workers)?;
            let loaded = config::load(&config)?;
            warn_all(&loaded.warnings);
            let dir = out.unwrap_or_else(|| PathBuf::from(&loaded.config.output.directory));
            let summary = run::execute(&loaded.config, &loaded.warnings, &dir, workers)?;
            warn_all(&summary.warnings[loaded.warnings.len()..]);
            println!(
                "wrote {} (density_ss = {:.6} ± {:.2e}, {:.1} s)",
                dir.display(),
                summary.steady_state.density,
                summary.steady_state.density_stderr,
                summary.runtime_seconds.unwrap_or(0.0)
            );
            Ok(())
        }
        Command::Sweep { config, axis, values, independent_delta, out } => {
            let workers = resolve_workers(cli.workers)?;
            let loaded = config::load(&config)?;
            warn_all(&loaded.warnings);
            let base = loaded.config;
            let mut sw = base.sweep.clone().unwrap_or(SweepSection {
                axis: "j_hop".into(),
                values: Vec::new(),
                slave_delta: true,
            });
            if let Some(a) = axis {
                sw.axis = a;
            }
            if let Some(v) = values {
                sw.values = v;
            }
            if independent_delta {
                sw.slave_delta = false;
            }
            if sw.values.is_empty() {
                return Err(CliError::Config("sweep needs --values or a sweep section in the config".into()));
            }
            if !config::SWEEP_AXES.contains(&sw.axis.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown sweep axis {:?}; expected one of {}",
                    sw.axis,
                    config::SWEEP_AXES.join(", ")
                )));
            }
            if sw.axis == "j_hop" && !sw.slave_delta {
                eprintln!("warning: sweeping j_hop with delta held fixed");
            }
            let dir = out.unwrap_or_else(|| PathBuf::from(&base.output.directory));
            let points = sweep::execute_sweep(&base, &sw, &loaded.warnings, &dir, workers, |p| match &p.result {
                Ok(s) => println!(
                    "point {} {} = {}: density_ss = {:.6}",
                    p.index, sw.axis, p.value, s.steady_state.density
                ),
                Err(e) => eprintln!("point {} {} = {} failed: {e}", p.index, sw.axis, p.value),
            })?;
            let failed = points.iter().filter(|p| p.result.is_err()).count();
            println!("wrote {}", dir.join("sweep.csv").display());
            if failed > 0 {
                return Err(CliError::Other(format!("{failed} of {} sweep points failed", points.len())));
            }
            Ok(())
        }
        Command::Oracle { config, dt_rk, out } => {
            let loaded = config::load(&config)?;
            warn_all(&loaded.warnings);
            let dir = out.unwrap_or_else(|| PathBuf::from(&loaded.config.output.directory));
            let s = oracle_cmd::execute(&loaded.config, &dir, dt_rk)?;
            println!(
                "wrote {} (final occupation {:?}, max trace error {:.1e})",
                dir.display(),
                s.final_occupation,
                s.max_trace_error
            );
            Ok(())
        }
        Command::Check { fast, dt } => {
            let workers = resolve_workers(cli.workers)?;
            let opts = CheckOptions { fast, dt, workers };
            let results = run_checks(&opts, |r| println!("{}", r.line()));
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Other(format!("failed checks: {}", failed.join(", "))))
            }
        }
        Command::Analyze { run_dir, noise_floor, steady_state_start } => {
            let s = run::reanalyze(&run_dir, noise_floor, steady_state_start)?;
            let text = serde_json::to_string_pretty(&s).map_err(|e| CliError::Other(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}
