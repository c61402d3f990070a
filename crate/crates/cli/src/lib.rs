//! Driver for diffusive-Gutzwiller ensemble runs: config loading, run
//! orchestration, CSV/JSON persistence and the self-check battery.

pub mod check;
pub mod config;
pub mod oracle_cmd;
pub mod output;
pub mod run;
pub mod sweep;

use std::fmt;

use dg_core::DgError;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Integration failed (exit 3).
    Numerical { message: String, replay_seed: Option<u64> },
    /// Anything else, including file I/O and failed checks (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error:\n{m}"),
            CliError::Numerical { message, replay_seed } => {
                write!(f, "numerical failure: {message}")?;
                if let Some(seed) = replay_seed {
                    write!(f, "\nreplay seed: {seed}")?;
                }
                Ok(())
            }
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<DgError> for CliError {
    fn from(e: DgError) -> Self {
        let replay_seed = e.replay_seed();
        let root = match &e {
            DgError::Trajectory { source, .. } => source.as_ref(),
            other => other,
        };
        match root {
            DgError::NumericalCollapse { .. } | DgError::Divergence { .. } | DgError::Positivity { .. } => {
                CliError::Numerical { message: e.to_string(), replay_seed }
            }
            DgError::InsufficientData { .. } | DgError::RateUnresolvable(_) => CliError::Other(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv error: {e}"))
    }
}

/// Worker count: `DG_WORKERS` wins over the flag, which wins over the
/// machine's available parallelism.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("DG_WORKERS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("DG_WORKERS must be a positive integer, got {v:?}"))),
        };
    }
    match flag {
        Some(0) => Err(CliError::Config("--workers must be >= 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}
