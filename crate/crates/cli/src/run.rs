//! `dg run` and `dg analyze`: one ensemble, its analysis and its files.

use std::path::Path;
use std::time::Instant;

use dg_core::analysis::{
    correlation_map, fit_exponential, fit_power_law, fit_relaxation, project_1d, with_extent_caveat,
    CorrelationMap, FitResult, MapMode,
};
use dg_core::ensemble::{late_time_mean, macroscopic_series, run_ensemble_with_workers, EnsembleAccumulator};
use dg_core::sse::TAIL_WARN_THRESHOLD;
use serde::{Deserialize, Serialize};

use crate::config::{self, RunConfig};
use crate::output::{num, read_json, write_json, Provenance, Table};
use crate::CliError;

/// A fit, or the reason it could not be made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FitOutcome {
    fn from(r: dg_core::Result<FitResult>) -> Self {
        match r {
            Ok(fit) => Self { fit: Some(fit), error: None },
            Err(e) => Self { fit: None, error: Some(e.to_string()) },
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.rate_or_length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub t_start: f64,
    pub density: f64,
    /// Mean per-sample standard error over the late window.
    pub density_stderr: f64,
    pub alpha_abs: f64,
    pub alpha_abs_stderr: f64,
    pub positive_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub map_mode: MapMode,
    pub noise_floor: f64,
    pub exponential: FitOutcome,
    pub power_law: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub n_traj: u64,
    pub n_sites: usize,
    #[serde(default)]
    pub runtime_seconds: Option<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub steady_state: SteadyState,
    pub correlation: Option<CorrelationSummary>,
    pub relaxation_density: FitOutcome,
    pub relaxation_alpha_abs: FitOutcome,
    pub max_tail_population: f64,
    pub warnings: Vec<String>,
}

pub fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance { config_sha256: cfg.hash(), master_seed: cfg.ensemble.master_seed }
}

/// Runs the ensemble described by `cfg` and writes every output into `dir`.
pub fn execute(cfg: &RunConfig, warnings: &[String], dir: &Path, workers: usize) -> Result<Summary, CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.json"), cfg.to_json())?;
    let started = Instant::now();
    let acc = run_ensemble_with_workers(&cfg.ensemble_config(), workers)?;
    let runtime = started.elapsed().as_secs_f64();

    let mut summary = analyze(cfg, &acc, warnings)?;
    summary.runtime_seconds = Some(runtime);
    summary.workers = Some(workers);
    write_outputs(dir, cfg, &acc, &summary)?;
    if cfg.output.accumulator {
        write_json(&dir.join("accumulator.json"), &acc)?;
    }
    Ok(summary)
}

/// Steady-state values, correlation fits and relaxation rates of a finished
/// ensemble.
pub fn analyze(cfg: &RunConfig, acc: &EnsembleAccumulator, warnings: &[String]) -> Result<Summary, CliError> {
    let series = macroscopic_series(acc)?;
    let t_start = cfg.analysis.steady_state_start.unwrap_or(0.0);
    let late = |v: &[f64]| late_time_mean(&series.times, v, t_start).unwrap_or(f64::NAN);
    let steady_state = SteadyState {
        t_start,
        density: late(&series.density),
        density_stderr: late(&series.density_stderr),
        alpha_abs: late(&series.alpha_abs),
        alpha_abs_stderr: late(&series.alpha_abs_stderr),
        positive_fraction: late(&series.positive_fraction),
    };

    let correlation = match correlation_for(cfg, acc)? {
        None => None,
        Some((mode, map)) => {
            let noise_floor = cfg.analysis.noise_floor.unwrap_or_else(|| map.default_noise_floor());
            let g = project_1d(&map);
            Some(CorrelationSummary {
                map_mode: mode,
                noise_floor,
                exponential: FitOutcome::from(
                    fit_exponential(&g, noise_floor).map(|f| with_extent_caveat(f, cfg.lattice.extent)),
                ),
                power_law: FitOutcome::from(fit_power_law(&g, noise_floor)),
            })
        }
    };

    let mut warnings = warnings.to_vec();
    if acc.max_tail > TAIL_WARN_THRESHOLD {
        warnings.push(format!(
            "top two Fock levels reached population {:.2e} (> {TAIL_WARN_THRESHOLD:e}): raise model.cutoff",
            acc.max_tail
        ));
    }

    Ok(Summary {
        provenance: provenance(cfg),
        n_traj: acc.count,
        n_sites: acc.n_sites,
        runtime_seconds: None,
        workers: None,
        steady_state,
        correlation,
        relaxation_density: FitOutcome::from(fit_relaxation(&series.times, &series.density)),
        relaxation_alpha_abs: FitOutcome::from(fit_relaxation(&series.times, &series.alpha_abs)),
        max_tail_population: acc.max_tail,
        warnings,
    })
}

fn correlation_for(cfg: &RunConfig, acc: &EnsembleAccumulator) -> Result<Option<(MapMode, CorrelationMap)>, CliError> {
    if acc.center.is_none() {
        return Ok(None);
    }
    let mode = if acc.window.is_some() { MapMode::Window } else { MapMode::Final };
    Ok(Some((mode, correlation_map(acc, &cfg.lattice, mode)?)))
}

/// timeseries.csv, corrmap.csv, traces.csv (when kept) and summary.json.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, acc: &EnsembleAccumulator, summary: &Summary) -> Result<(), CliError> {
    let prov = provenance(cfg);
    let series = macroscopic_series(acc)?;

    let mut header: Vec<String> = [
        "t",
        "density",
        "density_stderr",
        "alpha_abs",
        "alpha_abs_stderr",
        "alpha_abs_std",
        "positive_fraction",
    ]
    .map(String::from)
    .to_vec();
    header.extend((0..acc.n_sites).map(|s| format!("n_{s}")));
    let mut ts = Table::create(&dir.join("timeseries.csv"), "dg timeseries", &prov, &header)?;
    for k in 0..acc.num_samples() {
        let mut row = vec![
            num(series.times[k]),
            num(series.density[k]),
            num(series.density_stderr[k]),
            num(series.alpha_abs[k]),
            num(series.alpha_abs_stderr[k]),
            num(series.alpha_abs_std[k]),
            num(series.positive_fraction[k]),
        ];
        row.extend((0..acc.n_sites).map(|s| num(acc.occupation[acc.cell(k, s)].mean)));
        ts.row(row)?;
    }
    ts.finish()?;

    if let Some((_, map)) = correlation_for(cfg, acc)? {
        let header = ["di", "dj", "g", "stderr"].map(String::from);
        let mut cm = Table::create(&dir.join("corrmap.csv"), "dg corrmap", &prov, &header)?;
        for (di, dj, g, se) in map.entries() {
            cm.row([di.to_string(), dj.to_string(), num(g), num(se)])?;
        }
        cm.finish()?;
    }

    if !acc.traces.is_empty() {
        let header = ["trajectory", "seed", "t", "density", "alpha_re", "alpha_im"].map(String::from);
        let mut tr = Table::create(&dir.join("traces.csv"), "dg traces", &prov, &header)?;
        for trace in &acc.traces {
            for (k, t) in acc.times.iter().enumerate() {
                tr.row([
                    trace.index.to_string(),
                    trace.seed.to_string(),
                    num(*t),
                    num(trace.density[k]),
                    num(trace.alpha[k].re),
                    num(trace.alpha[k].im),
                ])?;
            }
        }
        tr.finish()?;
    }

    write_json(&dir.join("summary.json"), summary)
}

/// Redoes the analysis of a finished run directory, optionally with new
/// analysis settings, and rewrites its outputs.
pub fn reanalyze(dir: &Path, noise_floor: Option<f64>, steady_state_start: Option<f64>) -> Result<Summary, CliError> {
    let loaded = config::load(&dir.join("config.json"))?;
    let mut cfg = loaded.config;
    let acc: EnsembleAccumulator = read_json(&dir.join("accumulator.json"))?;
    if noise_floor.is_some() {
        cfg.analysis.noise_floor = noise_floor;
    }
    if steady_state_start.is_some() {
        cfg.analysis.steady_state_start = steady_state_start;
    }
    let (errors, _) = cfg.review();
    if let Some((section, msg)) = errors.first() {
        return Err(CliError::Config(format!("{section}: {msg}")));
    }
    let previous: Option<Summary> = read_json(&dir.join("summary.json")).ok();
    let mut summary = analyze(&cfg, &acc, &loaded.warnings)?;
    if let Some(prev) = previous {
        summary.runtime_seconds = prev.runtime_seconds;
        summary.workers = prev.workers;
    }
    std::fs::write(dir.join("config.json"), cfg.to_json())?;
    write_outputs(dir, &cfg, &acc, &summary)?;
    Ok(summary)
}
