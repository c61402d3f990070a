//! `dg sweep`: independent runs along one config axis plus a combined table.

use std::path::Path;

use dg_core::ensemble::mix_seed;

use crate::config::{RunConfig, SweepSection};
use crate::output::{num, Provenance, Table};
use crate::run::{execute, Summary};
use crate::CliError;

/// One sweep point's outcome.
#[derive(Debug)]
pub struct Point {
    pub index: usize,
    pub value: f64,
    pub config: RunConfig,
    pub result: Result<Summary, CliError>,
}

/// Config of point `index`: the axis value applied and the master seed
/// replaced by `mix_seed(master_seed, index)`, so each point can be rerun
/// alone with `dg run`.
pub fn point_config(base: &RunConfig, sweep: &SweepSection, index: usize) -> Result<RunConfig, CliError> {
    let mut cfg = base.clone();
    cfg.sweep = None;
    cfg.set_axis(&sweep.axis, sweep.values[index], sweep.slave_delta)?;
    cfg.ensemble.master_seed = mix_seed(base.ensemble.master_seed, index as u64);
    let (errors, _) = cfg.review();
    if !errors.is_empty() {
        let msgs: Vec<String> = errors.iter().map(|(s, m)| format!("{s}: {m}")).collect();
        return Err(CliError::Config(format!(
            "sweep point {index} ({} = {}): {}",
            sweep.axis,
            sweep.values[index],
            msgs.join("; ")
        )));
    }
    Ok(cfg)
}

/// Runs every point in order into `dir/point_NNN` and writes `dir/sweep.csv`.
/// A failing point is recorded and the sweep moves on.
pub fn execute_sweep(
    base: &RunConfig,
    sweep: &SweepSection,
    warnings: &[String],
    dir: &Path,
    workers: usize,
    mut progress: impl FnMut(&Point),
) -> Result<Vec<Point>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut whole = base.clone();
    whole.sweep = Some(sweep.clone());
    std::fs::write(dir.join("config.json"), whole.to_json())?;

    let mut points = Vec::with_capacity(sweep.values.len());
    for index in 0..sweep.values.len() {
        let value = sweep.values[index];
        let (config, result) = match point_config(base, sweep, index) {
            Ok(cfg) => {
                let sub = dir.join(format!("point_{index:03}"));
                let result = execute(&cfg, warnings, &sub, workers);
                (cfg, result)
            }
            Err(e) => (base.clone(), Err(e)),
        };
        let point = Point { index, value, config, result };
        progress(&point);
        points.push(point);
    }

    let prov = Provenance { config_sha256: whole.hash(), master_seed: base.ensemble.master_seed };
    write_table(&dir.join("sweep.csv"), &prov, &sweep.axis, &points)?;
    Ok(points)
}

fn write_table(path: &Path, prov: &Provenance, axis: &str, points: &[Point]) -> Result<(), CliError> {
    let header = [
        "point",
        axis,
        "j_hop",
        "delta",
        "master_seed",
        "density_ss",
        "density_ss_stderr",
        "alpha_abs_ss",
        "xi",
        "power_law_exponent",
        "gamma_eff_density",
        "gamma_eff_alpha_abs",
        "status",
    ]
    .map(String::from);
    let mut table = Table::create(path, "dg sweep", prov, &header)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for p in points {
        let mut row = vec![
            p.index.to_string(),
            num(p.value),
            num(p.config.model.j_hop),
            num(p.config.model.delta),
            p.config.ensemble.master_seed.to_string(),
        ];
        match &p.result {
            Ok(s) => {
                let corr = s.correlation.as_ref();
                row.extend([
                    num(s.steady_state.density),
                    num(s.steady_state.density_stderr),
                    num(s.steady_state.alpha_abs),
                    opt(corr.and_then(|c| c.exponential.value())),
                    opt(corr.and_then(|c| c.power_law.value())),
                    opt(s.relaxation_density.value()),
                    opt(s.relaxation_alpha_abs.value()),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(format!("failed: {}", e.to_string().replace('\n', " ")));
            }
        }
        table.row(row)?;
    }
    table.finish()
}
