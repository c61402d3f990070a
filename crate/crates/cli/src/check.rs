//! `dg check`: a fast battery of invariants, one tab-separated line each.

use dg_core::analysis::{fit_exponential, fit_power_law, fit_relaxation, Projected};
use dg_core::ensemble::{macroscopic_series, run_ensemble_with_workers, EnsembleAccumulator, EnsembleConfig};
use dg_core::fock;
use dg_core::lattice::LatticeGeometry;
use dg_core::model::{build_local_model, ModelParams};
use dg_core::oracle::{evolve_exact, jump_gutzwiller_compare, ExactOptions};
use dg_core::sse::{integrate, no_remap, run_trajectory, Schedule, Stepper, TrajectoryState};
use dg_core::Result;

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Fewer trajectories in the statistical checks.
    pub fast: bool,
    /// Step used by the dt-convergence check (default 2e-3).
    pub dt: Option<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub metric: String,
}

impl CheckResult {
    /// `name<TAB>PASS|FAIL<TAB>metric`
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{}\t{status}\t{}", self.name, self.metric)
    }
}

type Check = fn(&CheckOptions) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 7] = [
    ("vacuum_fixed_point", vacuum_fixed_point),
    ("parity_equivariance", parity_equivariance),
    ("norm_preservation", norm_preservation),
    ("oracle_match_j0", oracle_match_j0),
    ("dt_convergence", dt_convergence),
    ("jump_zero_coherence", jump_zero_coherence),
    ("fitter_roundtrip", fitter_roundtrip),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check in order, reporting each through `report` as it ends.
pub fn run_checks(opts: &CheckOptions, mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, metric) = match check(opts) {
                Ok(r) => r,
                Err(e) => (false, format!("error={e}")),
            };
            let r = CheckResult { name, passed, metric };
            report(&r);
            r
        })
        .collect()
}

fn regime(j: f64, cutoff: usize) -> ModelParams {
    ModelParams::reference_regime(j, cutoff)
}

fn ensemble(opts: &CheckOptions, model: ModelParams, geom: LatticeGeometry, schedule: Schedule, n_traj: u64) -> Result<EnsembleAccumulator> {
    run_ensemble_with_workers(&EnsembleConfig::new(model, geom, schedule, n_traj, 0x5eed), opts.workers)
}

fn vacuum_fixed_point(opts: &CheckOptions) -> Result<(bool, String)> {
    let model = ModelParams { g2: 0.0, ..regime(1.0, 8) };
    let schedule = Schedule { dt: 2e-3, t_final: 2.0, sample_interval: 0.5 };
    let acc = ensemble(opts, model, LatticeGeometry::square(3)?, schedule, 16)?;
    let worst = acc
        .occupation
        .iter()
        .map(|w| w.mean.abs())
        .chain(acc.coherence.iter().map(|w| w.mean.norm()))
        .chain(acc.alpha_abs.iter().map(|w| w.mean))
        .fold(0.0, f64::max);
    Ok((worst <= 1e-14, format!("max_abs={worst:e}")))
}

fn parity_equivariance(_: &CheckOptions) -> Result<(bool, String)> {
    let geom = LatticeGeometry::square(5)?;
    let model = build_local_model(regime(1.0, 8))?;
    let schedule = Schedule { dt: 2e-3, t_final: 1.0, sample_interval: 0.1 };
    let mut stepper = Stepper::new(&model, &geom, schedule.dt, false)?;
    let state = || TrajectoryState::vacuum(25, 8, 99);
    let plain = run_trajectory(state(), &mut stepper, &schedule, |_| {}, no_remap)?;
    let flipped = run_trajectory(state(), &mut stepper, &schedule, |_| {}, |noise| {
        noise.iter_mut().for_each(|z| z.dw1 = -z.dw1)
    })?;
    let (mut rel_n, mut sum_a) = (0.0_f64, 0.0_f64);
    for k in 0..plain.times.len() {
        for s in 0..25 {
            let (n1, n2) = (plain.occupation[k][s], flipped.occupation[k][s]);
            rel_n = rel_n.max((n1 - n2).abs() / n1.abs().max(1e-300));
            sum_a = sum_a.max((plain.coherence[k][s] + flipped.coherence[k][s]).norm());
        }
    }
    Ok((rel_n < 1e-10 && sum_a < 1e-10, format!("rel_n={rel_n:e} sum_a={sum_a:e}")))
}

fn norm_preservation(_: &CheckOptions) -> Result<(bool, String)> {
    let geom = LatticeGeometry::square(3)?;
    let model = build_local_model(regime(1.0, 8))?;
    let schedule = Schedule { dt: 2e-3, t_final: 2.0, sample_interval: 0.5 };
    let mut stepper = Stepper::new(&model, &geom, schedule.dt, true)?;
    let mut state = TrajectoryState::vacuum(9, 8, 3);
    integrate(&mut state, &mut stepper, &schedule, |_| {}, no_remap)?;
    let worst = (0..9)
        .map(|s| (fock::norm_sqr(state.site(s)).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("max_norm_error={worst:e}")))
}

/// Exact `<n>(t)` of a single site from the vacuum.
fn exact_density(model: ModelParams, t_final: f64, sample_interval: f64) -> Result<Vec<f64>> {
    let ev = evolve_exact(model, 1, &ExactOptions::new(t_final, 1e-3, sample_interval))?;
    Ok(ev.occupation.iter().map(|v| v[0]).collect())
}

fn oracle_match_j0(opts: &CheckOptions) -> Result<(bool, String)> {
    let model = regime(0.0, 12);
    let schedule = Schedule { dt: 1e-3, t_final: 3.0, sample_interval: 0.1 };
    let n_traj = if opts.fast { 400 } else { 2000 };
    let acc = ensemble(opts, model, LatticeGeometry::chain(1)?, schedule, n_traj)?;
    let series = macroscopic_series(&acc)?;
    let exact = exact_density(model, schedule.t_final, schedule.sample_interval)?;
    let within = exact
        .iter()
        .zip(series.density.iter().zip(&series.density_stderr))
        .filter(|(x, (m, se))| (*m - *x).abs() <= (3.0 * *se).max(1e-12))
        .count();
    let frac = within as f64 / exact.len() as f64;
    Ok((frac >= 0.9, format!("fraction_within_3se={frac:.3} n_traj={n_traj}")))
}

fn dt_convergence(opts: &CheckOptions) -> Result<(bool, String)> {
    let model = regime(0.0, 10);
    let dt = opts.dt.unwrap_or(2e-3);
    let n_traj = if opts.fast { 500 } else { 2000 };
    let (t_final, sample_interval) = (3.0, 0.5);
    let exact = *exact_density(model, t_final, sample_interval)?.last().unwrap();
    let mut worst = 0.0_f64;
    let mut values = Vec::new();
    for step in [dt, dt / 2.0] {
        let schedule = Schedule { dt: step, t_final, sample_interval };
        let acc = ensemble(opts, model, LatticeGeometry::chain(1)?, schedule, n_traj)?;
        let series = macroscopic_series(&acc)?;
        let (m, se) = (*series.density.last().unwrap(), *series.density_stderr.last().unwrap());
        worst = worst.max((m - exact).abs() / se);
        values.push(m);
    }
    Ok((
        worst <= 4.0,
        format!("dt={dt:e} n={:.5} n_half={:.5} exact={exact:.5} max_dev_sigma={worst:.2}", values[0], values[1]),
    ))
}

fn jump_zero_coherence(opts: &CheckOptions) -> Result<(bool, String)> {
    let schedule = Schedule { dt: 1e-3, t_final: 2.0, sample_interval: 0.5 };
    let n_traj = if opts.fast { 5 } else { 20 };
    let cmp = jump_gutzwiller_compare(regime(1.0, 8), &LatticeGeometry::square(3)?, n_traj, &schedule, 11)?;
    let worst = cmp.max_abs_coherence();
    Ok((worst <= 1e-12 && cmp.jumps > 0, format!("max_abs_a={worst:e} jumps={}", cmp.jumps)))
}

fn fitter_roundtrip(_: &CheckOptions) -> Result<(bool, String)> {
    let profile = |f: &dyn Fn(f64) -> f64| {
        let displacement: Vec<isize> = (-10..=10).collect();
        Projected {
            g: displacement.iter().map(|&i| f(i.unsigned_abs().max(1) as f64)).collect(),
            stderr: vec![0.0; displacement.len()],
            displacement,
        }
    };
    let exp_data = profile(&|i| 0.7 * (-i / 2.5).exp());
    let pow_data = profile(&|i| 0.7 * i.powf(-1.3));
    let xi = fit_exponential(&exp_data, 0.0)?;
    let p = fit_power_law(&pow_data, 0.0)?;
    let t: Vec<f64> = (0..1001).map(|k| k as f64 * 0.1).collect();
    let v: Vec<f64> = t.iter().map(|t| 3.0 + 2.0 * (-0.8 * t).exp()).collect();
    let rate = fit_relaxation(&t, &v)?;
    let err = (xi.rate_or_length - 2.5)
        .abs()
        .max((p.rate_or_length - 1.3).abs())
        .max((rate.rate_or_length - 0.8).abs());
    let discriminates = xi.residual_rms < fit_power_law(&exp_data, 0.0)?.residual_rms
        && p.residual_rms < fit_exponential(&pow_data, 0.0)?.residual_rms;
    Ok((err < 1e-9 && discriminates, format!("max_param_error={err:e} discriminates={discriminates}")))
}
