//! Trajectory ensembles with streaming, mergeable statistics.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DgError, Result};
use crate::lattice::LatticeGeometry;
use crate::model::{build_local_model, ModelParams};
use crate::sse::{self, DriftScheme, Sample, Schedule, Stepper, TrajectoryState};

/// Trajectories per work unit. Fixed so that the reduction tree, and hence
/// every bit of the result, does not depend on the worker count.
const CHUNK: u64 = 8;

/// Chunks in flight at once.
const BATCH: u64 = 32;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `k` under `master`: `splitmix64(splitmix64(master) ^ k)`.
///
/// Replaying trajectory `k` needs only `(master, k)`.
pub fn mix_seed(master: u64, k: u64) -> u64 {
    splitmix64(splitmix64(master) ^ k)
}

/// Online mean and variance (Welford), mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let wb = other.count as f64 / n as f64;
        self.mean += delta * wb;
        self.m2 += other.m2 + delta * delta * self.count as f64 * wb;
        self.count = n;
    }

    /// Unbiased sample variance, 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Welford statistics of a complex quantity; `m2` holds `Σ|x − mean|²`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexWelford {
    pub count: u64,
    pub mean: Complex64,
    pub m2: f64,
}

impl ComplexWelford {
    pub fn push(&mut self, x: Complex64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        let after = x - self.mean;
        self.m2 += delta.re * after.re + delta.im * after.im;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let wb = other.count as f64 / n as f64;
        self.mean += delta * wb;
        self.m2 += other.m2 + delta.norm_sqr() * self.count as f64 * wb;
        self.count = n;
    }

    /// Total variance `E|x − mean|²` (sum of real and imaginary variances).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Starting point of every trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialState {
    #[default]
    Vacuum,
    /// The same coherent amplitude `[re, im]` on every site.
    Coherent { amplitude: [f64; 2] },
    /// One coherent amplitude per site, in site order.
    CoherentPerSite { amplitudes: Vec<[f64; 2]> },
}

impl InitialState {
    pub fn violations(&self, n_sites: usize) -> Vec<String> {
        match self {
            InitialState::CoherentPerSite { amplitudes } if amplitudes.len() != n_sites => {
                vec![format!(
                    "initial.amplitudes has {} entries, lattice has {} sites",
                    amplitudes.len(),
                    n_sites
                )]
            }
            _ => Vec::new(),
        }
    }

    pub fn build(&self, n_sites: usize, dim: usize, seed: u64) -> Result<TrajectoryState> {
        let c = |a: &[f64; 2]| Complex64::new(a[0], a[1]);
        match self {
            InitialState::Vacuum => Ok(TrajectoryState::vacuum(n_sites, dim, seed)),
            InitialState::Coherent { amplitude } => {
                TrajectoryState::coherent(&vec![c(amplitude); n_sites], dim, seed)
            }
            InitialState::CoherentPerSite { amplitudes } => {
                if amplitudes.len() != n_sites {
                    return Err(DgError::Config(self.violations(n_sites).join("; ")));
                }
                let amps: Vec<_> = amplitudes.iter().map(c).collect();
                TrajectoryState::coherent(&amps, dim, seed)
            }
        }
    }
}

/// Everything needed to run an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub model: ModelParams,
    pub lattice: LatticeGeometry,
    pub schedule: Schedule,
    pub milstein: bool,
    pub scheme: DriftScheme,
    pub initial: InitialState,
    pub n_traj: u64,
    pub master_seed: u64,
    /// Accumulate center-pair products (needs an odd lattice extent).
    pub track_center: bool,
    /// `[t_start, t_end]` over which per-trajectory pair products are
    /// time-averaged before entering the ensemble statistics.
    pub window: Option<(f64, f64)>,
    /// Number of leading trajectories whose macroscopic history is kept.
    pub keep_traces: usize,
}

impl EnsembleConfig {
    pub fn new(model: ModelParams, lattice: LatticeGeometry, schedule: Schedule, n_traj: u64, master_seed: u64) -> Self {
        Self {
            model,
            lattice,
            schedule,
            milstein: false,
            scheme: DriftScheme::default(),
            initial: InitialState::Vacuum,
            n_traj,
            master_seed,
            track_center: false,
            window: None,
            keep_traces: 0,
        }
    }
}

/// Macroscopic history of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTrace {
    pub index: u64,
    pub seed: u64,
    /// Spatial mean of `<n>` per sample.
    pub density: Vec<f64>,
    /// Spatial mean of `<a>` per sample.
    pub alpha: Vec<Complex64>,
}

/// Streaming ensemble statistics over trajectories.
///
/// Per-(sample, site) arrays are stored sample-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAccumulator {
    pub times: Vec<f64>,
    pub n_sites: usize,
    pub center: Option<usize>,
    pub window: Option<(f64, f64)>,
    pub count: u64,
    pub occupation: Vec<Welford>,
    pub coherence: Vec<ComplexWelford>,
    /// `conj(<a>_center) <a>_s` per (sample, site).
    pub pair: Vec<ComplexWelford>,
    /// Per-trajectory window average of the pair product, per site.
    pub window_pair: Vec<ComplexWelford>,
    /// Spatially averaged `<n>` per sample.
    pub density: Vec<Welford>,
    /// `|α|` per sample, α the spatial mean of `<a>`.
    pub alpha_abs: Vec<Welford>,
    pub alpha: Vec<ComplexWelford>,
    /// Trajectories with `Re α > 0`, per sample.
    pub alpha_positive: Vec<u64>,
    pub traces: Vec<TrajectoryTrace>,
    pub max_tail: f64,
}

impl EnsembleAccumulator {
    pub fn new(times: Vec<f64>, n_sites: usize, center: Option<usize>, window: Option<(f64, f64)>) -> Self {
        let samples = times.len();
        let cells = samples * n_sites;
        let pair_cells = if center.is_some() { cells } else { 0 };
        let window_cells = if center.is_some() && window.is_some() { n_sites } else { 0 };
        Self {
            times,
            n_sites,
            center,
            window,
            count: 0,
            occupation: vec![Welford::default(); cells],
            coherence: vec![ComplexWelford::default(); cells],
            pair: vec![ComplexWelford::default(); pair_cells],
            window_pair: vec![ComplexWelford::default(); window_cells],
            density: vec![Welford::default(); samples],
            alpha_abs: vec![Welford::default(); samples],
            alpha: vec![ComplexWelford::default(); samples],
            alpha_positive: vec![0; samples],
            traces: Vec::new(),
            max_tail: 0.0,
        }
    }

    pub fn num_samples(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn cell(&self, sample: usize, site: usize) -> usize {
        sample * self.n_sites + site
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.times != other.times
            || self.n_sites != other.n_sites
            || self.center != other.center
            || self.window != other.window
        {
            return Err(DgError::Config("cannot merge accumulators of different runs".into()));
        }
        Ok(())
    }

    /// Folds `other` into `self`.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.compatible(other)?;
        self.count += other.count;
        for (a, b) in self.occupation.iter_mut().zip(&other.occupation) {
            a.merge(b);
        }
        for (a, b) in self.coherence.iter_mut().zip(&other.coherence) {
            a.merge(b);
        }
        for (a, b) in self.pair.iter_mut().zip(&other.pair) {
            a.merge(b);
        }
        for (a, b) in self.window_pair.iter_mut().zip(&other.window_pair) {
            a.merge(b);
        }
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            a.merge(b);
        }
        for (a, b) in self.alpha_abs.iter_mut().zip(&other.alpha_abs) {
            a.merge(b);
        }
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            a.merge(b);
        }
        for (a, b) in self.alpha_positive.iter_mut().zip(&other.alpha_positive) {
            *a += b;
        }
        self.traces.extend(other.traces.iter().cloned());
        self.traces.sort_by_key(|t| t.index);
        self.max_tail = self.max_tail.max(other.max_tail);
        Ok(())
    }

    fn absorb_sample(&mut self, sample: &Sample<'_>, pending: &mut Pending) {
        let k = sample.index;
        let base = k * self.n_sites;
        let mut n_sum = 0.0;
        let mut a_sum = Complex64::new(0.0, 0.0);
        for s in 0..self.n_sites {
            let n = sample.occupation[s];
            let a = sample.coherence[s];
            self.occupation[base + s].push(n);
            self.coherence[base + s].push(a);
            n_sum += n;
            a_sum += a;
        }
        if let Some(c) = self.center {
            let ac = sample.coherence[c].conj();
            let in_window = self
                .window
                .is_some_and(|(t0, t1)| sample.time >= t0 - 1e-9 && sample.time <= t1 + 1e-9);
            for s in 0..self.n_sites {
                let p = ac * sample.coherence[s];
                self.pair[base + s].push(p);
                if in_window {
                    pending.window_sum[s] += p;
                }
            }
            if in_window {
                pending.window_count += 1;
            }
        }
        let density = n_sum / self.n_sites as f64;
        let alpha = a_sum / self.n_sites as f64;
        self.density[k].push(density);
        self.alpha_abs[k].push(alpha.norm());
        self.alpha[k].push(alpha);
        if alpha.re > 0.0 {
            self.alpha_positive[k] += 1;
        }
        if let Some(trace) = pending.trace.as_mut() {
            trace.density.push(density);
            trace.alpha.push(alpha);
        }
        self.max_tail = self.max_tail.max(sample.max_tail);
    }

    fn finish_trajectory(&mut self, pending: Pending) {
        if !self.window_pair.is_empty() && pending.window_count > 0 {
            let inv = 1.0 / pending.window_count as f64;
            for (acc, sum) in self.window_pair.iter_mut().zip(&pending.window_sum) {
                acc.push(sum * inv);
            }
        }
        if let Some(trace) = pending.trace {
            self.traces.push(trace);
        }
        self.count += 1;
    }
}

struct Pending {
    window_sum: Vec<Complex64>,
    window_count: usize,
    trace: Option<TrajectoryTrace>,
}

/// Runs a single trajectory `k` of `cfg` into `acc`.
fn absorb_trajectory(
    cfg: &EnsembleConfig,
    stepper: &mut Stepper,
    acc: &mut EnsembleAccumulator,
    k: u64,
) -> Result<()> {
    let seed = mix_seed(cfg.master_seed, k);
    let wrap = |e: DgError| DgError::Trajectory { index: k, seed, source: Box::new(e) };
    let n_sites = cfg.lattice.num_sites();
    let mut state = cfg.initial.build(n_sites, cfg.model.cutoff, seed).map_err(wrap)?;
    let mut pending = Pending {
        window_sum: vec![Complex64::new(0.0, 0.0); n_sites],
        window_count: 0,
        trace: ((k as usize) < cfg.keep_traces).then(|| TrajectoryTrace {
            index: k,
            seed,
            density: Vec::new(),
            alpha: Vec::new(),
        }),
    };
    sse::integrate(
        &mut state,
        stepper,
        &cfg.schedule,
        |sample| acc.absorb_sample(sample, &mut pending),
        sse::no_remap,
    )
    .map_err(wrap)?;
    acc.finish_trajectory(pending);
    Ok(())
}

fn validate(cfg: &EnsembleConfig) -> Result<Option<usize>> {
    let mut problems = cfg.model.violations();
    problems.extend(cfg.lattice.violations());
    problems.extend(cfg.schedule.violations());
    problems.extend(cfg.initial.violations(cfg.lattice.num_sites()));
    if cfg.n_traj < 1 {
        problems.push("n_traj must be >= 1".to_string());
    }
    if let Some((t0, t1)) = cfg.window {
        if !(t0 <= t1 && t0 >= 0.0 && t1 <= cfg.schedule.t_final + 1e-9) {
            problems.push(format!(
                "averaging window [{t0}, {t1}] must lie inside [0, {}]",
                cfg.schedule.t_final
            ));
        }
    }
    let center = if cfg.track_center {
        match cfg.lattice.center_site() {
            Ok(c) => Some(c),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    if problems.is_empty() {
        Ok(center)
    } else {
        Err(DgError::Config(problems.join("; ")))
    }
}

/// Runs `cfg.n_traj` trajectories on the current rayon pool.
///
/// Trajectory `k` uses seed [`mix_seed`]`(master_seed, k)`. Results do not
/// depend on the number of workers.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleAccumulator> {
    let center = validate(cfg)?;
    let model = build_local_model(cfg.model)?;
    let stepper = Stepper::new(&model, &cfg.lattice, cfg.schedule.dt, cfg.milstein)?.with_scheme(cfg.scheme);
    let times = cfg.schedule.sample_times();
    let n_sites = cfg.lattice.num_sites();
    let empty = EnsembleAccumulator::new(times, n_sites, center, cfg.window.filter(|_| center.is_some()));

    let chunks = cfg.n_traj.div_ceil(CHUNK);
    let mut total = empty.clone();
    // Chunks run in parallel a batch at a time and are merged in chunk order,
    // which bounds memory without making the result depend on scheduling.
    for first in (0..chunks).step_by(BATCH as usize) {
        let parts: Vec<EnsembleAccumulator> = (first..(first + BATCH).min(chunks))
            .into_par_iter()
            .map(|chunk| {
                let mut stepper = stepper.clone();
                let mut acc = empty.clone();
                let end = ((chunk + 1) * CHUNK).min(cfg.n_traj);
                for k in chunk * CHUNK..end {
                    absorb_trajectory(cfg, &mut stepper, &mut acc, k)?;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        for part in &parts {
            total.merge(part)?;
        }
    }
    Ok(total)
}

/// [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(cfg: &EnsembleConfig, workers: usize) -> Result<EnsembleAccumulator> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DgError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_ensemble(cfg))
}

/// Spatially averaged observables per sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSeries {
    pub times: Vec<f64>,
    /// `N(t)`, the ensemble mean of the spatially averaged `<n>`.
    pub density: Vec<f64>,
    pub density_stderr: Vec<f64>,
    /// Ensemble mean of the per-trajectory `|α|`.
    pub alpha_abs: Vec<f64>,
    pub alpha_abs_stderr: Vec<f64>,
    pub alpha_abs_std: Vec<f64>,
    /// Ensemble mean of the signed α, which cancels by parity symmetry.
    pub alpha_mean: Vec<Complex64>,
    pub alpha_stderr: Vec<f64>,
    /// Fraction of trajectories with `Re α > 0`.
    pub positive_fraction: Vec<f64>,
}

pub fn macroscopic_series(acc: &EnsembleAccumulator) -> Result<MacroSeries> {
    if acc.count < 1 {
        return Err(DgError::Config("empty ensemble".into()));
    }
    Ok(MacroSeries {
        times: acc.times.clone(),
        density: acc.density.iter().map(|w| w.mean).collect(),
        density_stderr: acc.density.iter().map(Welford::stderr).collect(),
        alpha_abs: acc.alpha_abs.iter().map(|w| w.mean).collect(),
        alpha_abs_stderr: acc.alpha_abs.iter().map(Welford::stderr).collect(),
        alpha_abs_std: acc.alpha_abs.iter().map(Welford::std_dev).collect(),
        alpha_mean: acc.alpha.iter().map(|w| w.mean).collect(),
        alpha_stderr: acc.alpha.iter().map(ComplexWelford::stderr).collect(),
        positive_fraction: acc
            .alpha_positive
            .iter()
            .map(|&p| p as f64 / acc.count as f64)
            .collect(),
    })
}

/// Mean over samples with `t >= t_start` of a per-sample series.
pub fn late_time_mean(times: &[f64], values: &[f64], t_start: f64) -> Option<f64> {
    let tail: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_start - 1e-9)
        .map(|(_, v)| *v)
        .collect();
    (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sse::{no_remap, run_trajectory};
    use proptest::prelude::*;

    fn small_config(n_traj: u64) -> EnsembleConfig {
        let mut cfg = EnsembleConfig::new(
            ModelParams::reference_regime(1.0, 6),
            LatticeGeometry::square(3).unwrap(),
            Schedule { dt: 2e-3, t_final: 0.4, sample_interval: 0.1 },
            n_traj,
            2024,
        );
        cfg.track_center = true;
        cfg.window = Some((0.2, 0.4));
        cfg
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
        assert_ne!(mix_seed(7, 3), mix_seed(8, 3));
        let mut seen: Vec<u64> = (0..10_000).map(|k| mix_seed(7, k)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 10_000);
    }

    #[test]
    fn result_does_not_depend_on_worker_count() {
        let cfg = small_config(19);
        let one = run_ensemble_with_workers(&cfg, 1).unwrap();
        let three = run_ensemble_with_workers(&cfg, 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.count, 19);
        assert_eq!(one.window_pair[0].count, 19);
    }

    #[test]
    fn single_trajectory_matches_direct_run() {
        let mut cfg = small_config(1);
        cfg.keep_traces = 4;
        let acc = run_ensemble(&cfg).unwrap();
        let model = build_local_model(cfg.model).unwrap();
        let mut stepper = Stepper::new(&model, &cfg.lattice, cfg.schedule.dt, false).unwrap();
        let state = TrajectoryState::vacuum(9, 6, mix_seed(cfg.master_seed, 0));
        let rec = run_trajectory(state, &mut stepper, &cfg.schedule, |_| {}, no_remap).unwrap();
        for (k, row) in rec.occupation.iter().enumerate() {
            for (s, &n) in row.iter().enumerate() {
                let w = acc.occupation[acc.cell(k, s)];
                assert_eq!(w.mean, n);
                assert_eq!(w.stderr(), 0.0);
            }
        }
        assert_eq!(acc.traces.len(), 1);
        assert_eq!(acc.traces[0].seed, mix_seed(cfg.master_seed, 0));
    }

    #[test]
    fn undriven_vacuum_stays_empty() {
        let mut cfg = small_config(10);
        cfg.model.g2 = 0.0;
        let acc = run_ensemble(&cfg).unwrap();
        let m = macroscopic_series(&acc).unwrap();
        assert!(m.density.iter().all(|&n| n == 0.0));
        assert!(m.alpha_abs.iter().all(|&a| a == 0.0));
        assert!(acc.pair.iter().all(|w| w.mean == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn keeps_requested_traces_in_order() {
        let mut cfg = small_config(20);
        cfg.keep_traces = 11;
        let acc = run_ensemble_with_workers(&cfg, 2).unwrap();
        let idx: Vec<u64> = acc.traces.iter().map(|t| t.index).collect();
        assert_eq!(idx, (0..11).collect::<Vec<_>>());
        assert!(acc.traces.iter().all(|t| t.density.len() == 5));
    }

    #[test]
    fn invalid_config_lists_all_problems() {
        let mut cfg = small_config(0);
        cfg.schedule.dt = -1.0;
        cfg.lattice.extent = 4;
        let Err(DgError::Config(msg)) = run_ensemble(&cfg) else {
            panic!("expected a configuration error");
        };
        assert!(msg.contains("n_traj"), "{msg}");
        assert!(msg.contains("dt"), "{msg}");
        assert!(msg.contains("even"), "{msg}");
    }

    #[test]
    fn merging_rejects_other_runs() {
        let a = EnsembleAccumulator::new(vec![0.0, 1.0], 2, None, None);
        let mut b = EnsembleAccumulator::new(vec![0.0, 2.0], 2, None, None);
        assert!(b.merge(&a).is_err());
    }

    #[test]
    fn late_mean() {
        assert_eq!(late_time_mean(&[0.0, 1.0, 2.0], &[5.0, 1.0, 3.0], 1.0), Some(2.0));
        assert_eq!(late_time_mean(&[0.0], &[5.0], 1.0), None);
    }

    proptest! {
        #[test]
        fn welford_merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 1..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let mut all = Welford::default();
            xs.iter().for_each(|&x| all.push(x));
            let (mut left, mut right) = (Welford::default(), Welford::default());
            xs[..cut].iter().for_each(|&x| left.push(x));
            xs[cut..].iter().for_each(|&x| right.push(x));
            left.merge(&right);
            prop_assert_eq!(left.count, all.count);
            prop_assert!((left.mean - all.mean).abs() <= 1e-9 * (1.0 + all.mean.abs()));
            prop_assert!((left.variance() - all.variance()).abs() <= 1e-7 * (1.0 + all.variance()));
            prop_assert!(left.variance() >= 0.0);
        }

        #[test]
        fn complex_welford_is_sum_of_parts(xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40)) {
            let (mut re, mut im, mut z) = (Welford::default(), Welford::default(), ComplexWelford::default());
            for &(a, b) in &xs {
                re.push(a);
                im.push(b);
                z.push(Complex64::new(a, b));
            }
            prop_assert!((z.variance() - re.variance() - im.variance()).abs() < 1e-9);
            prop_assert!((z.mean.re - re.mean).abs() < 1e-12);
        }
    }
}
