//! Correlation maps, correlation-length fits and relaxation rates.

use serde::{Deserialize, Serialize};

use crate::ensemble::{ComplexWelford, EnsembleAccumulator};
use crate::error::{DgError, Result};
use crate::lattice::{LatticeGeometry, LatticeKind};

/// Fewest points any of the log-linear fits accepts.
pub const MIN_FIT_POINTS: usize = 3;

/// Fraction of the series used to estimate the asymptote in [`fit_relaxation`].
pub const TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Exponential,
    PowerLaw,
    RelaxationExponential,
}

/// Outcome of a log-linear fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_kind: FitKind,
    pub amplitude: f64,
    /// ξ in sites, the power-law exponent, or γ_eff. `+inf` (serialized as
    /// `null`) when the data show no decay at all.
    #[serde(with = "finite_or_null")]
    pub rate_or_length: f64,
    /// Inclusive range of the abscissa actually fitted.
    pub fit_window: (f64, f64),
    pub points: usize,
    /// RMS residual in log space.
    pub residual_rms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// Pair products at the last sample time.
    #[default]
    Final,
    /// Per-trajectory time averages over the accumulator's window.
    Window,
}

/// `G(di, dj) = |mean conj(<a>_center) <a>_(di,dj)|` over displacements from
/// the center. Stored row-major with `di, dj` in `-h..=h`, `h = (L−1)/2`;
/// a chain has a single row (`di = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMap {
    pub extent: usize,
    pub rows: usize,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl CorrelationMap {
    pub fn half(&self) -> isize {
        (self.extent as isize - 1) / 2
    }

    fn row_offset(&self) -> isize {
        if self.rows == 1 {
            0
        } else {
            self.half()
        }
    }

    fn idx(&self, di: isize, dj: isize) -> Option<usize> {
        let h = self.half();
        let r = di + self.row_offset();
        let c = dj + h;
        (r >= 0 && (r as usize) < self.rows && c >= 0 && (c as usize) < self.extent)
            .then(|| r as usize * self.extent + c as usize)
    }

    pub fn get(&self, di: isize, dj: isize) -> Option<f64> {
        self.idx(di, dj).map(|i| self.values[i])
    }

    pub fn get_stderr(&self, di: isize, dj: isize) -> Option<f64> {
        self.idx(di, dj).map(|i| self.stderr[i])
    }

    /// All `(di, dj, value, stderr)` in storage order.
    pub fn entries(&self) -> Vec<(isize, isize, f64, f64)> {
        let h = self.half();
        let ro = self.row_offset();
        (0..self.rows)
            .flat_map(|r| (0..self.extent).map(move |c| (r, c)))
            .map(|(r, c)| {
                let i = r * self.extent + c;
                (r as isize - ro, c as isize - h, self.values[i], self.stderr[i])
            })
            .collect()
    }

    /// Median stderr over the outermost ring, `max(|di|, |dj|) = h`.
    pub fn outer_ring_median_stderr(&self) -> f64 {
        let h = self.half();
        let mut ring: Vec<f64> = self
            .entries()
            .into_iter()
            .filter(|(di, dj, _, _)| di.abs().max(dj.abs()) == h)
            .map(|(_, _, _, s)| s)
            .collect();
        median(&mut ring)
    }

    /// Default fit threshold: 3× the outer-ring median stderr.
    pub fn default_noise_floor(&self) -> f64 {
        3.0 * self.outer_ring_median_stderr()
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn correlation_map(acc: &EnsembleAccumulator, geom: &LatticeGeometry, mode: MapMode) -> Result<CorrelationMap> {
    let center = acc
        .center
        .ok_or_else(|| DgError::Config("ensemble did not track the center site".into()))?;
    if geom.num_sites() != acc.n_sites || geom.center_site()? != center {
        return Err(DgError::Config("lattice does not match the accumulator".into()));
    }
    let cells: &[ComplexWelford] = match mode {
        MapMode::Final => {
            let last = acc.num_samples() - 1;
            &acc.pair[acc.cell(last, 0)..acc.cell(last, 0) + acc.n_sites]
        }
        MapMode::Window => {
            if acc.window_pair.is_empty() {
                return Err(DgError::Config("ensemble has no averaging window".into()));
            }
            &acc.window_pair
        }
    };
    let extent = geom.extent;
    let rows = match geom.kind {
        LatticeKind::Chain1d => 1,
        LatticeKind::Square2d => extent,
    };
    let mut map = CorrelationMap {
        extent,
        rows,
        values: vec![0.0; rows * extent],
        stderr: vec![0.0; rows * extent],
    };
    for (site, w) in cells.iter().enumerate() {
        let (di, dj) = geom.displacement_from_center(site)?;
        let i = map.idx(di, dj).expect("displacement inside map");
        map.values[i] = w.mean.norm();
        map.stderr[i] = w.stderr();
    }
    Ok(map)
}

/// Axis-symmetrized correlation `g(i) = (G(0,i) + G(i,0)) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projected {
    pub displacement: Vec<isize>,
    pub g: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Projected {
    /// Entries with displacement `i >= 1`.
    pub fn positive(&self) -> impl Iterator<Item = (isize, f64, f64)> + '_ {
        self.displacement
            .iter()
            .zip(&self.g)
            .zip(&self.stderr)
            .filter(|((i, _), _)| **i >= 1)
            .map(|((i, g), s)| (*i, *g, *s))
    }
}

pub fn project_1d(map: &CorrelationMap) -> Projected {
    let h = map.half();
    let mut out = Projected {
        displacement: Vec::new(),
        g: Vec::new(),
        stderr: Vec::new(),
    };
    for i in -h..=h {
        let (g, s) = if map.rows == 1 {
            (map.get(0, i).unwrap(), map.get_stderr(0, i).unwrap())
        } else {
            let (x, y) = (map.get(0, i).unwrap(), map.get(i, 0).unwrap());
            let (sx, sy) = (map.get_stderr(0, i).unwrap(), map.get_stderr(i, 0).unwrap());
            ((x + y) / 2.0, (sx * sx + sy * sy).sqrt() / 2.0)
        };
        out.displacement.push(i);
        out.g.push(g);
        out.stderr.push(s);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Weight log-space residuals by `(g / stderr)²`.
    pub weighted: bool,
}

struct Line {
    slope: f64,
    intercept: f64,
    residual_rms: f64,
}

fn least_squares(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Line {
    let n = x.len();
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(weight).sum();
    let mx = (0..n).map(|i| weight(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| weight(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| weight(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| weight(i) * (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
    Line {
        slope,
        intercept,
        residual_rms: (ss / n as f64).sqrt(),
    }
}

fn usable_points(g: &Projected, noise_floor: f64) -> Vec<(f64, f64, f64)> {
    g.positive()
        .filter(|(_, v, _)| *v > noise_floor && *v > 0.0)
        .map(|(i, v, s)| (i as f64, v, s))
        .collect()
}

fn log_fit(
    kind: FitKind,
    g: &Projected,
    noise_floor: f64,
    opts: FitOptions,
    transform_x: impl Fn(f64) -> f64,
) -> Result<FitResult> {
    let pts = usable_points(g, noise_floor);
    if pts.len() < MIN_FIT_POINTS {
        return Err(DgError::InsufficientData {
            usable: pts.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let x: Vec<f64> = pts.iter().map(|p| transform_x(p.0)).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let weights: Option<Vec<f64>> = opts.weighted.then(|| {
        pts.iter()
            .map(|&(_, v, s)| if s > 0.0 { (v / s).powi(2) } else { 1.0 })
            .collect()
    });
    let line = least_squares(&x, &y, weights.as_deref());
    let scale = match kind {
        FitKind::Exponential if line.slope < 0.0 => -1.0 / line.slope,
        FitKind::PowerLaw if line.slope < 0.0 => -line.slope,
        _ => f64::INFINITY,
    };
    Ok(FitResult {
        model_kind: kind,
        amplitude: line.intercept.exp(),
        rate_or_length: scale,
        fit_window: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
        residual_rms: line.residual_rms,
        caveat: None,
    })
}

/// `g(i) ≈ c e^{−i/ξ}` by least squares on `(i, ln g)` over `i >= 1` with
/// `g > noise_floor`.
pub fn fit_exponential(g: &Projected, noise_floor: f64) -> Result<FitResult> {
    fit_exponential_with(g, noise_floor, FitOptions::default())
}

pub fn fit_exponential_with(g: &Projected, noise_floor: f64, opts: FitOptions) -> Result<FitResult> {
    log_fit(FitKind::Exponential, g, noise_floor, opts, |i| i)
}

/// `g(i) ≈ c i^{−p}` by least squares on `(ln i, ln g)`.
pub fn fit_power_law(g: &Projected, noise_floor: f64) -> Result<FitResult> {
    fit_power_law_with(g, noise_floor, FitOptions::default())
}

pub fn fit_power_law_with(g: &Projected, noise_floor: f64, opts: FitOptions) -> Result<FitResult> {
    log_fit(FitKind::PowerLaw, g, noise_floor, opts, f64::ln)
}

/// Attaches a finite-size caveat when ξ exceeds half the lattice extent.
pub fn with_extent_caveat(mut fit: FitResult, extent: usize) -> FitResult {
    if fit.model_kind == FitKind::Exponential && fit.rate_or_length > extent as f64 / 2.0 {
        fit.caveat = Some(format!(
            "xi exceeds L/2 = {}: saturated by the finite lattice",
            extent as f64 / 2.0
        ));
    }
    fit
}

/// Effective relaxation rate from `O(∞) − O(t) ≈ A e^{−γ t}`.
///
/// `O(∞)` is the mean of the last 10% of samples and the tail noise their
/// standard deviation. The fit runs from the largest early deviation up to
/// the first sample whose deviation drops below
/// `max(3·noise, 1e-6·max deviation)`.
pub fn fit_relaxation(times: &[f64], values: &[f64]) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(DgError::DimensionMismatch { expected: times.len(), got: values.len() });
    }
    let n = values.len();
    if n < 2 * MIN_FIT_POINTS {
        return Err(DgError::RateUnresolvable(format!("series of {n} samples is too short")));
    }
    let tail_len = ((n as f64 * TAIL_FRACTION).round() as usize).max(1);
    let tail_start = n - tail_len;
    let tail = &values[tail_start..];
    let asymptote = tail.iter().sum::<f64>() / tail_len as f64;
    let noise = (tail.iter().map(|v| (v - asymptote).powi(2)).sum::<f64>() / tail_len as f64).sqrt();

    let dev: Vec<f64> = values.iter().map(|v| (asymptote - v).abs()).collect();
    let (start, peak) = dev[..tail_start]
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
    if !(peak > 0.0) {
        return Err(DgError::RateUnresolvable("series shows no deviation from its tail".into()));
    }
    let threshold = (3.0 * noise).max(1e-6 * peak);
    let end = (start..tail_start)
        .find(|&i| dev[i] <= threshold)
        .unwrap_or(tail_start);
    if end - start < MIN_FIT_POINTS {
        return Err(DgError::RateUnresolvable(format!(
            "only {} samples above the tail noise level",
            end - start
        )));
    }
    let x = &times[start..end];
    let y: Vec<f64> = dev[start..end].iter().map(|d| d.ln()).collect();
    let line = least_squares(x, &y, None);
    if !(line.slope < 0.0) {
        return Err(DgError::RateUnresolvable("deviation does not decay".into()));
    }
    Ok(FitResult {
        model_kind: FitKind::RelaxationExponential,
        amplitude: line.intercept.exp(),
        rate_or_length: -line.slope,
        fit_window: (x[0], x[x.len() - 1]),
        points: x.len(),
        residual_rms: line.residual_rms,
        caveat: None,
    })
}
