//! Diffusive (homodyne) Gutzwiller trajectories.
//!
//! Each site carries its own pure state. One step of the unnormalized
//! stochastic Schrödinger equation reads, per site,
//!
//! ```text
//! ψ̃ = ψ + [−i(H_loc + H_mf) dt − D dt + K₁ dQ₁ + K₂ dQ₂] ψ
//! dQ_i = <K_i† + K_i> dt + dW_i
//! ```
//!
//! followed by renormalization. `H_mf` is the mean-field hopping built from
//! the neighbors' `<a>`, all taken from the pre-step states so the update is
//! independent of site order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DgError, Result};
use crate::fock;
use crate::lattice::LatticeGeometry;
use crate::model::LocalModel;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Population of the top two Fock levels above which a run is flagged as
/// under-resolved in the cutoff.
pub const TAIL_WARN_THRESHOLD: f64 = 1e-6;

/// Norm below which the pre-renormalization state counts as collapsed.
pub const COLLAPSE_NORM: f64 = 1e-12;

pub type TrajectoryRng = ChaCha8Rng;

/// Wiener increments of one site for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseIncrement {
    pub dw1: f64,
    pub dw2: f64,
}

/// Product state of the whole lattice for one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    dim: usize,
    // site-major, `dim` amplitudes per site
    amps: Vec<Complex64>,
    pub time: f64,
    pub rng: TrajectoryRng,
}

impl TrajectoryState {
    pub fn vacuum(n_sites: usize, dim: usize, seed: u64) -> Self {
        let mut amps = vec![ZERO; n_sites * dim];
        for s in 0..n_sites {
            amps[s * dim] = Complex64::new(1.0, 0.0);
        }
        Self {
            dim,
            amps,
            time: 0.0,
            rng: TrajectoryRng::seed_from_u64(seed),
        }
    }

    /// Builds a state from per-site vectors, normalizing each.
    pub fn from_sites(sites: &[Vec<Complex64>], seed: u64) -> Result<Self> {
        let dim = sites.first().map(Vec::len).unwrap_or(0);
        let mut amps = Vec::with_capacity(sites.len() * dim);
        for v in sites {
            if v.len() != dim {
                return Err(DgError::DimensionMismatch { expected: dim, got: v.len() });
            }
            let mut v = v.clone();
            if fock::normalize(&mut v) == 0.0 {
                return Err(DgError::Config("initial site state has zero norm".into()));
            }
            amps.extend(v);
        }
        Ok(Self {
            dim,
            amps,
            time: 0.0,
            rng: TrajectoryRng::seed_from_u64(seed),
        })
    }

    pub fn coherent(amplitudes: &[Complex64], dim: usize, seed: u64) -> Result<Self> {
        let sites: Vec<_> = amplitudes.iter().map(|&a| fock::coherent_state(dim, a)).collect();
        Self::from_sites(&sites, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_sites(&self) -> usize {
        self.amps.len() / self.dim
    }

    pub fn site(&self, s: usize) -> &[Complex64] {
        &self.amps[s * self.dim..(s + 1) * self.dim]
    }

    pub fn site_mut(&mut self, s: usize) -> &mut [Complex64] {
        &mut self.amps[s * self.dim..(s + 1) * self.dim]
    }

    pub fn mean_occupation(&self, s: usize) -> f64 {
        self.site(s)
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum()
    }

    pub fn mean_annihilation(&self, s: usize) -> Complex64 {
        lowered_overlap(self.site(s))
    }

    /// Combined population of the two highest Fock levels of site `s`.
    pub fn tail_population(&self, s: usize) -> f64 {
        let v = self.site(s);
        v[self.dim - 2..].iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `<ψ|a|ψ>` from the amplitudes directly.
#[inline]
fn lowered_overlap(v: &[Complex64]) -> Complex64 {
    let mut acc = ZERO;
    for n in 1..v.len() {
        acc += v[n - 1].conj() * v[n] * (n as f64).sqrt();
    }
    acc
}

/// Time grid of a trajectory run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub dt: f64,
    pub t_final: f64,
    pub sample_interval: f64,
}

impl Schedule {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            out.push(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            out.push(format!("sample_interval must be > 0, got {}", self.sample_interval));
        }
        if !out.is_empty() {
            return out;
        }
        if self.sample_interval < self.dt * (1.0 - 1e-9) {
            out.push(format!(
                "sample_interval {} is shorter than dt {}",
                self.sample_interval, self.dt
            ));
        } else if !near_integer(self.sample_interval / self.dt) {
            out.push(format!(
                "sample_interval {} is not a whole number of steps of dt {}",
                self.sample_interval, self.dt
            ));
        }
        if !near_integer(self.t_final / self.sample_interval) {
            out.push(format!(
                "t_final {} is not a whole number of sample intervals {}",
                self.t_final, self.sample_interval
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(DgError::Config(v.join("; ")))
        }
    }

    pub fn steps_per_sample(&self) -> usize {
        (self.sample_interval / self.dt).round() as usize
    }

    /// Number of samples including `t = 0`.
    pub fn num_samples(&self) -> usize {
        (self.t_final / self.sample_interval).round() as usize + 1
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.sample_interval
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.num_samples()).map(|k| self.sample_time(k)).collect()
    }
}

fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
}

/// Draws one step of increments, site-major and channel-minor.
pub fn draw_noise<R: Rng>(rng: &mut R, dt: f64, out: &mut [NoiseIncrement]) {
    let scale = dt.sqrt();
    for inc in out.iter_mut() {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        inc.dw1 = z1 * scale;
        inc.dw2 = z2 * scale;
    }
}

/// How the diagonal (in the Fock basis) part of the deterministic generator
/// `−i H_loc − D` is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    /// `ψ̃ = e^{L_diag dt} (ψ + [everything else] ψ)`. Same weak order as the
    /// explicit scheme, but Kerr and two-photon-loss terms no longer amplify
    /// the high Fock levels when `U n² dt` is of order one.
    #[default]
    ExactDiagonal,
    /// Plain Euler–Maruyama.
    Explicit,
}

/// Complex table split into real and imaginary parts.
#[derive(Debug, Clone, Default)]
struct Split {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Split {
    fn from_complex(v: &[Complex64]) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    fn zeros(n: usize) -> Self {
        Self { re: vec![0.0; n], im: vec![0.0; n] }
    }
}

/// Precomputed step kernel for one (model, lattice, dt) combination.
///
/// Owns its scratch buffers, so each worker needs its own copy; cloning is
/// cheap compared to a trajectory.
#[derive(Debug, Clone)]
pub struct Stepper {
    dim: usize,
    dt: f64,
    milstein: bool,
    scheme: DriftScheme,
    sqrt_g1: f64,
    sqrt_g2: f64,
    gamma1: f64,
    gamma2: f64,
    hop: f64,
    // diagonal of (−i H_loc − D) dt
    gen_diag: Vec<Complex64>,
    // <n|(−i H_loc − D) dt|n±2>, zero past the cutoff
    gen_up2: Split,
    gen_dn2: Split,
    // next[n] = pre[n] ψ[n] + post[n] (ψ[n] + rest)
    pre: Split,
    post: Split,
    // length-d tables with zeros where the shifted level leaves the cutoff
    up1: Vec<f64>,
    dn1: Vec<f64>,
    up2: Vec<f64>,
    up4: Vec<f64>,
    nbr_start: Vec<usize>,
    nbr_list: Vec<usize>,
    mean_a: Vec<Complex64>,
    // ψ with two zeros in front and four behind
    pad: Split,
    next: Split,
}

const PAD_FRONT: usize = 2;
const PAD_BACK: usize = 4;

impl Stepper {
    pub fn new(model: &LocalModel, geom: &LatticeGeometry, dt: f64, milstein: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DgError::Config(format!("dt must be > 0, got {dt}")));
        }
        let d = model.dim();
        let p = &model.params;
        let generator = &model.h_local.scale(Complex64::new(0.0, -dt)) - &model.damping.scale_real(dt);
        let gen_diag: Vec<Complex64> = (0..d).map(|n| generator.get(n, n)).collect();
        for i in 0..d {
            for j in 0..d {
                if i.abs_diff(j) != 0 && i.abs_diff(j) != 2 && generator.get(i, j) != ZERO {
                    return Err(DgError::Config(format!(
                        "local generator couples Fock levels {i} and {j}; only 0 and ±2 are supported"
                    )));
                }
            }
        }
        let band = |k: isize| -> Vec<Complex64> {
            (0..d as isize)
                .map(|n| if (0..d as isize).contains(&(n + k)) { generator.get(n as usize, (n + k) as usize) } else { ZERO })
                .collect()
        };

        let lowered = |n: usize, k: usize| -> f64 {
            if n + k < d {
                (n + 1..=n + k).map(|m| m as f64).product::<f64>().sqrt()
            } else {
                0.0
            }
        };

        let table = geom.neighbor_table();
        let mut nbr_start = Vec::with_capacity(table.len() + 1);
        let mut nbr_list = Vec::new();
        nbr_start.push(0);
        for nbrs in &table {
            nbr_list.extend_from_slice(nbrs);
            nbr_start.push(nbr_list.len());
        }
        let mut stepper = Self {
            dim: d,
            dt,
            milstein,
            scheme: DriftScheme::default(),
            sqrt_g1: p.gamma1.sqrt(),
            sqrt_g2: p.gamma2.sqrt(),
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            hop: model.hop_coefficient,
            gen_diag,
            gen_up2: Split::from_complex(&band(2)),
            gen_dn2: Split::from_complex(&band(-2)),
            pre: Split::default(),
            post: Split::default(),
            up1: (0..d).map(|n| lowered(n, 1)).collect(),
            dn1: (0..d).map(|n| (n as f64).sqrt()).collect(),
            up2: (0..d).map(|n| lowered(n, 2)).collect(),
            up4: (0..d).map(|n| lowered(n, 4)).collect(),
            nbr_start,
            nbr_list,
            mean_a: vec![ZERO; table.len()],
            pad: Split::zeros(d + PAD_FRONT + PAD_BACK),
            next: Split::zeros(d),
        };
        stepper.set_scheme(DriftScheme::default());
        Ok(stepper)
    }

    pub fn with_scheme(mut self, scheme: DriftScheme) -> Self {
        self.set_scheme(scheme);
        self
    }

    fn set_scheme(&mut self, scheme: DriftScheme) {
        self.scheme = scheme;
        let one = Complex64::new(1.0, 0.0);
        let (pre, post): (Vec<Complex64>, Vec<Complex64>) = match scheme {
            DriftScheme::Explicit => (self.gen_diag.clone(), vec![one; self.dim]),
            DriftScheme::ExactDiagonal => (vec![ZERO; self.dim], self.gen_diag.iter().map(|g| g.exp()).collect()),
        };
        self.pre = Split::from_complex(&pre);
        self.post = Split::from_complex(&post);
    }

    pub fn scheme(&self) -> DriftScheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_sites(&self) -> usize {
        self.mean_a.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_state(&self, state: &TrajectoryState) -> Result<()> {
        if state.dim() != self.dim {
            return Err(DgError::DimensionMismatch { expected: self.dim, got: state.dim() });
        }
        if state.num_sites() != self.num_sites() {
            return Err(DgError::DimensionMismatch {
                expected: self.num_sites(),
                got: state.num_sites(),
            });
        }
        Ok(())
    }

    /// Advances every site by one step using the supplied increments.
    pub fn step_with(&mut self, state: &mut TrajectoryState, noise: &[NoiseIncrement]) -> Result<()> {
        debug_assert_eq!(noise.len(), self.num_sites());
        let d = self.dim;
        let up1 = &self.up1[..d];
        for (s, m) in self.mean_a.iter_mut().enumerate() {
            let psi = &state.amps[s * d..(s + 1) * d];
            let mut acc = ZERO;
            for n in 0..d - 1 {
                acc += psi[n].conj() * psi[n + 1] * up1[n];
            }
            *m = acc;
        }
        let time = state.time;
        for s in 0..self.mean_a.len() {
            let psi = &mut state.amps[s * d..(s + 1) * d];
            self.site_update(s, psi, noise[s], time)?;
        }
        state.time += self.dt;
        Ok(())
    }

    #[inline]
    fn site_update(
        &mut self,
        s: usize,
        psi: &mut [Complex64],
        noise: NoiseIncrement,
        time: f64,
    ) -> Result<()> {
        let dt = self.dt;
        let d = self.dim;
        let mut nsum = ZERO;
        for &t in &self.nbr_list[self.nbr_start[s]..self.nbr_start[s + 1]] {
            nsum += self.mean_a[t];
        }
        let (pr, pi) = (&mut self.pad.re, &mut self.pad.im);
        for (n, z) in psi.iter().enumerate() {
            pr[n + PAD_FRONT] = z.re;
            pi[n + PAD_FRONT] = z.im;
        }

        // shifted views ψ_{n+k}, all of length d
        let (r0, i0) = (&pr[PAD_FRONT..PAD_FRONT + d], &pi[PAD_FRONT..PAD_FRONT + d]);
        let (rp1, ip1) = (&pr[PAD_FRONT + 1..PAD_FRONT + 1 + d], &pi[PAD_FRONT + 1..PAD_FRONT + 1 + d]);
        let (rm1, im1) = (&pr[PAD_FRONT - 1..PAD_FRONT - 1 + d], &pi[PAD_FRONT - 1..PAD_FRONT - 1 + d]);
        let (rp2, ip2) = (&pr[PAD_FRONT + 2..PAD_FRONT + 2 + d], &pi[PAD_FRONT + 2..PAD_FRONT + 2 + d]);
        let (rm2, im2) = (&pr[..d], &pi[..d]);
        let (rp4, ip4) = (&pr[PAD_FRONT + 4..PAD_FRONT + 4 + d], &pi[PAD_FRONT + 4..PAD_FRONT + 4 + d]);
        let (up1, dn1, up2, up4) = (&self.up1[..d], &self.dn1[..d], &self.up2[..d], &self.up4[..d]);

        // <a²> = Σ conj(ψ_n) √((n+1)(n+2)) ψ_{n+2}
        let mut a2_re = 0.0;
        for n in 0..d {
            a2_re += up2[n] * (r0[n] * rp2[n] + i0[n] * ip2[n]);
        }

        let NoiseIncrement { dw1, dw2 } = noise;
        let dq1 = self.sqrt_g1 * 2.0 * self.mean_a[s].re * dt + dw1;
        let dq2 = self.sqrt_g2 * 2.0 * a2_re * dt + dw2;

        // −i H_mf dt = i J dt (conj(S) a + S a†)
        let hop_dt = Complex64::new(0.0, self.hop * dt);
        let ca = Complex64::new(self.sqrt_g1 * dq1, 0.0) + hop_dt * nsum.conj();
        let cd = hop_dt * nsum;
        let mut c2 = self.sqrt_g2 * dq2;
        let mut c4 = 0.0;
        if self.milstein {
            // ½ K₁²(dW₁² − dt) + ½ K₂²(dW₂² − dt), with K₁² = γ₁a², K₂² = γ₂a⁴
            c2 += 0.5 * self.gamma1 * (dw1 * dw1 - dt);
            c4 = 0.5 * self.gamma2 * (dw2 * dw2 - dt);
        }

        let (nr, ni) = (&mut self.next.re[..d], &mut self.next.im[..d]);
        let (gu_r, gu_i) = (&self.gen_up2.re[..d], &self.gen_up2.im[..d]);
        let (gd_r, gd_i) = (&self.gen_dn2.re[..d], &self.gen_dn2.im[..d]);
        for n in 0..d {
            // a: ψ_{n+1}, a†: ψ_{n-1}
            let (xr, xi) = (up1[n] * rp1[n], up1[n] * ip1[n]);
            let (yr, yi) = (dn1[n] * rm1[n], dn1[n] * im1[n]);
            // drive and K₂ dQ₂: ψ_{n+2}; drive: ψ_{n-2}
            let (ur, ui) = (gu_r[n] + c2 * up2[n], gu_i[n]);
            let (w4r, w4i) = (c4 * up4[n] * rp4[n], c4 * up4[n] * ip4[n]);
            nr[n] = r0[n] + (ca.re * xr - ca.im * xi) + (cd.re * yr - cd.im * yi) + (ur * rp2[n] - ui * ip2[n])
                + (gd_r[n] * rm2[n] - gd_i[n] * im2[n])
                + w4r;
            ni[n] = i0[n] + (ca.re * xi + ca.im * xr) + (cd.re * yi + cd.im * yr) + (ur * ip2[n] + ui * rp2[n])
                + (gd_r[n] * im2[n] + gd_i[n] * rm2[n])
                + w4i;
        }
        match self.scheme {
            DriftScheme::ExactDiagonal => {
                let (fr, fi) = (&self.post.re[..d], &self.post.im[..d]);
                for n in 0..d {
                    let (re, im) = (nr[n], ni[n]);
                    nr[n] = fr[n] * re - fi[n] * im;
                    ni[n] = fr[n] * im + fi[n] * re;
                }
            }
            DriftScheme::Explicit => {
                let (gr, gi) = (&self.pre.re[..d], &self.pre.im[..d]);
                for n in 0..d {
                    nr[n] += gr[n] * r0[n] - gi[n] * i0[n];
                    ni[n] += gr[n] * i0[n] + gi[n] * r0[n];
                }
            }
        }

        let norm = nr.iter().zip(ni.iter()).map(|(r, i)| r * r + i * i).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(DgError::Divergence { site: s, time });
        }
        if norm < COLLAPSE_NORM {
            return Err(DgError::NumericalCollapse { site: s, time, norm });
        }
        let inv = 1.0 / norm;
        for (n, z) in psi.iter_mut().enumerate() {
            *z = Complex64::new(nr[n] * inv, ni[n] * inv);
        }
        Ok(())
    }
}

/// Per-site observables at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub index: usize,
    pub time: f64,
    pub occupation: &'a [f64],
    pub coherence: &'a [Complex64],
    /// Largest top-two-level population over all sites.
    pub max_tail: f64,
}

/// Sampled history of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `[sample][site]`
    pub occupation: Vec<Vec<f64>>,
    /// `[sample][site]`
    pub coherence: Vec<Vec<Complex64>>,
    pub max_tail: f64,
}

/// Integrates `state` over `schedule`, calling `observer` at every sample
/// time (including `t = 0`). `noise_map` may rewrite each step's increments
/// after they are drawn from the trajectory stream.
pub fn integrate<O, M>(
    state: &mut TrajectoryState,
    stepper: &mut Stepper,
    schedule: &Schedule,
    mut observer: O,
    mut noise_map: M,
) -> Result<()>
where
    O: FnMut(&Sample<'_>),
    M: FnMut(&mut [NoiseIncrement]),
{
    schedule.validate()?;
    stepper.check_state(state)?;
    if (schedule.dt - stepper.dt()).abs() > 1e-15 * schedule.dt {
        return Err(DgError::Config(format!(
            "schedule dt {} differs from stepper dt {}",
            schedule.dt,
            stepper.dt()
        )));
    }
    let n_sites = state.num_sites();
    let mut noise = vec![NoiseIncrement::default(); n_sites];
    let mut occupation = vec![0.0; n_sites];
    let mut coherence = vec![ZERO; n_sites];
    let t0 = state.time;
    let per_sample = schedule.steps_per_sample();
    let mut steps_done = 0u64;

    for k in 0..schedule.num_samples() {
        if k > 0 {
            for _ in 0..per_sample {
                draw_noise(&mut state.rng, schedule.dt, &mut noise);
                noise_map(&mut noise);
                stepper.step_with(state, &noise)?;
                steps_done += 1;
            }
            state.time = t0 + steps_done as f64 * schedule.dt;
        }
        let mut max_tail = 0.0_f64;
        for s in 0..n_sites {
            occupation[s] = state.mean_occupation(s);
            coherence[s] = state.mean_annihilation(s);
            max_tail = max_tail.max(state.tail_population(s));
        }
        observer(&Sample {
            index: k,
            time: t0 + schedule.sample_time(k),
            occupation: &occupation,
            coherence: &coherence,
            max_tail,
        });
    }
    Ok(())
}

/// Runs one trajectory and returns its full sampled history.
pub fn run_trajectory<O, M>(
    mut state: TrajectoryState,
    stepper: &mut Stepper,
    schedule: &Schedule,
    mut observer: O,
    noise_map: M,
) -> Result<TrajectoryRecord>
where
    O: FnMut(&Sample<'_>),
    M: FnMut(&mut [NoiseIncrement]),
{
    let mut record = TrajectoryRecord {
        times: Vec::with_capacity(schedule.num_samples()),
        occupation: Vec::with_capacity(schedule.num_samples()),
        coherence: Vec::with_capacity(schedule.num_samples()),
        max_tail: 0.0,
    };
    integrate(
        &mut state,
        stepper,
        schedule,
        |sample| {
            record.times.push(sample.time);
            record.occupation.push(sample.occupation.to_vec());
            record.coherence.push(sample.coherence.to_vec());
            record.max_tail = record.max_tail.max(sample.max_tail);
            observer(sample);
        },
        noise_map,
    )?;
    Ok(record)
}

/// Leaves the drawn increments untouched.
pub fn no_remap(_: &mut [NoiseIncrement]) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGeometry;
    use crate::model::{build_local_model, ModelParams};

    fn stepper(p: ModelParams, geom: &LatticeGeometry, dt: f64, milstein: bool) -> Stepper {
        Stepper::new(&build_local_model(p).unwrap(), geom, dt, milstein).unwrap()
    }

    fn undriven(j: f64) -> ModelParams {
        ModelParams { g2: 0.0, ..ModelParams::reference_regime(j, 10) }
    }

    #[test]
    fn vacuum_is_exact_fixed_point_without_drive() {
        let geom = LatticeGeometry::square(3).unwrap();
        for milstein in [false, true] {
            let mut st = stepper(undriven(0.7), &geom, 1e-2, milstein);
            let schedule = Schedule { dt: 1e-2, t_final: 1.0, sample_interval: 0.1 };
            let rec = run_trajectory(TrajectoryState::vacuum(9, 10, 3), &mut st, &schedule, |_| {}, no_remap)
                .unwrap();
            assert!(rec.occupation.iter().flatten().all(|&n| n == 0.0));
            assert!(rec.coherence.iter().flatten().all(|&a| a == ZERO));
        }
    }

    #[test]
    fn zero_hopping_decouples_sites() {
        let p = ModelParams::reference_regime(0.0, 10);
        let mut pair = stepper(p, &LatticeGeometry::chain(2).unwrap(), 1e-3, false);
        let single = LatticeGeometry::chain(1).unwrap();
        let mut solo = [stepper(p, &single, 1e-3, false), stepper(p, &single, 1e-3, false)];
        let mut both = TrajectoryState::vacuum(2, 10, 1);
        let mut alone = [TrajectoryState::vacuum(1, 10, 1), TrajectoryState::vacuum(1, 10, 1)];
        let mut rng = TrajectoryRng::seed_from_u64(99);
        let mut noise = vec![NoiseIncrement::default(); 2];
        for _ in 0..2000 {
            draw_noise(&mut rng, 1e-3, &mut noise);
            pair.step_with(&mut both, &noise).unwrap();
            for s in 0..2 {
                solo[s].step_with(&mut alone[s], &noise[s..s + 1]).unwrap();
            }
        }
        for s in 0..2 {
            assert_eq!(both.site(s), alone[s].site(0));
        }
        assert!(both.mean_occupation(0) > 0.0);
    }

    #[test]
    fn parity_equivariance_is_exact() {
        let geom = LatticeGeometry::square(3).unwrap();
        let p = ModelParams::reference_regime(1.0, 10);
        let schedule = Schedule { dt: 1e-3, t_final: 1.0, sample_interval: 0.05 };
        let mut st = stepper(p, &geom, 1e-3, false);
        let plain = run_trajectory(TrajectoryState::vacuum(9, 10, 5), &mut st, &schedule, |_| {}, no_remap).unwrap();
        let flipped = run_trajectory(
            TrajectoryState::vacuum(9, 10, 5),
            &mut st,
            &schedule,
            |_| {},
            |noise: &mut [NoiseIncrement]| noise.iter_mut().for_each(|n| n.dw1 = -n.dw1),
        )
        .unwrap();
        assert_eq!(plain.occupation, flipped.occupation);
        for (x, y) in plain.coherence.iter().flatten().zip(flipped.coherence.iter().flatten()) {
            assert_eq!(*x, -*y);
        }
        assert!(plain.coherence.iter().flatten().any(|a| a.norm() > 1e-3));
    }

    #[test]
    fn norm_is_preserved() {
        let geom = LatticeGeometry::square(3).unwrap();
        let p = ModelParams::reference_regime(1.0, 10);
        let mut st = stepper(p, &geom, 1e-3, true);
        let mut state = TrajectoryState::vacuum(9, 10, 8);
        let mut noise = vec![NoiseIncrement::default(); 9];
        for _ in 0..3000 {
            draw_noise(&mut state.rng, 1e-3, &mut noise);
            st.step_with(&mut state, &noise).unwrap();
            for s in 0..9 {
                assert!((fock::norm_sqr(state.site(s)).sqrt() - 1.0).abs() < 1e-9);
            }
        }
        assert!((state.time - 3.0).abs() < 1e-9);
    }

    #[test]
    fn replay_is_bit_identical() {
        let geom = LatticeGeometry::chain(3).unwrap();
        let p = ModelParams::reference_regime(0.6, 8);
        let schedule = Schedule { dt: 1e-3, t_final: 0.5, sample_interval: 0.1 };
        let mut st = stepper(p, &geom, 1e-3, false);
        let a = run_trajectory(TrajectoryState::vacuum(3, 8, 42), &mut st, &schedule, |_| {}, no_remap).unwrap();
        let b = run_trajectory(TrajectoryState::vacuum(3, 8, 42), &mut st, &schedule, |_| {}, no_remap).unwrap();
        let c = run_trajectory(TrajectoryState::vacuum(3, 8, 43), &mut st, &schedule, |_| {}, no_remap).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.times.len(), 6);
    }

    #[test]
    fn zero_duration_samples_initial_state() {
        let geom = LatticeGeometry::chain(2).unwrap();
        let mut st = stepper(ModelParams::reference_regime(0.6, 8), &geom, 1e-3, false);
        let schedule = Schedule { dt: 1e-3, t_final: 0.0, sample_interval: 0.1 };
        let init = TrajectoryState::coherent(&[Complex64::new(0.5, 0.0); 2], 8, 0).unwrap();
        let mut calls = 0;
        let rec = run_trajectory(init, &mut st, &schedule, |_| calls += 1, no_remap).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(rec.times, vec![0.0]);
        assert!((rec.coherence[0][0].re - 0.5).abs() < 1e-6);
    }

    #[test]
    fn non_finite_noise_reports_divergence() {
        let geom = LatticeGeometry::chain(2).unwrap();
        let mut st = stepper(ModelParams::reference_regime(0.6, 8), &geom, 1e-3, false);
        let mut state = TrajectoryState::coherent(&[Complex64::new(0.5, 0.0); 2], 8, 0).unwrap();
        let noise = [NoiseIncrement { dw1: f64::NAN, dw2: 0.0 }; 2];
        assert_eq!(
            st.step_with(&mut state, &noise),
            Err(DgError::Divergence { site: 0, time: 0.0 })
        );
    }

    #[test]
    fn annihilated_state_reports_collapse() {
        // γ₁ = 2, dt = 1: the damping term cancels |1> exactly and, with
        // dW = 0 and <a> = 0, nothing else contributes
        let p = ModelParams { delta: 0.0, u: 0.0, g2: 0.0, j_hop: 0.0, gamma1: 2.0, gamma2: 0.0, cutoff: 4 };
        let geom = LatticeGeometry::chain(2).unwrap();
        let mut st = stepper(p, &geom, 1.0, false).with_scheme(DriftScheme::Explicit);
        let one = crate::fock::basis_state(4, 1);
        let mut state = TrajectoryState::from_sites(&[one.clone(), one], 0).unwrap();
        let noise = [NoiseIncrement { dw1: 0.0, dw2: 0.0 }; 2];
        assert!(matches!(
            st.step_with(&mut state, &noise),
            Err(DgError::NumericalCollapse { site: 0, .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule { dt: 1e-3, t_final: 1.0, sample_interval: 0.1 }.validate().is_ok());
        assert!(Schedule { dt: 1e-3, t_final: 1.0, sample_interval: 0.00015 }.validate().is_err());
        assert!(Schedule { dt: 1e-3, t_final: 1.05, sample_interval: 0.1 }.validate().is_err());
        assert!(Schedule { dt: 0.0, t_final: 1.0, sample_interval: 0.1 }.validate().is_err());
        let s = Schedule { dt: 1e-3, t_final: 10.0, sample_interval: 0.1 };
        assert_eq!(s.num_samples(), 101);
        assert_eq!(s.steps_per_sample(), 100);
    }

    #[test]
    fn explicit_scheme_floods_the_cutoff_where_exact_diagonal_does_not() {
        let p = ModelParams { delta: 0.0, ..ModelParams::reference_regime(0.0, 15) };
        let geom = LatticeGeometry::chain(1).unwrap();
        let schedule = Schedule { dt: 1e-3, t_final: 2.0, sample_interval: 0.5 };
        let mut stable = stepper(p, &geom, 1e-3, false);
        let mut explicit = stepper(p, &geom, 1e-3, false).with_scheme(DriftScheme::Explicit);
        assert_eq!(stable.scheme(), DriftScheme::ExactDiagonal);
        let a = run_trajectory(TrajectoryState::vacuum(1, 15, 4), &mut stable, &schedule, |_| {}, no_remap).unwrap();
        let b = run_trajectory(TrajectoryState::vacuum(1, 15, 4), &mut explicit, &schedule, |_| {}, no_remap).unwrap();
        assert!(a.max_tail < TAIL_WARN_THRESHOLD, "{}", a.max_tail);
        assert!(b.max_tail > 0.1, "{}", b.max_tail);
    }

    #[test]
    fn schemes_agree_as_dt_shrinks() {
        // one fixed noise path, refined consistently: both schemes approach
        // the same strong solution
        let p = ModelParams::reference_regime(0.0, 8);
        let geom = LatticeGeometry::chain(1).unwrap();
        let model = build_local_model(p).unwrap();
        let run = |scheme: DriftScheme, dt: f64| {
            let mut st = Stepper::new(&model, &geom, dt, false).unwrap().with_scheme(scheme);
            let mut state = TrajectoryState::vacuum(1, 8, 0);
            let fine = 1e-6;
            let mut rng = TrajectoryRng::seed_from_u64(17);
            let per = (dt / fine).round() as usize;
            let mut fine_noise = vec![NoiseIncrement::default(); 1];
            for _ in 0..(0.2 / dt).round() as usize {
                let mut acc = NoiseIncrement::default();
                for _ in 0..per {
                    draw_noise(&mut rng, fine, &mut fine_noise);
                    acc.dw1 += fine_noise[0].dw1;
                    acc.dw2 += fine_noise[0].dw2;
                }
                st.step_with(&mut state, &[acc]).unwrap();
            }
            state.mean_occupation(0)
        };
        let gap = |dt| (run(DriftScheme::Explicit, dt) - run(DriftScheme::ExactDiagonal, dt)).abs();
        let coarse = gap(1e-4);
        let fine = gap(1e-5);
        assert!(fine < coarse / 3.0, "{coarse} {fine}");
    }
}
