//! Exact reference dynamics for small systems.
//!
//! [`evolve_exact`] integrates the Lindblad master equation for one or two
//! sites on dense density matrices with classic RK4. It shares no code with
//! the trajectory integrator it is used to validate beyond the operator
//! definitions in [`crate::model`].
//!
//! [`jump_gutzwiller_compare`] runs the quantum-jump unraveling under the same
//! product-state ansatz. Starting from the vacuum, every site stays in a
//! parity eigenstate, so `<a>` vanishes identically and the mean-field
//! coupling never switches on.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::mix_seed;
use crate::error::{DgError, Result};
use crate::fock::{self, Diagonals, LocalOperator};
use crate::lattice::LatticeGeometry;
use crate::model::{build_local_model, LocalModel, ModelParams};
use crate::sse::{Schedule, TrajectoryRng};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default cap on the total Hilbert dimension handled by the dense oracle.
pub const DEFAULT_DIMENSION_CAP: usize = 400;

/// Entrywise 1-norm of `dρ/dt` below which the state counts as stationary.
pub const STEADY_STATE_TOLERANCE: f64 = 1e-9;

pub type DensityMatrix = DMatrix<Complex64>;

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOp {
    pub fn from_dense(m: &DensityMatrix) -> Self {
        let dim = m.nrows();
        let rows = (0..dim)
            .map(|i| {
                (0..m.ncols())
                    .filter_map(|j| (m[(i, j)] != ZERO).then_some((j, m[(i, j)])))
                    .collect()
            })
            .collect();
        Self { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `self · x` for dense `x`.
    pub fn mul_dense(&self, x: &DensityMatrix) -> DensityMatrix {
        let n = x.ncols();
        let mut out = DensityMatrix::zeros(self.dim, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for j in 0..n {
                    out[(i, j)] += v * x[(k, j)];
                }
            }
        }
        out
    }

    /// `tr(self · x)`.
    pub fn trace_with(&self, x: &DensityMatrix) -> Complex64 {
        let mut acc = ZERO;
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                acc += v * x[(k, i)];
            }
        }
        acc
    }
}

pub fn to_dense(op: &LocalOperator) -> DensityMatrix {
    DensityMatrix::from_fn(op.dim(), op.dim(), |i, j| op.get(i, j))
}

pub fn kron(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    a.kronecker(b)
}

/// The generator of the master equation in the form
/// `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ K ρ K†`, `H_eff = H − (i/2) Σ K†K`.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    dim: usize,
    h_eff: SparseOp,
    jumps: Vec<SparseOp>,
}

impl Lindbladian {
    pub fn new(ham: &DensityMatrix, jumps: &[DensityMatrix]) -> Result<Self> {
        let dim = ham.nrows();
        for m in std::iter::once(ham).chain(jumps) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(DgError::DimensionMismatch { expected: dim, got: m.nrows().max(m.ncols()) });
            }
        }
        let mut h_eff = ham.clone();
        for k in jumps {
            h_eff -= (k.adjoint() * k) * Complex64::new(0.0, 0.5);
        }
        Ok(Self {
            dim,
            h_eff: SparseOp::from_dense(&h_eff),
            jumps: jumps.iter().map(SparseOp::from_dense).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rhs(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(DgError::DimensionMismatch { expected: self.dim, got: rho.nrows() });
        }
        let i = Complex64::new(0.0, 1.0);
        let left = self.h_eff.mul_dense(rho);
        // ρ H_eff† = (H_eff ρ†)†
        let right = self.h_eff.mul_dense(&rho.adjoint()).adjoint();
        let mut out = (left - right) * (-i);
        for k in &self.jumps {
            let kr = k.mul_dense(rho);
            // (K ρ) K† = (K (K ρ)†)†
            out += k.mul_dense(&kr.adjoint()).adjoint();
        }
        Ok(out)
    }
}

/// `dρ/dt = −i[H,ρ] − ½Σ(K†Kρ + ρK†K − 2KρK†)`.
pub fn lindblad_rhs(rho: &DensityMatrix, ham: &DensityMatrix, jumps: &[DensityMatrix]) -> Result<DensityMatrix> {
    Lindbladian::new(ham, jumps)?.rhs(rho)
}

fn rk4_step(l: &Lindbladian, rho: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let k1 = l.rhs(rho)?;
    let k2 = l.rhs(&(rho + &k1 * c(0.5 * dt)))?;
    let k3 = l.rhs(&(rho + &k2 * c(0.5 * dt)))?;
    let k4 = l.rhs(&(rho + &k3 * c(dt)))?;
    Ok(rho + (k1 + (k2 + k3) * c(2.0) + k4) * c(dt / 6.0))
}

pub fn entrywise_norm1(m: &DensityMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

pub fn hermiticity_error(m: &DensityMatrix) -> f64 {
    (m - m.adjoint()).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &DensityMatrix) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Operators of a one- or two-site system embedded in the full space.
#[derive(Debug, Clone)]
pub struct ExactSystem {
    pub sites: usize,
    pub site_dim: usize,
    pub lindbladian: Lindbladian,
    pub number: Vec<SparseOp>,
    pub annihilation: Vec<SparseOp>,
    /// `a₀† a₁` for two sites.
    pub hopping: Option<SparseOp>,
}

impl ExactSystem {
    pub fn new(params: ModelParams, sites: usize, cap: usize) -> Result<Self> {
        let model = build_local_model(params)?;
        let d = model.dim();
        let total = match sites {
            1 => d,
            2 => d * d,
            other => {
                return Err(DgError::Config(format!(
                    "exact integration supports 1 or 2 sites, got {other}"
                )))
            }
        };
        if total > cap {
            return Err(DgError::DimensionCap { dim: total, cap });
        }
        let h = to_dense(&model.h_local);
        let k1 = to_dense(&model.k1);
        let k2 = to_dense(&model.k2);
        let a = to_dense(&model.a);
        let n = to_dense(&model.number);
        if sites == 1 {
            return Ok(Self {
                sites,
                site_dim: d,
                lindbladian: Lindbladian::new(&h, &[k1, k2])?,
                number: vec![SparseOp::from_dense(&n)],
                annihilation: vec![SparseOp::from_dense(&a)],
                hopping: None,
            });
        }
        let id = DensityMatrix::identity(d, d);
        let on0 = |m: &DensityMatrix| kron(m, &id);
        let on1 = |m: &DensityMatrix| kron(&id, m);
        let a_dag = a.adjoint();
        let hop = kron(&a, &a_dag) + kron(&a_dag, &a);
        let ham = on0(&h) + on1(&h) - hop * Complex64::new(params.j_hop, 0.0);
        let jumps = [on0(&k1), on0(&k2), on1(&k1), on1(&k2)];
        Ok(Self {
            sites,
            site_dim: d,
            lindbladian: Lindbladian::new(&ham, &jumps)?,
            number: vec![SparseOp::from_dense(&on0(&n)), SparseOp::from_dense(&on1(&n))],
            annihilation: vec![SparseOp::from_dense(&on0(&a)), SparseOp::from_dense(&on1(&a))],
            hopping: Some(SparseOp::from_dense(&kron(&a_dag, &a))),
        })
    }

    pub fn dim(&self) -> usize {
        self.lindbladian.dim()
    }

    pub fn vacuum(&self) -> DensityMatrix {
        let mut rho = DensityMatrix::zeros(self.dim(), self.dim());
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        rho
    }
}

/// Sampled exact dynamics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactEvolution {
    pub times: Vec<f64>,
    /// `[sample][site]`
    pub occupation: Vec<Vec<f64>>,
    /// `[sample][site]`
    pub coherence: Vec<Vec<Complex64>>,
    /// `<a₀† a₁>` per sample, two-site runs only.
    pub hopping: Vec<Complex64>,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    /// First sample time at which `‖dρ/dt‖₁` fell below the steady-state tolerance.
    pub steady_time: Option<f64>,
    #[serde(skip)]
    pub final_rho: DensityMatrix,
}

impl Default for ExactEvolution {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            occupation: Vec::new(),
            coherence: Vec::new(),
            hopping: Vec::new(),
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            steady_time: None,
            final_rho: DensityMatrix::zeros(0, 0),
        }
    }
}

/// Options for [`evolve_exact`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub t_final: f64,
    pub dt_rk: f64,
    pub sample_interval: f64,
    pub cap: usize,
    /// Tolerance on the smallest eigenvalue of ρ, checked at every sample.
    pub positivity_tolerance: f64,
    /// Diagonalize ρ at every sample (costly for two sites at large cutoff).
    pub check_positivity: bool,
}

impl ExactOptions {
    pub fn new(t_final: f64, dt_rk: f64, sample_interval: f64) -> Self {
        Self {
            t_final,
            dt_rk,
            sample_interval,
            cap: DEFAULT_DIMENSION_CAP,
            positivity_tolerance: 1e-8,
            check_positivity: true,
        }
    }
}

/// Integrates the master equation from the vacuum with RK4.
pub fn evolve_exact(params: ModelParams, sites: usize, opts: &ExactOptions) -> Result<ExactEvolution> {
    let system = ExactSystem::new(params, sites, opts.cap)?;
    let rho0 = system.vacuum();
    evolve_from(&system, rho0, opts)
}

pub fn evolve_from(system: &ExactSystem, mut rho: DensityMatrix, opts: &ExactOptions) -> Result<ExactEvolution> {
    let schedule = Schedule {
        dt: opts.dt_rk,
        t_final: opts.t_final,
        sample_interval: opts.sample_interval,
    };
    schedule.validate()?;
    let mut out = ExactEvolution::default();
    let per_sample = schedule.steps_per_sample();
    let l = &system.lindbladian;

    for k in 0..schedule.num_samples() {
        if k > 0 {
            for _ in 0..per_sample {
                rho = rk4_step(l, &rho, opts.dt_rk)?;
            }
        }
        let t = schedule.sample_time(k);
        let trace_err = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
        out.max_trace_error = out.max_trace_error.max(trace_err);
        out.max_hermiticity_error = out.max_hermiticity_error.max(hermiticity_error(&rho));
        if opts.check_positivity {
            let min_eig = min_eigenvalue(&rho);
            out.min_eigenvalue = out.min_eigenvalue.min(min_eig);
            if min_eig < -opts.positivity_tolerance {
                return Err(DgError::Positivity { time: t, min_eigenvalue: min_eig });
            }
        }
        if out.steady_time.is_none() && k > 0 && entrywise_norm1(&l.rhs(&rho)?) < STEADY_STATE_TOLERANCE {
            out.steady_time = Some(t);
        }
        out.times.push(t);
        out.occupation
            .push(system.number.iter().map(|n| n.trace_with(&rho).re).collect());
        out.coherence
            .push(system.annihilation.iter().map(|a| a.trace_with(&rho)).collect());
        if let Some(h) = &system.hopping {
            out.hopping.push(h.trace_with(&rho));
        }
    }
    out.final_rho = rho;
    Ok(out)
}

/// Stationary single-site `<n>` by repeated step halving.
///
/// Starts at `dt_start`, halves until two successive values agree within
/// `tol`, and returns `(value, dt_used)`.
pub fn steady_state_occupation(
    params: ModelParams,
    t_final: f64,
    dt_start: f64,
    tol: f64,
    max_halvings: usize,
) -> Result<(f64, f64)> {
    let run = |dt: f64| -> Result<f64> {
        let mut opts = ExactOptions::new(t_final, dt, t_final);
        opts.check_positivity = false;
        let ev = evolve_exact(params, 1, &opts)?;
        Ok(ev.occupation.last().map(|v| v[0]).unwrap_or(0.0))
    };
    let mut dt = dt_start;
    let mut prev = run(dt)?;
    for _ in 0..max_halvings {
        dt /= 2.0;
        let next = run(dt)?;
        if (next - prev).abs() < tol {
            return Ok((next, dt));
        }
        prev = next;
    }
    Err(DgError::RateUnresolvable(format!(
        "steady-state occupation not converged to {tol} after {max_halvings} halvings"
    )))
}

/// Per-trajectory coherence histories of the jump-unraveled Gutzwiller run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpComparison {
    pub times: Vec<f64>,
    /// `[trajectory][sample][site]`
    pub coherence: Vec<Vec<Vec<Complex64>>>,
    /// `[trajectory][sample]` spatially averaged `<n>`.
    pub density: Vec<Vec<f64>>,
    pub jumps: u64,
}

impl JumpComparison {
    pub fn max_abs_coherence(&self) -> f64 {
        self.coherence
            .iter()
            .flatten()
            .flatten()
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }
}

struct JumpKernel {
    dim: usize,
    gamma1: f64,
    gamma2: f64,
    hop: f64,
    // e^{diag((−i H − D) dt)} and the off-diagonal rest of (−i H − D) dt
    factor: Vec<Complex64>,
    off: Diagonals,
    a: Diagonals,
    a_dag: Diagonals,
    k1: Diagonals,
    k2: Diagonals,
    nbrs: Vec<Vec<usize>>,
}

impl JumpKernel {
    fn new(model: &LocalModel, geom: &LatticeGeometry, dt: f64) -> Result<Self> {
        let d = model.dim();
        let generator = &model.h_local.scale(Complex64::new(0.0, -dt)) - &model.damping.scale_real(dt);
        let factor = (0..d).map(|n| generator.get(n, n).exp()).collect();
        let off = LocalOperator::from_fn(d, |i, j| if i == j { ZERO } else { generator.get(i, j) })?.diagonals();
        Ok(Self {
            dim: model.dim(),
            gamma1: model.params.gamma1,
            gamma2: model.params.gamma2,
            hop: model.hop_coefficient,
            factor,
            off,
            a: model.a.diagonals(),
            a_dag: model.a_dag.diagonals(),
            k1: model.k1.diagonals(),
            k2: model.k2.diagonals(),
            nbrs: geom.neighbor_table(),
        })
    }

    fn mean_a(&self, psi: &[Complex64]) -> Complex64 {
        let mut buf = vec![ZERO; self.dim];
        self.a.apply_into(psi, &mut buf);
        fock::inner(psi, &buf)
    }

    /// One first-order step: per site, either a jump with probability
    /// `<K†K> dt` or the non-Hermitian drift (diagonal part exponentiated,
    /// as in the diffusive stepper), then renormalization.
    fn step(&self, sites: &mut [Vec<Complex64>], rng: &mut TrajectoryRng, dt: f64, jumps: &mut u64) {
        let means: Vec<Complex64> = sites.iter().map(|psi| self.mean_a(psi)).collect();
        let mut next = vec![ZERO; self.dim];
        for (s, psi) in sites.iter_mut().enumerate() {
            let r: f64 = rng.random();
            let (mut n1, mut n2) = (0.0, 0.0);
            for (n, z) in psi.iter().enumerate() {
                let p = z.norm_sqr();
                n1 += n as f64 * p;
                n2 += (n * n.saturating_sub(1)) as f64 * p;
            }
            let p1 = self.gamma1 * n1 * dt;
            let p2 = self.gamma2 * n2 * dt;
            if r < p1 {
                self.k1.apply_into(psi, &mut next);
                *jumps += 1;
            } else if r < p1 + p2 {
                self.k2.apply_into(psi, &mut next);
                *jumps += 1;
            } else {
                let nsum: Complex64 = self.nbrs[s].iter().map(|&t| means[t]).sum();
                let hop_dt = Complex64::new(0.0, self.hop * dt);
                next.copy_from_slice(psi);
                self.off.apply_add(Complex64::new(1.0, 0.0), psi, &mut next);
                self.a.apply_add(hop_dt * nsum.conj(), psi, &mut next);
                self.a_dag.apply_add(hop_dt * nsum, psi, &mut next);
                for (x, f) in next.iter_mut().zip(&self.factor) {
                    *x *= f;
                }
            }
            fock::normalize(&mut next);
            psi.copy_from_slice(&next);
        }
    }
}

/// Runs `n_traj` jump-unraveled Gutzwiller trajectories from the vacuum.
pub fn jump_gutzwiller_compare(
    params: ModelParams,
    geom: &LatticeGeometry,
    n_traj: u64,
    schedule: &Schedule,
    master_seed: u64,
) -> Result<JumpComparison> {
    schedule.validate()?;
    geom.validate()?;
    let model = build_local_model(params)?;
    let kernel = JumpKernel::new(&model, geom, schedule.dt)?;
    let n_sites = geom.num_sites();
    let d = model.dim();

    let runs: Vec<(Vec<Vec<Complex64>>, Vec<f64>, u64)> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = TrajectoryRng::seed_from_u64(mix_seed(master_seed, k));
            let mut sites = vec![fock::basis_state(d, 0); n_sites];
            let mut coherence = Vec::with_capacity(schedule.num_samples());
            let mut density = Vec::with_capacity(schedule.num_samples());
            let mut jumps = 0u64;
            for sample in 0..schedule.num_samples() {
                if sample > 0 {
                    for _ in 0..schedule.steps_per_sample() {
                        kernel.step(&mut sites, &mut rng, schedule.dt, &mut jumps);
                    }
                }
                coherence.push(sites.iter().map(|psi| kernel.mean_a(psi)).collect());
                let n_tot: f64 = sites
                    .iter()
                    .map(|psi| psi.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum::<f64>())
                    .sum();
                density.push(n_tot / n_sites as f64);
            }
            (coherence, density, jumps)
        })
        .collect();

    let mut out = JumpComparison {
        times: schedule.sample_times(),
        coherence: Vec::with_capacity(runs.len()),
        density: Vec::with_capacity(runs.len()),
        jumps: 0,
    };
    for (c, n, j) in runs {
        out.coherence.push(c);
        out.density.push(n);
        out.jumps += j;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn params(j: f64, g2: f64, cutoff: usize) -> ModelParams {
        ModelParams { g2, ..ModelParams::reference_regime(j, cutoff) }
    }

    // Term-by-term dense form of the master equation.
    fn direct_rhs(rho: &DensityMatrix, h: &DensityMatrix, jumps: &[DensityMatrix]) -> DensityMatrix {
        let i = Complex64::new(0.0, 1.0);
        let mut out = (h * rho - rho * h) * (-i);
        for k in jumps {
            let kdk = k.adjoint() * k;
            out += (k * rho * k.adjoint()) * Complex64::new(1.0, 0.0)
                - (&kdk * rho + rho * &kdk) * Complex64::new(0.5, 0.0);
        }
        out
    }

    fn random_rho(d: usize, seed: u64) -> DensityMatrix {
        let mut rng = TrajectoryRng::seed_from_u64(seed);
        let m = DensityMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let rho = &m * m.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn vacuum_is_dark_without_drive() {
        let sys = ExactSystem::new(params(0.5, 0.0, 6), 2, DEFAULT_DIMENSION_CAP).unwrap();
        let rhs = sys.lindbladian.rhs(&sys.vacuum()).unwrap();
        assert_eq!(entrywise_norm1(&rhs), 0.0);
    }

    #[test]
    fn single_photon_decays_at_gamma1() {
        let p = ModelParams { gamma1: 0.7, ..params(0.0, 0.0, 6) };
        let sys = ExactSystem::new(p, 1, DEFAULT_DIMENSION_CAP).unwrap();
        let mut rho = DensityMatrix::zeros(6, 6);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let rhs = sys.lindbladian.rhs(&rho).unwrap();
        // d<n>/dt = −γ₁ <n> on |1>; two-photon loss cannot act on one photon
        assert!((sys.number[0].trace_with(&rhs).re + 0.7).abs() < 1e-14);
    }

    #[test]
    fn two_sites_without_hopping_factorize() {
        let opts = ExactOptions::new(2.0, 1e-3, 0.1);
        let one = evolve_exact(params(0.0, 4.0, 6), 1, &opts).unwrap();
        let two = evolve_exact(params(0.0, 4.0, 6), 2, &opts).unwrap();
        for (a, b) in one.occupation.iter().zip(&two.occupation) {
            assert!((a[0] - b[0]).abs() < 1e-9);
            assert!((a[0] - b[1]).abs() < 1e-9);
        }
        assert!(one.occupation.last().unwrap()[0] > 0.1);
        assert!(two.hopping.iter().all(|h| h.norm() < 1e-9));
    }

    #[test]
    fn integrity_of_two_site_run() {
        let opts = ExactOptions::new(1.0, 1e-3, 0.25);
        let ev = evolve_exact(params(0.5, 4.0, 5), 2, &opts).unwrap();
        assert!(ev.max_trace_error < 1e-10);
        assert!(ev.max_hermiticity_error < 1e-12);
        assert!(ev.min_eigenvalue > -1e-10);
        // parity symmetry keeps <a> at zero from the vacuum
        assert!(ev.coherence.iter().flatten().all(|a| a.norm() < 1e-12));
        assert!(ev.hopping.last().unwrap().re > 0.0);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        assert_eq!(
            ExactSystem::new(params(0.5, 4.0, 21), 2, DEFAULT_DIMENSION_CAP).err(),
            Some(DgError::DimensionCap { dim: 441, cap: 400 })
        );
        assert!(matches!(ExactSystem::new(params(0.5, 4.0, 5), 3, 400), Err(DgError::Config(_))));
    }

    #[test]
    fn steady_state_halving_converges() {
        let (n, dt) = steady_state_occupation(params(0.0, 4.0, 8), 20.0, 4e-3, 1e-8, 4).unwrap();
        assert!(n > 0.0 && dt <= 2e-3);
    }

    #[test]
    fn jump_unraveling_never_builds_coherence() {
        let geom = LatticeGeometry::square(3).unwrap();
        let schedule = Schedule { dt: 1e-3, t_final: 2.0, sample_interval: 0.5 };
        let cmp = jump_gutzwiller_compare(params(1.0, 4.0, 8), &geom, 4, &schedule, 3).unwrap();
        assert_eq!(cmp.max_abs_coherence(), 0.0);
        assert!(cmp.jumps > 0);
        assert!(cmp.density.iter().all(|d| d.iter().all(|x| x.is_finite())));
        assert!(cmp.density[0].last().unwrap() > &0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generator_matches_direct_form(seed in any::<u64>(), j in 0.0f64..2.0) {
            let sys = ExactSystem::new(params(j, 4.0, 4), 2, DEFAULT_DIMENSION_CAP).unwrap();
            let model = build_local_model(params(j, 4.0, 4)).unwrap();
            let id = DensityMatrix::identity(4, 4);
            let (a, h) = (to_dense(&model.a), to_dense(&model.h_local));
            let (k1, k2) = (to_dense(&model.k1), to_dense(&model.k2));
            let ham = kron(&h, &id) + kron(&id, &h)
                - (kron(&a, &a.adjoint()) + kron(&a.adjoint(), &a)) * Complex64::new(j, 0.0);
            let jumps = [kron(&k1, &id), kron(&k2, &id), kron(&id, &k1), kron(&id, &k2)];
            let rho = random_rho(16, seed);
            let fast = sys.lindbladian.rhs(&rho).unwrap();
            let slow = direct_rhs(&rho, &ham, &jumps);
            prop_assert!(entrywise_norm1(&(&fast - &slow)) < 1e-12);
            // trace preserving and Hermiticity preserving
            prop_assert!(fast.trace().norm() < 1e-12);
            prop_assert!(hermiticity_error(&fast) < 1e-12);
        }
    }
}
