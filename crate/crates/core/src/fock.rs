//! Dense operators on a single truncated Fock space.
//!
//! Amplitudes are indexed by occupation, lowest first: `v[n]` is the
//! coefficient of `|n>`. Every module shares this convention.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::{DgError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Normalization tolerance enforced by [`expectation`] in checked builds.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// A dense `d x d` complex matrix acting on one site.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl LocalOperator {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            entries: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut op = Self::zeros(dim)?;
        for n in 0..dim {
            op.set(n, n, ONE);
        }
        Ok(op)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        check_dim(dim)?;
        let mut entries = Vec::with_capacity(dim * dim);
        for row in 0..dim {
            for col in 0..dim {
                entries.push(f(row, col));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    /// Row-major view of the matrix entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = self.clone();
        for row in 0..d {
            for col in 0..d {
                out.entries[row * d + col] = self.entries[col * d + row].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        check_same(self.dim, rhs.dim)?;
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let lhs = self.entries[i * d + k];
                if lhs == ZERO {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += lhs * rhs.entries[k * d + j];
                }
            }
        }
        Ok(Self { dim: d, entries: out })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        check_same(self.dim, rhs.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.try_add(&rhs.scale_real(-1.0))
    }

    /// `self * rhs - rhs * self`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.matmul(rhs)?.try_sub(&rhs.matmul(self)?)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from `entries[m][n] == conj(entries[n][m])`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for m in 0..d {
            for n in m..d {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Hermitian part `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&adj.entries)
                .map(|(a, b)| (a + b) * 0.5)
                .collect(),
        }
    }

    /// Sparse-by-diagonal copy used by the trajectory kernels.
    pub fn diagonals(&self) -> Diagonals {
        Diagonals::from_dense(self)
    }
}

impl Add for &LocalOperator {
    type Output = LocalOperator;

    fn add(self, rhs: &LocalOperator) -> LocalOperator {
        self.try_add(rhs).expect("operator dimensions must agree")
    }
}

impl Sub for &LocalOperator {
    type Output = LocalOperator;

    fn sub(self, rhs: &LocalOperator) -> LocalOperator {
        self.try_sub(rhs).expect("operator dimensions must agree")
    }
}

impl Mul for &LocalOperator {
    type Output = LocalOperator;

    fn mul(self, rhs: &LocalOperator) -> LocalOperator {
        self.matmul(rhs).expect("operator dimensions must agree")
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(DgError::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

fn check_same(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(DgError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// Bosonic annihilation operator: `a|n> = sqrt(n)|n-1>`.
pub fn annihilation_op(d: usize) -> Result<LocalOperator> {
    let mut op = LocalOperator::zeros(d)?;
    for n in 1..d {
        op.set(n - 1, n, Complex64::new((n as f64).sqrt(), 0.0));
    }
    Ok(op)
}

pub fn creation_op(d: usize) -> Result<LocalOperator> {
    Ok(annihilation_op(d)?.adjoint())
}

/// `a^dagger a`, diagonal `(0, 1, ..., d-1)`.
pub fn number_op(d: usize) -> Result<LocalOperator> {
    let mut op = LocalOperator::zeros(d)?;
    for n in 0..d {
        op.set(n, n, Complex64::new(n as f64, 0.0));
    }
    Ok(op)
}

/// Parity `(-1)^n`.
pub fn parity_op(d: usize) -> Result<LocalOperator> {
    let mut op = LocalOperator::zeros(d)?;
    for n in 0..d {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        op.set(n, n, Complex64::new(sign, 0.0));
    }
    Ok(op)
}

pub fn apply(op: &LocalOperator, v: &[Complex64]) -> Result<Vec<Complex64>> {
    check_same(op.dim, v.len())?;
    let d = op.dim;
    Ok((0..d)
        .map(|row| {
            op.entries[row * d..(row + 1) * d]
                .iter()
                .zip(v)
                .map(|(m, x)| m * x)
                .sum()
        })
        .collect())
}

/// `<v|op|v>` for a normalized `v`.
///
/// Normalization is asserted only in builds with debug assertions.
pub fn expectation(op: &LocalOperator, v: &[Complex64]) -> Result<Complex64> {
    debug_assert!(
        (norm_sqr(v).sqrt() - 1.0).abs() <= NORM_TOLERANCE,
        "expectation requires a normalized state, got norm {}",
        norm_sqr(v).sqrt()
    );
    let ov = apply(op, v)?;
    Ok(inner(v, &ov))
}

/// `<u|w>`, antilinear in the first argument.
#[inline]
pub fn inner(u: &[Complex64], w: &[Complex64]) -> Complex64 {
    u.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Scales `v` to unit norm and returns the norm it had.
pub fn normalize(v: &mut [Complex64]) -> f64 {
    let norm = norm_sqr(v).sqrt();
    if norm > 0.0 {
        let inv = 1.0 / norm;
        for z in v.iter_mut() {
            *z *= inv;
        }
    }
    norm
}

pub fn basis_state(d: usize, k: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

/// Truncated coherent state `∝ Σ αⁿ/√(n!) |n>`, renormalized after truncation.
pub fn coherent_state(d: usize, alpha: Complex64) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(d);
    let mut term = ONE;
    for n in 0..d {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        v.push(term);
    }
    normalize(&mut v);
    v
}

/// An operator stored as its nonzero diagonals.
///
/// Every operator the Bose-Hubbard model needs is banded (offsets within
/// ±4 once the Milstein terms are included), so the per-step kernels only
/// touch the occupied diagonals of the dense matrix they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonals {
    dim: usize,
    // (offset = col - row, values indexed by row over the valid range)
    bands: Vec<(isize, Vec<Complex64>)>,
}

impl Diagonals {
    pub fn from_dense(op: &LocalOperator) -> Self {
        let d = op.dim as isize;
        let mut bands = Vec::new();
        for offset in -(d - 1)..d {
            let rows = row_range(op.dim, offset);
            let values: Vec<Complex64> = rows
                .clone()
                .map(|r| op.get(r, (r as isize + offset) as usize))
                .collect();
            if values.iter().any(|z| *z != ZERO) {
                bands.push((offset, values));
            }
        }
        Self { dim: op.dim, bands }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Offsets of the stored diagonals.
    pub fn offsets(&self) -> impl Iterator<Item = isize> + '_ {
        self.bands.iter().map(|(k, _)| *k)
    }

    /// `out += coef * (self · v)`.
    #[inline]
    pub fn apply_add(&self, coef: Complex64, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (offset, values) in &self.bands {
            let start = row_range(self.dim, *offset).start;
            let shift = start as isize + offset;
            let src = &v[shift as usize..shift as usize + values.len()];
            let dst = &mut out[start..start + values.len()];
            for ((o, m), x) in dst.iter_mut().zip(values).zip(src) {
                *o += coef * (m * x);
            }
        }
    }

    /// `out = self · v`.
    #[inline]
    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        self.apply_add(ONE, v, out);
    }
}

fn row_range(dim: usize, offset: isize) -> std::ops::Range<usize> {
    if offset >= 0 {
        0..dim - offset as usize
    } else {
        (-offset) as usize..dim
    }
}
