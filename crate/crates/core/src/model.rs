//! On-site Hamiltonian, loss channels and hopping of the quadratically
//! driven Bose-Hubbard lattice.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DgError, Result};
use crate::fock::{annihilation_op, number_op, LocalOperator};

/// Physical couplings in units of the loss rate, plus the Fock cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Detuning Δ between cavity and half the pump frequency.
    pub delta: f64,
    /// Kerr strength U.
    pub u: f64,
    /// Two-photon drive amplitude G.
    pub g2: f64,
    /// Nearest-neighbor hopping J.
    pub j_hop: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Fock dimension d (occupations 0..d-1).
    pub cutoff: usize,
}

impl ModelParams {
    /// γ₁ = γ₂ = 1, G = 4, U = 10 and Δ = J.
    pub fn reference_regime(j_hop: f64, cutoff: usize) -> Self {
        Self {
            delta: j_hop,
            u: 10.0,
            g2: 4.0,
            j_hop,
            gamma1: 1.0,
            gamma2: 1.0,
            cutoff,
        }
    }

    /// Every violated invariant, empty when the parameters are usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let named = [
            ("delta", self.delta),
            ("u", self.u),
            ("g2", self.g2),
            ("j_hop", self.j_hop),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ];
        for (name, value) in named {
            if !value.is_finite() {
                out.push(format!("{name} must be finite, got {value}"));
            }
        }
        if self.gamma1 < 0.0 {
            out.push(format!("gamma1 must be >= 0, got {}", self.gamma1));
        }
        if self.gamma2 < 0.0 {
            out.push(format!("gamma2 must be >= 0, got {}", self.gamma2));
        }
        if self.gamma1 == 0.0 && self.gamma2 == 0.0 {
            out.push("gamma1 and gamma2 cannot both be zero".to_string());
        }
        if self.cutoff < 4 {
            out.push(format!("cutoff must be >= 4, got {}", self.cutoff));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(DgError::InvalidParams(v))
        }
    }
}

/// Precomputed single-site operators shared by every site of the lattice.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub params: ModelParams,
    /// `Δ a†a + (U/2) a†a†aa + (G/2)(a†² + a²)`.
    pub h_local: LocalOperator,
    /// `√γ₁ a`.
    pub k1: LocalOperator,
    /// `√γ₂ a²`.
    pub k2: LocalOperator,
    /// `½ (k1†k1 + k2†k2)`.
    pub damping: LocalOperator,
    pub hop_coefficient: f64,
    pub a: LocalOperator,
    pub a_dag: LocalOperator,
    pub number: LocalOperator,
}

impl LocalModel {
    pub fn dim(&self) -> usize {
        self.params.cutoff
    }

    /// `[K₁, K₂]`.
    pub fn jumps(&self) -> [&LocalOperator; 2] {
        [&self.k1, &self.k2]
    }
}

pub fn build_local_model(p: ModelParams) -> Result<LocalModel> {
    p.validate()?;
    let d = p.cutoff;
    let a = annihilation_op(d)?;
    let a_dag = a.adjoint();
    let number = number_op(d)?;
    let a2 = &a * &a;
    let a_dag2 = &a_dag * &a_dag;

    let kerr = &a_dag2 * &a2;
    let drive = &a_dag2 + &a2;
    let h_local = &(&number.scale_real(p.delta) + &kerr.scale_real(p.u / 2.0))
        + &drive.scale_real(p.g2 / 2.0);
    // Rounding can leave h_local a hair off Hermitian only if the inputs were
    // not; symmetrize so the invariant holds exactly.
    let h_local = h_local.hermitian_part();

    let k1 = a.scale_real(p.gamma1.sqrt());
    let k2 = a2.scale_real(p.gamma2.sqrt());
    let damping = (&(&k1.adjoint() * &k1) + &(&k2.adjoint() * &k2))
        .scale_real(0.5)
        .hermitian_part();

    Ok(LocalModel {
        params: p,
        h_local,
        k1,
        k2,
        damping,
        hop_coefficient: p.j_hop,
        a,
        a_dag,
        number,
    })
}

/// Mean-field hopping operator `−J (conj(S) a + S a†)` for neighbor sum
/// `S = Σ <a>` over the neighbors of a site.
pub fn mean_field_hamiltonian(m: &LocalModel, neighbor_sum: Complex64) -> LocalOperator {
    let j = m.hop_coefficient;
    &m.a.scale(-j * neighbor_sum.conj()) + &m.a_dag.scale(-j * neighbor_sum)
}
