//! LMI stability certificates for the scheduled closed loop and the search
//! for the maximum allowable transmission interval.
//!
//! All gains are restricted to scaled identities `k·I`. For such data every
//! block matrix is invariant under `X ↦ (I ⊗ O)ᵀ X (I ⊗ O)` for orthogonal
//! `O`, so averaging any matrix-valued solution over the orthogonal group
//! yields a scaled-identity solution of the same convex problem. Searching
//! over scalar multiples of the identity is therefore exact. General matrix
//! gains are rejected with [`Error::UnsupportedGains`].

mod blocks;
mod definite;
mod margin;
mod rr;
pub mod tables;
mod tod;

pub use blocks::{assemble_omega, assemble_pi, assemble_sigma};
pub use definite::{feasibility_eps, is_negative_definite, max_eigenvalue};
pub use margin::{max_mati, MatiSearch, DEFAULT_RR_TOL, DEFAULT_TOD_TOL};
pub use rr::{feasible_rr, rr_analytic_max_mati, rr_closed_form_feasible};
pub use tod::{feasible_tod, TOD_EVALUATION_CAP};

pub use crate::network::ProtocolKind;

use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::Matrix;

/// One point of the stability tables: gains, delay bound and protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityQuery {
    pub gains: GainSet,
    pub mad: f64,
    pub protocol: ProtocolKind,
}

impl StabilityQuery {
    pub fn new(gains: GainSet, mad: f64, protocol: ProtocolKind) -> Result<Self> {
        if gains.slaves() < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least two slaves required, got {}",
                gains.slaves()
            )));
        }
        if !(mad >= 0.0 && mad.is_finite()) {
            return Err(Error::InvalidParameter(format!("MAD must be >= 0, got {mad}")));
        }
        Ok(Self {
            gains,
            mad,
            protocol,
        })
    }

    pub fn slaves(&self) -> usize {
        self.gains.slaves()
    }

    pub fn joints(&self) -> usize {
        self.gains.joints()
    }

    pub(crate) fn scalar_gains(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.gains.as_scaled_identity().ok_or_else(|| {
            Error::UnsupportedGains(
                "feasibility search requires gains of the form k*I for every slave".into(),
            )
        })
    }
}

/// Decision variables of the Round-Robin certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiVariablesRR {
    pub r_m: Matrix,
    pub r_s: Vec<Matrix>,
}

/// Decision variables of the Try-Once-Discard certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiVariablesTOD {
    pub r_m: Matrix,
    pub r_s: Vec<Matrix>,
    pub q: Vec<Matrix>,
    pub u: Vec<Matrix>,
    pub g: Vec<Matrix>,
}

impl LmiVariablesTOD {
    /// The `(R_m, R_si)` part, used by the delay functional.
    pub fn delay_part(&self) -> LmiVariablesRR {
        LmiVariablesRR {
            r_m: self.r_m.clone(),
            r_s: self.r_s.clone(),
        }
    }
}

/// Certificate variables of either protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    RoundRobin(LmiVariablesRR),
    TryOnceDiscard(LmiVariablesTOD),
}

/// Outcome of the inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    /// Iteration cap hit without a certificate either way; treated as infeasible.
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult<V> {
    pub feasible: bool,
    pub status: SolveStatus,
    /// Variables making every block negative definite (feasible case only).
    pub witness: Option<V>,
    /// Largest eigenvalue over all assembled blocks at the best point found.
    pub max_block_eigenvalue: f64,
    /// Solver iterations spent (Newton steps for TOD, 1 for RR).
    pub iterations: usize,
}

impl<V> FeasibilityResult<V> {
    pub(crate) fn infeasible(status: SolveStatus, max_block_eigenvalue: f64, iterations: usize) -> Self {
        Self {
            feasible: false,
            status,
            witness: None,
            max_block_eigenvalue,
            iterations,
        }
    }
}

pub(crate) fn scaled_eye(n: usize, s: f64) -> Matrix {
    Matrix::identity(n, n) * s
}
