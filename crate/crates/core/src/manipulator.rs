//! Lagrangian dynamics of a two-link planar revolute arm.
//!
//! Both links are modelled as point masses at their distal ends, giving the
//! closed-form inertia, Coriolis and gravity terms
//!
//! ```text
//! M(q) q̈ + C(q, q̇) q̇ + G(q) = f + τ
//! ```
//!
//! Joint angles are measured from the horizontal x axis; gravity acts along −y.

use nalgebra::{DVector, Matrix2};

use crate::error::{check_len, Error, Result};
use crate::Matrix;

/// Joint-space vector: positions (rad), velocities (rad/s) or torques (N·m).
pub type JointVector = DVector<f64>;

/// Number of joints of the closed-form planar model.
pub const JOINTS: usize = 2;

/// Standard gravitational acceleration, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Physical constants of one 2-DOF arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorParams {
    /// Link masses (kg).
    pub link_masses: [f64; 2],
    /// Link lengths (m).
    pub link_lengths: [f64; 2],
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
}

impl Default for ManipulatorParams {
    /// Arm used for the master and all slaves in the reference scenarios.
    fn default() -> Self {
        Self {
            link_masses: [1.0, 0.5],
            link_lengths: [0.5, 0.3],
            gravity: STANDARD_GRAVITY,
        }
    }
}

/// Joint positions and velocities of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorState {
    pub q: JointVector,
    pub dq: JointVector,
}

impl ManipulatorState {
    pub fn new(q: JointVector, dq: JointVector) -> Result<Self> {
        check_len(dq.len(), q.len(), "velocity vs position")?;
        if q.is_empty() {
            return Err(Error::InvalidParameter("joint count must be at least 1".into()));
        }
        Ok(Self { q, dq })
    }

    /// State at rest at the given configuration.
    pub fn at_rest(q: &[f64]) -> Self {
        Self {
            q: JointVector::from_column_slice(q),
            dq: JointVector::zeros(q.len()),
        }
    }

    pub fn joints(&self) -> usize {
        self.q.len()
    }
}

impl ManipulatorParams {
    pub fn new(link_masses: [f64; 2], link_lengths: [f64; 2], gravity: f64) -> Result<Self> {
        let params = Self {
            link_masses,
            link_lengths,
            gravity,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.link_masses.iter().all(|&m| positive(m)) {
            return Err(Error::InvalidParameter(format!(
                "link masses must be strictly positive, got {:?}",
                self.link_masses
            )));
        }
        if !self.link_lengths.iter().all(|&l| positive(l)) {
            return Err(Error::InvalidParameter(format!(
                "link lengths must be strictly positive, got {:?}",
                self.link_lengths
            )));
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidParameter("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Constant `l1·l2·m2` that scales every Coriolis entry.
    pub fn coupling(&self) -> f64 {
        self.link_lengths[0] * self.link_lengths[1] * self.link_masses[1]
    }

    /// Inertia matrix `M(q)`.
    pub fn mass_matrix(&self, q: &JointVector) -> Result<Matrix> {
        check_len(q.len(), JOINTS, "joint positions")?;
        let [m1, m2] = self.link_masses;
        let [l1, l2] = self.link_lengths;
        let c2 = q[1].cos();
        let m22 = l2 * l2 * m2;
        let m11 = m22 + l1 * l1 * (m1 + m2) + 2.0 * l1 * l2 * m2 * c2;
        let m12 = m22 + l1 * l2 * m2 * c2;
        Ok(Matrix::from_row_slice(2, 2, &[m11, m12, m12, m22]))
    }

    /// Coriolis/centrifugal matrix `C(q, q̇)`; `Ṁ − 2C` is skew-symmetric.
    pub fn coriolis_matrix(&self, q: &JointVector, dq: &JointVector) -> Result<Matrix> {
        check_len(q.len(), JOINTS, "joint positions")?;
        check_len(dq.len(), JOINTS, "joint velocities")?;
        let h = self.coupling() * q[1].sin();
        Ok(Matrix::from_row_slice(
            2,
            2,
            &[-h * dq[1], -h * (dq[0] + dq[1]), h * dq[0], 0.0],
        ))
    }

    /// Gravity torque `G(q)` (N·m).
    pub fn gravity_vector(&self, q: &JointVector) -> Result<JointVector> {
        check_len(q.len(), JOINTS, "joint positions")?;
        let [m1, m2] = self.link_masses;
        let [l1, l2] = self.link_lengths;
        let g = self.gravity;
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let distal = g * l2 * l2 * m2 * c12 / l2;
        // (l2²m2 + l1²(m1+m2) − l2²m2)/l1 reduces to l1(m1+m2).
        let proximal = g * (l2 * l2 * m2 + l1 * l1 * (m1 + m2) - l2 * l2 * m2) * c1 / l1;
        Ok(JointVector::from_column_slice(&[distal + proximal, distal]))
    }

    /// Joint accelerations `q̈ = M⁻¹(f + τ − C q̇ − G)`.
    pub fn forward_dynamics(
        &self,
        state: &ManipulatorState,
        applied_torque: &JointVector,
        external_force: &JointVector,
    ) -> Result<JointVector> {
        check_len(applied_torque.len(), JOINTS, "applied torque")?;
        check_len(external_force.len(), JOINTS, "external force")?;
        let mass = self.mass_matrix(&state.q)?;
        let coriolis = self.coriolis_matrix(&state.q, &state.dq)?;
        let gravity = self.gravity_vector(&state.q)?;
        let rhs = external_force + applied_torque - coriolis * &state.dq - gravity;
        solve_spd(&mass, &rhs).ok_or_else(|| {
            Error::MassMatrixNotPositiveDefinite(state.q.iter().copied().collect())
        })
    }

    /// Planar end-effector position `(x, y)` in metres.
    pub fn end_effector(&self, q: &JointVector) -> Result<[f64; 2]> {
        check_len(q.len(), JOINTS, "joint positions")?;
        let [l1, l2] = self.link_lengths;
        let q12 = q[0] + q[1];
        Ok([
            l1 * q[0].cos() + l2 * q12.cos(),
            l1 * q[0].sin() + l2 * q12.sin(),
        ])
    }

    /// Geometric Jacobian of [`end_effector`](Self::end_effector).
    pub fn jacobian(&self, q: &JointVector) -> Result<Matrix> {
        check_len(q.len(), JOINTS, "joint positions")?;
        let [l1, l2] = self.link_lengths;
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        Ok(Matrix::from_row_slice(
            2,
            2,
            &[
                -l1 * s1 - l2 * s12,
                -l2 * s12,
                l1 * c1 + l2 * c12,
                l2 * c12,
            ],
        ))
    }

    /// Joint torque produced by a Cartesian force applied at the end effector.
    pub fn cartesian_to_joint(&self, q: &JointVector, force: [f64; 2]) -> Result<JointVector> {
        let jac = self.jacobian(q)?;
        Ok(jac.transpose() * JointVector::from_column_slice(&force))
    }
}

/// Tolerance below which a Cholesky pivot is treated as a loss of definiteness.
const SPD_PIVOT_TOL: f64 = 1e-12;

/// Solves `M x = b` for a symmetric positive-definite 2×2 `M`.
fn solve_spd(mass: &Matrix, rhs: &JointVector) -> Option<JointVector> {
    let m = Matrix2::new(mass[(0, 0)], mass[(0, 1)], mass[(1, 0)], mass[(1, 1)]);
    let chol = m.cholesky()?;
    let l = chol.l();
    if l[(0, 0)] * l[(0, 0)] <= SPD_PIVOT_TOL || l[(1, 1)] * l[(1, 1)] <= SPD_PIVOT_TOL {
        return None;
    }
    let x = chol.solve(&nalgebra::Vector2::new(rhs[0], rhs[1]));
    Some(JointVector::from_column_slice(x.as_slice()))
}
