//! P+d master and slave control laws with gravity compensation.
//!
//! Slaves transmit formation-corrected positions `q̌ᵢ = qᵢ − γᵢ`, so the
//! master's zero-order-hold registers hold `q̌ᵢ` directly and the master never
//! needs the offsets.

use nalgebra::SymmetricEigen;

use crate::error::{check_len, Error, Result};
use crate::manipulator::JointVector;
use crate::Matrix;

/// Per-slave proportional and damping gains `Kᵢᵖ`, `Kᵢᵈ` (symmetric positive definite).
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub kp: Vec<Matrix>,
    pub kd: Vec<Matrix>,
}

impl GainSet {
    pub fn new(kp: Vec<Matrix>, kd: Vec<Matrix>) -> Result<Self> {
        let gains = Self { kp, kd };
        gains.validate()?;
        Ok(gains)
    }

    /// Scaled-identity gains `kpᵢ·I`, `kdᵢ·I` of size `joints`.
    pub fn scaled_identity(kp: &[f64], kd: &[f64], joints: usize) -> Result<Self> {
        let eye = |k: f64| Matrix::identity(joints, joints) * k;
        Self::new(
            kp.iter().map(|&k| eye(k)).collect(),
            kd.iter().map(|&k| eye(k)).collect(),
        )
    }

    /// Identical scaled-identity gains for every slave.
    pub fn uniform(slaves: usize, kp: f64, kd: f64, joints: usize) -> Result<Self> {
        Self::scaled_identity(&vec![kp; slaves], &vec![kd; slaves], joints)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kp.is_empty() {
            return Err(Error::InvalidParameter("at least one slave gain required".into()));
        }
        check_len(self.kd.len(), self.kp.len(), "damping gains vs stiffness gains")?;
        let n = self.kp[0].nrows();
        for (name, set) in [("Kp", &self.kp), ("Kd", &self.kd)] {
            for (i, k) in set.iter().enumerate() {
                if k.nrows() != n || k.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: k.nrows().max(k.ncols()),
                        context: "gain matrix size",
                    });
                }
                if !is_spd(k) {
                    return Err(Error::InvalidParameter(format!(
                        "{name} of slave {} is not symmetric positive definite",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn slaves(&self) -> usize {
        self.kp.len()
    }

    pub fn joints(&self) -> usize {
        self.kp[0].nrows()
    }

    /// Scalars `(kpᵢ, kdᵢ)` if every gain is a multiple of the identity.
    pub fn as_scaled_identity(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        fn scalar(k: &Matrix) -> Option<f64> {
            let s = k[(0, 0)];
            let reference = Matrix::identity(k.nrows(), k.ncols()) * s;
            let tol = 1e-12 * (1.0 + s.abs());
            ((k - reference).amax() <= tol).then_some(s)
        }
        let kp = self.kp.iter().map(scalar).collect::<Option<Vec<_>>>()?;
        let kd = self.kd.iter().map(scalar).collect::<Option<Vec<_>>>()?;
        Some((kp, kd))
    }
}

fn is_spd(k: &Matrix) -> bool {
    if !k.is_square() || (k - k.transpose()).amax() > 1e-12 * (1.0 + k.amax()) {
        return false;
    }
    SymmetricEigen::new(k.clone()).eigenvalues.min() > 0.0
}

/// Constant formation offsets `γᵢ` of the slaves from their geometric centre.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationGeometry {
    pub offsets: Vec<JointVector>,
}

impl FormationGeometry {
    pub fn new(offsets: Vec<JointVector>) -> Result<Self> {
        let formation = Self { offsets };
        formation.validate()?;
        Ok(formation)
    }

    /// Three-slave formation used by the reference scenarios.
    pub fn reference() -> Self {
        let v = |a: f64, b: f64| JointVector::from_column_slice(&[a, b]);
        Self {
            offsets: vec![v(0.1, -0.3), v(-0.3, 0.15), v(0.2, 0.15)],
        }
    }

    /// Default formation for `slaves` 2-DOF arms: the reference offsets for
    /// three slaves, otherwise points evenly spaced on a 0.2 rad circle.
    pub fn default_for(slaves: usize) -> Self {
        if slaves == 3 {
            return Self::reference();
        }
        let offsets = (0..slaves)
            .map(|i| {
                let phase = std::f64::consts::TAU * i as f64 / slaves as f64;
                JointVector::from_column_slice(&[0.2 * phase.cos(), 0.2 * phase.sin()])
            })
            .collect();
        Self { offsets }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.offsets.first() else {
            return Err(Error::InvalidParameter("formation has no slaves".into()));
        };
        let n = first.len();
        let mut sum = JointVector::zeros(n);
        for g in &self.offsets {
            check_len(g.len(), n, "formation offset")?;
            sum += g;
        }
        if sum.amax() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "formation offsets must sum to zero (residual {:.3e})",
                sum.amax()
            )));
        }
        for (i, a) in self.offsets.iter().enumerate() {
            for b in &self.offsets[i + 1..] {
                if a == b {
                    return Err(Error::InvalidParameter(
                        "formation offsets must be pairwise distinct".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn slaves(&self) -> usize {
        self.offsets.len()
    }

    /// Formation-corrected position `q̌ᵢ = qᵢ − γᵢ`.
    pub fn corrected(&self, i: usize, q: &JointVector) -> Result<JointVector> {
        let offset = self.offsets.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            count: self.offsets.len(),
        })?;
        check_len(q.len(), offset.len(), "slave position")?;
        Ok(q - offset)
    }
}

/// Master torque `τₘ = −(1/N) Σ [Kᵢᵖ(qₘ − q̂ᵢ) + Kᵢᵈ q̇ₘ] + Gₘ(qₘ)`.
///
/// `held_slave_positions` are the master-side register contents, already
/// formation-corrected.
pub fn master_control(
    gains: &GainSet,
    q_m: &JointVector,
    dq_m: &JointVector,
    held_slave_positions: &[JointVector],
    gravity_comp: &JointVector,
) -> Result<JointVector> {
    let slaves = gains.slaves();
    check_len(held_slave_positions.len(), slaves, "held slave positions")?;
    let n = gains.joints();
    check_len(q_m.len(), n, "master position")?;
    check_len(dq_m.len(), n, "master velocity")?;
    check_len(gravity_comp.len(), n, "master gravity compensation")?;

    let mut acc = JointVector::zeros(n);
    for ((kp, kd), held) in gains.kp.iter().zip(&gains.kd).zip(held_slave_positions) {
        check_len(held.len(), n, "held slave position")?;
        acc += kp * (q_m - held) + kd * dq_m;
    }
    Ok(gravity_comp - acc / slaves as f64)
}

/// Slave torque `τᵢ = −Kᵢᵖ(q̌ᵢ − q̂ₘ) − Kᵢᵈ q̇ᵢ + Gᵢ(qᵢ)` with `q̌ᵢ = qᵢ − γᵢ`.
pub fn slave_control(
    gains: &GainSet,
    formation: &FormationGeometry,
    i: usize,
    q_si: &JointVector,
    dq_si: &JointVector,
    held_master_position: &JointVector,
    gravity_comp: &JointVector,
) -> Result<JointVector> {
    if i >= gains.slaves() {
        return Err(Error::IndexOutOfRange {
            index: i,
            count: gains.slaves(),
        });
    }
    let n = gains.joints();
    check_len(dq_si.len(), n, "slave velocity")?;
    check_len(held_master_position.len(), n, "held master position")?;
    check_len(gravity_comp.len(), n, "slave gravity compensation")?;
    let corrected = formation.corrected(i, q_si)?;
    Ok(gravity_comp
        - &gains.kp[i] * (corrected - held_master_position)
        - &gains.kd[i] * dq_si)
}
