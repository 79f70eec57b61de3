//! External force models of the reference scenarios, as joint torques.

use crate::error::Result;
use crate::manipulator::{JointVector, ManipulatorParams};

/// `F₁(t) = 25 + 10 sin t` (N), pushing the master end effector along +y.
pub fn bounded_force_profile(t: f64) -> f64 {
    25.0 + 10.0 * t.sin()
}

/// Operator torque of the bounded-force scenario, `f_m = J_mᵀ [0, 1]ᵀ F₁(t)`.
pub fn human_force_scenario2(
    params: &ManipulatorParams,
    t: f64,
    q_m: &JointVector,
) -> Result<JointVector> {
    params.cartesian_to_joint(q_m, [0.0, bounded_force_profile(t)])
}

/// Rectangular operator force `F₂`: `amplitude` on `[t_on, t_off)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectanglePulse {
    pub amplitude: f64,
    pub t_on: f64,
    pub t_off: f64,
}

impl Default for RectanglePulse {
    /// 25 N between 0.5 s and 8 s.
    fn default() -> Self {
        Self {
            amplitude: 25.0,
            t_on: 0.5,
            t_off: 8.0,
        }
    }
}

impl RectanglePulse {
    pub fn value(&self, t: f64) -> f64 {
        if (self.t_on..self.t_off).contains(&t) {
            self.amplitude
        } else {
            0.0
        }
    }
}

/// `F₂(t)` with the default pulse.
pub fn rectangle_force_scenario3(t: f64) -> f64 {
    RectanglePulse::default().value(t)
}

/// Horizontal penalty wall `y = height` acting on a slave end effector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    /// Wall position (m).
    pub height: f64,
    /// Penalty stiffness (N/m).
    pub stiffness: f64,
}

impl Default for Wall {
    fn default() -> Self {
        Self {
            height: 0.3,
            stiffness: 10_000.0,
        }
    }
}

impl Wall {
    /// Unilateral contact torque `−Jᵀ [0, 1]ᵀ k (y − height)` for `y > height`.
    pub fn contact_torque(&self, params: &ManipulatorParams, q: &JointVector) -> Result<JointVector> {
        let [_, y] = params.end_effector(q)?;
        let penetration = y - self.height;
        if penetration <= 0.0 {
            return Ok(JointVector::zeros(q.len()));
        }
        params.cartesian_to_joint(q, [0.0, -self.stiffness * penetration])
    }
}

/// Contact torque of the default wall at `y = 0.3 m`, `k = 10⁴ N/m`.
pub fn wall_contact_force(params: &ManipulatorParams, q_si: &JointVector) -> Result<JointVector> {
    Wall::default().contact_torque(params, q_si)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn jv(x: &[f64]) -> JointVector {
        JointVector::from_column_slice(x)
    }

    /// Configuration whose end effector sits at height `y` with the elbow straight.
    fn straight_arm_at(params: &ManipulatorParams, y: f64) -> JointVector {
        let reach = params.link_lengths[0] + params.link_lengths[1];
        jv(&[(y / reach).asin(), 0.0])
    }

    #[test]
    fn stretched_master_torque() {
        let p = ManipulatorParams::default();
        let f = human_force_scenario2(&p, 0.0, &jv(&[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(f[0], 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 7.5, epsilon = 1e-12);
    }

    #[test]
    fn bounded_profile_range() {
        for i in 0..10_000 {
            let f = bounded_force_profile(i as f64 * 0.01);
            assert!((15.0..=35.0).contains(&f));
        }
    }

    #[test]
    fn wall_is_unilateral() {
        let p = ManipulatorParams::default();
        for y in [0.25, 0.3] {
            let f = wall_contact_force(&p, &straight_arm_at(&p, y)).unwrap();
            assert_eq!(f, JointVector::zeros(2));
        }
    }

    #[test]
    fn wall_penalty_magnitude() {
        let p = ManipulatorParams::default();
        let q = straight_arm_at(&p, 0.301);
        let f = wall_contact_force(&p, &q).unwrap();
        // Jᵀ [0, −F] with F = 10⁴ · 0.001 = 10 N.
        let jac = p.jacobian(&q).unwrap();
        assert_abs_diff_eq!(f[0], -10.0 * jac[(1, 0)], epsilon = 1e-9);
        assert_abs_diff_eq!(f[1], -10.0 * jac[(1, 1)], epsilon = 1e-9);
    }

    #[test]
    fn rectangle_pulse() {
        assert_eq!(rectangle_force_scenario3(10.0), 0.0);
        assert_eq!(rectangle_force_scenario3(0.2), 0.0);
        assert_eq!(rectangle_force_scenario3(3.0), 25.0);
        assert_eq!(rectangle_force_scenario3(8.0), 0.0);
        // ∫F₂² = A² (t_off − t_on), finite.
        let dt = 1e-3;
        let energy: f64 = (0..20_000).map(|i| rectangle_force_scenario3(i as f64 * dt).powi(2) * dt).sum();
        assert_abs_diff_eq!(energy, 625.0 * 7.5, epsilon = 1.0);
    }
}
