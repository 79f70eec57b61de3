//! Independent oracles and property checks shared by the integration tests.
#![allow(dead_code)]

use nalgebra::SymmetricEigen;
use teleop_core::simulator::Scenario;
use teleop_core::{
    run_simulation, JointVector, ManipulatorParams, ManipulatorState, ProtocolKind, SimConfig,
};

pub fn jv(x: &[f64]) -> JointVector {
    JointVector::from_column_slice(x)
}

/// Round-Robin closed form, written out from the 2×2 pencil argument:
/// feasible iff `max kp · (h_M + h_S) < 2 min kd`.
pub fn rr_oracle(kp: &[f64], kd: &[f64], slaves: usize, mati: f64, mad: f64) -> bool {
    let h_m = mati + mad;
    let h_s = slaves as f64 * mati + mad;
    let kp_max = kp.iter().cloned().fold(f64::MIN, f64::max);
    let kd_min = kd.iter().cloned().fold(f64::MAX, f64::min);
    kp_max * (h_m + h_s) < 2.0 * kd_min
}

/// Round-Robin boundary MATI from the same inequality.
pub fn rr_oracle_boundary(kp_max: f64, kd_min: f64, slaves: usize, mad: f64) -> f64 {
    (2.0 * kd_min / kp_max - 2.0 * mad) / (slaves as f64 + 1.0)
}

/// Try-Once-Discard delay bound for uniform scalar gains,
/// `h* = 2kd / (kp (2 + sqrt(cγ)))` with `c = N − 1`, `s = sqrt(c/N)` and
/// `γ = c(1 + s) + c²(1 + s)²/s`; the boundary MATI is `h* − MAD`.
pub fn tod_oracle_horizon(kp: f64, kd: f64, slaves: usize) -> f64 {
    let c = slaves as f64 - 1.0;
    let s = (c / slaves as f64).sqrt();
    let gamma = c * (1.0 + s) + c * c * (1.0 + s) * (1.0 + s) / s;
    2.0 * kd / (kp * (2.0 + (c * gamma).sqrt()))
}

fn sym_eigen(m: &teleop_core::Matrix) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
}

/// P1: `M(q)` symmetric with `λ_min ≥ det/tr ≥ l1²l2²m1m2 / tr`.
///
/// `det M = l1²l2²m2(m1 + m2 sin²q2)`, so the bound is uniform in `q`.
pub fn check_p1(p: &ManipulatorParams, q: &[f64]) -> Result<(), String> {
    let m = p.mass_matrix(&jv(q)).map_err(|e| e.to_string())?;
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 {
        return Err(format!("asymmetric M at {q:?}"));
    }
    let [m1, m2] = p.link_masses;
    let [l1, l2] = p.link_lengths;
    let floor = l1 * l1 * l2 * l2 * m1 * m2 / m.trace();
    let lam = sym_eigen(&m).into_iter().fold(f64::MAX, f64::min);
    if lam < floor * (1.0 - 1e-12) {
        return Err(format!("λ_min {lam} below {floor} at {q:?}"));
    }
    Ok(())
}

/// P2: `xᵀ(Ṁ − 2C)x = 0` with `Ṁ` from central differences along `q̇`.
pub fn check_p2(p: &ManipulatorParams, q: &[f64], dq: &[f64], x: &[f64]) -> Result<(), String> {
    let h = 1e-6;
    let (q, dq, x) = (jv(q), jv(dq), jv(x));
    let plus = p.mass_matrix(&(&q + &dq * h)).map_err(|e| e.to_string())?;
    let minus = p.mass_matrix(&(&q - &dq * h)).map_err(|e| e.to_string())?;
    let m_dot = (plus - minus) / (2.0 * h);
    let c = p.coriolis_matrix(&q, &dq).map_err(|e| e.to_string())?;
    let v = x.dot(&((m_dot - c * 2.0) * &x));
    if v.abs() > 1e-6 {
        return Err(format!("xᵀ(Ṁ − 2C)x = {v} at q {:?}", q.as_slice()));
    }
    Ok(())
}

/// P3: `|C(q, x) y| ≤ 2 l1 l2 m2 |x| |y|`.
pub fn check_p3(p: &ManipulatorParams, q: &[f64], x: &[f64], y: &[f64]) -> Result<(), String> {
    let (x, y) = (jv(x), jv(y));
    let c = p.coriolis_matrix(&jv(q), &x).map_err(|e| e.to_string())?;
    let lhs = (c * &y).norm();
    let [_, m2] = p.link_masses;
    let [l1, l2] = p.link_lengths;
    let rhs = 2.0 * l1 * l2 * m2 * x.norm() * y.norm();
    if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
        return Err(format!("|C(q,x)y| = {lhs} exceeds {rhs}"));
    }
    Ok(())
}

/// Jacobian against central differences of the forward kinematics.
pub fn check_jacobian(p: &ManipulatorParams, q: &[f64]) -> Result<(), String> {
    let h = 1e-6;
    let jac = p.jacobian(&jv(q)).map_err(|e| e.to_string())?;
    for col in 0..2 {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[col] += h;
        qm[col] -= h;
        let a = p.end_effector(&jv(&qp)).map_err(|e| e.to_string())?;
        let b = p.end_effector(&jv(&qm)).map_err(|e| e.to_string())?;
        for row in 0..2 {
            let fd = (a[row] - b[row]) / (2.0 * h);
            if (fd - jac[(row, col)]).abs() > 1e-6 {
                return Err(format!("J[{row},{col}] = {} vs {fd} at {q:?}", jac[(row, col)]));
            }
        }
    }
    Ok(())
}

/// Largest change of the final state when the RK4 step is halved, for a
/// free-motion run from random initial states over `duration`.
pub fn rk4_refinement_change(states: &[[f64; 4]], duration: f64) -> Result<f64, String> {
    let mut scenario = Scenario::free_motion(duration, states.len() - 1);
    scenario.initial_states = states
        .iter()
        .map(|s| ManipulatorState {
            q: jv(&s[..2]),
            dq: jv(&s[2..]),
        })
        .collect();
    let run = |step: f64| {
        let mut config = SimConfig::reference(ProtocolKind::RoundRobin);
        config.step = step;
        config.trace_stride = usize::MAX;
        run_simulation(&config, &scenario).map_err(|e| e.to_string())
    };
    let coarse = run(1e-3)?;
    let fine = run(5e-4)?;
    let (a, b) = (coarse.last().unwrap(), fine.last().unwrap());
    if (a.t - b.t).abs() > 1e-12 {
        return Err(format!("final times differ: {} vs {}", a.t, b.t));
    }
    let mut worst = 0.0_f64;
    for (x, y) in std::iter::once((&a.master, &b.master)).chain(a.slaves.iter().zip(&b.slaves)) {
        worst = worst.max((&x.q - &y.q).amax()).max((&x.dq - &y.dq).amax());
    }
    Ok(worst)
}
