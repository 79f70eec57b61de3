use super::SimTrace;
use crate::controller::FormationGeometry;
use crate::error::{Error, Result};

/// Averages over the tail of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateMetrics {
    /// Mean `|q_m − q̌ᵢ|` per slave (rad).
    pub mean_position_error: Vec<f64>,
    /// Largest `|q_m − q̌ᵢ|` over slaves and tail rows (rad).
    pub max_position_error: f64,
    /// Mean `|f_m + f̄_s|`, with `f̄_s = (1/N) Σ f_si` (N·m).
    pub mean_force_mismatch: f64,
    /// Per joint: mean `|f_m + f̄_s|` and mean `|f_m|`.
    pub force_mismatch_per_joint: Vec<f64>,
    pub force_magnitude_per_joint: Vec<f64>,
    /// Largest joint speed of any arm (rad/s).
    pub max_velocity: f64,
    pub samples: usize,
}

impl SteadyStateMetrics {
    /// `|f_m + f̄_s| / (|f_m| + eps)` per joint.
    pub fn force_reflection_ratio(&self, eps: f64) -> Vec<f64> {
        self.force_mismatch_per_joint
            .iter()
            .zip(&self.force_magnitude_per_joint)
            .map(|(d, m)| d / (m + eps))
            .collect()
    }
}

/// Metrics over the final `tail_fraction` of the rows (at least one row).
pub fn steady_state_metrics(
    trace: &SimTrace,
    formation: &FormationGeometry,
    tail_fraction: f64,
) -> Result<SteadyStateMetrics> {
    if trace.rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let count = ((trace.rows.len() as f64 * tail_fraction).ceil() as usize).max(1);
    let tail = &trace.rows[trace.rows.len() - count..];
    let n = trace.slaves;
    let joints = trace.joints;

    let mut mean_err = vec![0.0; n];
    let mut max_err = 0.0_f64;
    let mut mismatch = 0.0;
    let mut per_joint = vec![0.0; joints];
    let mut magnitude = vec![0.0; joints];
    let mut max_vel = 0.0_f64;
    for row in tail {
        let mut mean_fs = row.f_m.clone() * 0.0;
        for (i, s) in row.slaves.iter().enumerate() {
            let e = (&row.master.q - formation.corrected(i, &s.q)?).norm();
            mean_err[i] += e;
            max_err = max_err.max(e);
            max_vel = max_vel.max(s.dq.amax());
            mean_fs += &row.f_s[i];
        }
        max_vel = max_vel.max(row.master.dq.amax());
        let residual = &row.f_m + mean_fs / n as f64;
        mismatch += residual.norm();
        for a in 0..joints {
            per_joint[a] += residual[a].abs();
            magnitude[a] += row.f_m[a].abs();
        }
    }
    let c = count as f64;
    Ok(SteadyStateMetrics {
        mean_position_error: mean_err.into_iter().map(|e| e / c).collect(),
        max_position_error: max_err,
        mean_force_mismatch: mismatch / c,
        force_mismatch_per_joint: per_joint.into_iter().map(|v| v / c).collect(),
        force_magnitude_per_joint: magnitude.into_iter().map(|v| v / c).collect(),
        max_velocity: max_vel,
        samples: count,
    })
}
