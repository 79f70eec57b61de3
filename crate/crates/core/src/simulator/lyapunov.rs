//! Online evaluation of the Lyapunov-Krasovskii functionals.
//!
//! The delay terms are double integrals of quadratic velocity forms
//! `w(δ) = q̇(δ)ᵀ R q̇(δ)`:
//!
//! ```text
//! ∫_{−h}^0 ∫_{t+θ}^t w(δ) dδ dθ = ∫_{t−h}^t (h − t + δ) w(δ) dδ
//! ```
//!
//! Keeping running trapezoid sums of `w` and `δ·w` makes each evaluation a
//! pair of interpolated lookups. Runs start at rest, so the initial function
//! is constant and `w = 0` before `t = 0`.

use crate::controller::{FormationGeometry, GainSet};
use crate::error::{check_len, Error, Result};
use crate::manipulator::{JointVector, ManipulatorParams, ManipulatorState};
use crate::stability::{LmiVariablesRR, LmiVariablesTOD};
use crate::Matrix;

/// Running integrals `C₀(t) = ∫₀ᵗ w` and `C₁(t) = ∫₀ᵗ δ w(δ) dδ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureHistory {
    times: Vec<f64>,
    weights: Vec<f64>,
    c0: Vec<f64>,
    c1: Vec<f64>,
}

impl QuadratureHistory {
    pub fn new(t0: f64, w0: f64) -> Self {
        Self {
            times: vec![t0],
            weights: vec![w0],
            c0: vec![0.0],
            c1: vec![0.0],
        }
    }

    /// Appends a sample; `t` must exceed the previous sample time.
    pub fn push(&mut self, t: f64, w: f64) {
        let (&t0, &w0) = (self.times.last().unwrap(), self.weights.last().unwrap());
        let dt = t - t0;
        debug_assert!(dt > 0.0);
        self.c0.push(self.c0.last().unwrap() + 0.5 * dt * (w0 + w));
        self.c1.push(self.c1.last().unwrap() + 0.5 * dt * (t0 * w0 + t * w));
        self.times.push(t);
        self.weights.push(w);
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn cumulative(&self, t: f64) -> Result<(f64, f64)> {
        let start = self.times[0];
        if t <= start {
            return Ok((0.0, 0.0));
        }
        let end = self.last_time();
        if t > end + 1e-12 {
            return Err(Error::InsufficientHistory {
                needed: t - start,
                available: end - start,
                time: t,
            });
        }
        let j = self.times.partition_point(|&s| s < t);
        if j >= self.times.len() || self.times[j] == t {
            let j = j.min(self.times.len() - 1);
            return Ok((self.c0[j], self.c1[j]));
        }
        let (ta, tb) = (self.times[j - 1], self.times[j]);
        let s = (t - ta) / (tb - ta);
        Ok((
            self.c0[j - 1] + s * (self.c0[j] - self.c0[j - 1]),
            self.c1[j - 1] + s * (self.c1[j] - self.c1[j - 1]),
        ))
    }

    /// `∫_a^b w`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.cumulative(b)?.0 - self.cumulative(a)?.0)
    }

    /// `∫_{t−h}^t (h − t + δ) w(δ) dδ`.
    pub fn double_integral(&self, t: f64, h: f64) -> Result<f64> {
        let (a0, a1) = self.cumulative(t - h)?;
        let (b0, b1) = self.cumulative(t)?;
        Ok((h - t) * (b0 - a0) + (b1 - a1))
    }
}

fn quadratic(weight: &Matrix, v: &JointVector) -> f64 {
    v.dot(&(weight * v))
}

/// Velocity histories weighted by the certificate matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityHistory {
    r_m: Matrix,
    r_s: Vec<Matrix>,
    g: Vec<Matrix>,
    master: QuadratureHistory,
    slaves: Vec<QuadratureHistory>,
    slaves_g: Vec<QuadratureHistory>,
}

impl VelocityHistory {
    /// `g` may be empty (Round-Robin); otherwise one `G_i` per slave.
    pub fn new(
        r_m: Matrix,
        r_s: Vec<Matrix>,
        g: Vec<Matrix>,
        t0: f64,
        master: &ManipulatorState,
        slaves: &[ManipulatorState],
    ) -> Result<Self> {
        check_len(r_s.len(), slaves.len(), "R_s vs slaves")?;
        if !g.is_empty() {
            check_len(g.len(), slaves.len(), "G vs slaves")?;
        }
        let hist = |w: &Matrix, s: &ManipulatorState| QuadratureHistory::new(t0, quadratic(w, &s.dq));
        Ok(Self {
            master: hist(&r_m, master),
            slaves: r_s.iter().zip(slaves).map(|(r, s)| hist(r, s)).collect(),
            slaves_g: g.iter().zip(slaves).map(|(w, s)| hist(w, s)).collect(),
            r_m,
            r_s,
            g,
        })
    }

    pub fn for_rr(vars: &LmiVariablesRR, master: &ManipulatorState, slaves: &[ManipulatorState]) -> Result<Self> {
        Self::new(vars.r_m.clone(), vars.r_s.clone(), Vec::new(), 0.0, master, slaves)
    }

    pub fn for_tod(vars: &LmiVariablesTOD, master: &ManipulatorState, slaves: &[ManipulatorState]) -> Result<Self> {
        Self::new(vars.r_m.clone(), vars.r_s.clone(), vars.g.clone(), 0.0, master, slaves)
    }

    pub fn record(&mut self, t: f64, master: &ManipulatorState, slaves: &[ManipulatorState]) {
        self.master.push(t, quadratic(&self.r_m, &master.dq));
        for (i, s) in slaves.iter().enumerate() {
            self.slaves[i].push(t, quadratic(&self.r_s[i], &s.dq));
            if let Some(h) = self.slaves_g.get_mut(i) {
                h.push(t, quadratic(&self.g[i], &s.dq));
            }
        }
    }
}

/// Arm parameters, gains and formation shared by the functionals.
#[derive(Debug, Clone, Copy)]
pub struct FunctionalContext<'a> {
    /// Master first, then one entry per slave.
    pub params: &'a [ManipulatorParams],
    pub gains: &'a GainSet,
    pub formation: &'a FormationGeometry,
}

/// `V = V₁ + V₂ + V₃` at time `t` with delay horizons `h_M`, `h_S`.
pub fn lyapunov_v_rr(
    ctx: FunctionalContext<'_>,
    history: &VelocityHistory,
    h_m: f64,
    h_s: f64,
    t: f64,
    master: &ManipulatorState,
    slaves: &[ManipulatorState],
) -> Result<f64> {
    let n_slaves = slaves.len();
    check_len(ctx.params.len(), n_slaves + 1, "arm parameters")?;
    check_len(history.slaves.len(), n_slaves, "velocity histories")?;
    let kinetic_m = quadratic(&ctx.params[0].mass_matrix(&master.q)?, &master.dq);
    let mut v1 = n_slaves as f64 * kinetic_m;
    let mut v2 = 0.0;
    let mut v3 = n_slaves as f64 * history.master.double_integral(t, h_m)?;
    for (i, s) in slaves.iter().enumerate() {
        v1 += quadratic(&ctx.params[i + 1].mass_matrix(&s.q)?, &s.dq);
        let e = &master.q - ctx.formation.corrected(i, &s.q)?;
        v2 += quadratic(&ctx.gains.kp[i], &e);
        v3 += history.slaves[i].double_integral(t, h_s)?;
    }
    Ok(v1 + v2 + v3)
}

/// The inter-arrival interval `[t_k, t_{k+1})` a Try-Once-Discard value refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetInterval {
    /// `s_k`.
    pub sample_time: f64,
    /// `t_k`.
    pub arrival_time: f64,
    /// `t_{k+1}`.
    pub next_arrival_time: f64,
    /// `i_k*`.
    pub scheduled: usize,
    /// `η(t_k)`, constant on the interval.
    pub eta: Vec<JointVector>,
}

/// `V_e = V + V_G + Σ ηᵢᵀQᵢηᵢ + W_e`, with both horizons of `V` equal to `h_M`.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_ve_tod(
    ctx: FunctionalContext<'_>,
    vars: &LmiVariablesTOD,
    history: &VelocityHistory,
    h_m: f64,
    interval: &ResetInterval,
    t: f64,
    master: &ManipulatorState,
    slaves: &[ManipulatorState],
) -> Result<f64> {
    check_len(interval.eta.len(), slaves.len(), "scheduling errors")?;
    check_len(history.slaves_g.len(), slaves.len(), "G-weighted histories")?;
    let v = lyapunov_v_rr(ctx, history, h_m, h_m, t, master, slaves)?;
    let span = interval.next_arrival_time - interval.arrival_time;
    if span <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "empty inter-arrival interval at t = {}",
            interval.arrival_time
        )));
    }
    let ramp = (interval.arrival_time - t) / span;
    let mut v_g = 0.0;
    let mut eta_q = 0.0;
    let mut w_e = 0.0;
    for (i, eta) in interval.eta.iter().enumerate() {
        v_g += h_m * history.slaves_g[i].integral(interval.sample_time, t)?;
        eta_q += quadratic(&vars.q[i], eta);
        if i != interval.scheduled {
            w_e += ramp * quadratic(&vars.u[i], eta);
        }
    }
    Ok(v + v_g + eta_q + w_e)
}
