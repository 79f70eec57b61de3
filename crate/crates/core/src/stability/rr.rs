//! Round-Robin certificate.
//!
//! With `R_m = r_m·I`, `R_si = r_si·I` and scalar gains, `Π_i` splits into the
//! 2×2 pencils on `(q̇ₘ, ∫q̇ᵢ)` and `(q̇ᵢ, ∫q̇ₘ)`. Writing `a = h_M r_m` and
//! `bᵢ = h_S r_si`, negativity of both is
//!
//! ```text
//! (2kdᵢ − a)·bᵢ > kpᵢ² h_S²   and   (2kdᵢ − bᵢ)·a > kpᵢ² h_M²
//! ```
//!
//! For a fixed `a` a suitable `bᵢ` exists iff
//! `fᵢ(a) = 2kdᵢ − kpᵢ²h_M²/a − kpᵢ²h_S²/(2kdᵢ − a) > 0`. Each `fᵢ` is concave,
//! so the shared `a` is found by maximising `minᵢ fᵢ` with a golden-section
//! search.

use super::{
    definite::{feasibility_eps, max_eigenvalue},
    scaled_eye, FeasibilityResult, LmiVariablesRR, SolveStatus, StabilityQuery,
};
use crate::error::{Error, Result};
use crate::network::{delay_horizons, ProtocolKind};
use crate::stability::assemble_pi;

const GOLDEN_ITERATIONS: usize = 200;

fn slack(kp: f64, kd: f64, h_m: f64, h_s: f64, a: f64) -> f64 {
    let room = 2.0 * kd - a;
    if a <= 0.0 || room <= 0.0 {
        return f64::NEG_INFINITY;
    }
    2.0 * kd - kp * kp * h_m * h_m / a - kp * kp * h_s * h_s / room
}

fn worst_slack(kp: &[f64], kd: &[f64], h_m: f64, h_s: f64, a: f64) -> f64 {
    kp.iter()
        .zip(kd)
        .map(|(&p, &d)| slack(p, d, h_m, h_s, a))
        .fold(f64::INFINITY, f64::min)
}

/// Golden-section maximiser of a unimodal function on `(lo, hi)`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form Round-Robin condition `maxᵢ kpᵢ (h_M + h_S) < 2 minᵢ kdᵢ`.
///
/// Exact when all `kdᵢ` are equal; sufficient otherwise.
pub fn rr_closed_form_feasible(kp: &[f64], kd: &[f64], h_m: f64, h_s: f64) -> bool {
    let kp_max = kp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kd_min = kd.iter().copied().fold(f64::INFINITY, f64::min);
    kp_max * (h_m + h_s) < 2.0 * kd_min
}

/// Supremum MATI of the closed-form condition, `None` if no positive MATI satisfies it.
pub fn rr_analytic_max_mati(query: &StabilityQuery) -> Result<Option<f64>> {
    let (kp, kd) = query.scalar_gains()?;
    let kp_max = kp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kd_min = kd.iter().copied().fold(f64::INFINITY, f64::min);
    // h_M + h_S = (N + 1)·MATI + 2·MAD
    let mati = (2.0 * kd_min / kp_max - 2.0 * query.mad) / (query.slaves() as f64 + 1.0);
    Ok((mati > 0.0).then_some(mati))
}

/// Searches `R_m = r_m I`, `R_si = r_si I` with `Π_i < 0` for every slave.
pub fn feasible_rr(query: &StabilityQuery, mati: f64) -> Result<FeasibilityResult<LmiVariablesRR>> {
    if !(mati > 0.0 && mati.is_finite()) {
        return Err(Error::InvalidParameter(format!("MATI must be positive, got {mati}")));
    }
    let (kp, kd) = query.scalar_gains()?;
    let h = delay_horizons(query.slaves(), mati, query.mad, ProtocolKind::RoundRobin);
    let (h_m, h_s) = (h.h_m, h.h_s);

    let a_upper = 2.0 * kd.iter().copied().fold(f64::INFINITY, f64::min);
    let a = golden_max(|a| worst_slack(&kp, &kd, h_m, h_s, a), 0.0, a_upper);
    let solvable = worst_slack(&kp, &kd, h_m, h_s, a) > 0.0;

    let b: Vec<f64> = kp
        .iter()
        .zip(&kd)
        .map(|(&p, &d)| {
            let lower = p * p * h_s * h_s / (2.0 * d - a);
            let upper = 2.0 * d - p * p * h_m * h_m / a;
            if solvable {
                0.5 * (lower + upper)
            } else {
                d
            }
        })
        .collect();

    let n = query.joints();
    let vars = LmiVariablesRR {
        r_m: scaled_eye(n, a / h_m),
        r_s: b.iter().map(|&bi| scaled_eye(n, bi / h_s)).collect(),
    };

    let mut worst = f64::NEG_INFINITY;
    let mut verified = solvable;
    for i in 0..query.slaves() {
        let pi = assemble_pi(i, &query.gains, h_m, h_s, &vars)?;
        let lam = max_eigenvalue(&pi)?;
        worst = worst.max(lam);
        verified &= lam < -feasibility_eps(&pi);
    }

    if verified {
        Ok(FeasibilityResult {
            feasible: true,
            status: SolveStatus::Feasible,
            witness: Some(vars),
            max_block_eigenvalue: worst,
            iterations: 1,
        })
    } else {
        Ok(FeasibilityResult::infeasible(SolveStatus::Infeasible, worst, 1))
    }
}
