//! Block matrices of the Round-Robin and Try-Once-Discard certificates.
//!
//! Coordinates of `Π_i` are `(q̇ₘ, q̇ᵢ, ∫q̇ₘ, ∫q̇ᵢ)`, each `n` wide; `Σ_i`
//! appends the scheduling errors `η_j` of every other slave `j ≠ i`.

use super::{LmiVariablesRR, LmiVariablesTOD};
use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::Matrix;

fn set_block(target: &mut Matrix, row: usize, col: usize, block: &Matrix) {
    target
        .view_mut((row * block.nrows(), col * block.ncols()), block.shape())
        .copy_from(block);
}

fn check_horizon(h: f64, name: &str) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {h}")));
    }
    Ok(())
}

fn check_slave(i: usize, gains: &GainSet) -> Result<()> {
    if i >= gains.slaves() {
        return Err(Error::IndexOutOfRange {
            index: i,
            count: gains.slaves(),
        });
    }
    Ok(())
}

fn pi_block(kp: &Matrix, kd: &Matrix, h_m: f64, h_s: f64, r_m: &Matrix, r_s: &Matrix) -> Matrix {
    let n = kp.nrows();
    let mut pi = Matrix::zeros(4 * n, 4 * n);
    set_block(&mut pi, 0, 0, &(kd * -2.0 + r_m * h_m));
    set_block(&mut pi, 1, 1, &(kd * -2.0 + r_s * h_s));
    set_block(&mut pi, 2, 2, &(r_m * (-1.0 / h_m)));
    set_block(&mut pi, 3, 3, &(r_s * (-1.0 / h_s)));
    let neg_kp = -kp;
    set_block(&mut pi, 0, 3, &neg_kp);
    set_block(&mut pi, 3, 0, &neg_kp.transpose());
    set_block(&mut pi, 1, 2, &neg_kp);
    set_block(&mut pi, 2, 1, &neg_kp.transpose());
    pi
}

/// Round-Robin block `Π_i` (4n × 4n).
pub fn assemble_pi(
    i: usize,
    gains: &GainSet,
    h_m: f64,
    h_s: f64,
    vars: &LmiVariablesRR,
) -> Result<Matrix> {
    check_slave(i, gains)?;
    check_horizon(h_m, "h_M")?;
    check_horizon(h_s, "h_S")?;
    let r_s = vars.r_s.get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        count: vars.r_s.len(),
    })?;
    Ok(pi_block(&gains.kp[i], &gains.kd[i], h_m, h_s, &vars.r_m, r_s))
}

/// Reset-condition block `Ω_i` (2n × 2n).
pub fn assemble_omega(i: usize, slaves: usize, vars: &LmiVariablesTOD) -> Result<Matrix> {
    if slaves < 2 {
        return Err(Error::InvalidParameter(format!(
            "at least two slaves required, got {slaves}"
        )));
    }
    if i >= vars.q.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            count: vars.q.len(),
        });
    }
    let (q, u, g) = (&vars.q[i], &vars.u[i], &vars.g[i]);
    let mut omega = Matrix::zeros(2 * q.nrows(), 2 * q.nrows());
    set_block(&mut omega, 0, 0, &(q * (-1.0 / (slaves - 1) as f64) + u));
    set_block(&mut omega, 0, 1, q);
    set_block(&mut omega, 1, 0, &q.transpose());
    set_block(&mut omega, 1, 1, &(q - g));
    Ok(omega)
}

/// Try-Once-Discard block `Σ_i` ((N+3)n × (N+3)n), with `h_S` replaced by `h_M`.
pub fn assemble_sigma(
    i: usize,
    gains: &GainSet,
    h_m: f64,
    vars: &LmiVariablesTOD,
) -> Result<Matrix> {
    let slaves = gains.slaves();
    if slaves < 2 {
        return Err(Error::InvalidParameter(format!(
            "at least two slaves required, got {slaves}"
        )));
    }
    check_slave(i, gains)?;
    check_horizon(h_m, "h_M")?;
    let n = gains.joints();
    let mut pi_bar = pi_block(&gains.kp[i], &gains.kd[i], h_m, h_m, &vars.r_m, &vars.r_s[i]);
    let extra = &vars.g[i] * h_m;
    let mut qs_block = pi_bar.view_mut((n, n), (n, n));
    qs_block += &extra;

    let mut sigma = Matrix::zeros((slaves + 3) * n, (slaves + 3) * n);
    sigma.view_mut((0, 0), (4 * n, 4 * n)).copy_from(&pi_bar);
    for (slot, j) in (0..slaves).filter(|&j| j != i).enumerate() {
        let row = 4 + slot;
        // L_i couples η_j to the q̇ₘ coordinate through K_jᵖ.
        set_block(&mut sigma, row, 0, &gains.kp[j].transpose());
        set_block(&mut sigma, 0, row, &gains.kp[j]);
        set_block(&mut sigma, row, row, &(&vars.u[j] * (-1.0 / h_m)));
    }
    Ok(sigma)
}
