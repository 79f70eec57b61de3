//! Try-Once-Discard certificate.
//!
//! The scalar variables `x = (r_m, r_s, q, u, g)` enter every block affinely,
//! `F_b(x) = C_b + Σ x_k A_bk`. Strict feasibility is decided by minimising
//! `t` subject to `F_b(x) ≺ tI` (the positivity of each variable is one more
//! 1×1 block `−x_k`). The epigraph problem is solved with a log-det barrier
//! and damped Newton steps; the barrier parameter `τ` gives the usual bound
//! `t* ≥ t(τ) − m/τ` on the optimum, where `m` is the total block dimension.
//!
//! * an iterate with `t < 0` whose full-size blocks pass the eigenvalue check
//!   is a feasibility certificate;
//! * `t(τ) − m/τ ≥ −ε` certifies that no point clears the margin `ε`.

use nalgebra::Cholesky;

use super::{
    assemble_omega, assemble_sigma,
    definite::{feasibility_eps, max_eigenvalue},
    scaled_eye, FeasibilityResult, LmiVariablesTOD, SolveStatus, StabilityQuery,
};
use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::network::{delay_horizons, ProtocolKind};
use crate::Matrix;

/// Newton-step budget of one feasibility problem.
pub const TOD_EVALUATION_CAP: usize = 10_000;

const BARRIER_GROWTH: f64 = 10.0;
const CENTERING_TOL: f64 = 1e-10;
const ARMIJO: f64 = 0.25;

struct AffineBlock {
    constant: Matrix,
    coeffs: Vec<Matrix>,
}

impl AffineBlock {
    fn eval(&self, x: &[f64]) -> Matrix {
        let mut f = self.constant.clone();
        for (a, &xk) in self.coeffs.iter().zip(x) {
            if xk != 0.0 {
                f += a * xk;
            }
        }
        f
    }

    fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

fn unpack(x: &[f64], slaves: usize, n: usize) -> LmiVariablesTOD {
    let part = |offset: usize| -> Vec<Matrix> {
        (0..slaves).map(|i| scaled_eye(n, x[offset + i])).collect()
    };
    LmiVariablesTOD {
        r_m: scaled_eye(n, x[0]),
        r_s: part(1),
        q: part(1 + slaves),
        u: part(1 + 2 * slaves),
        g: part(1 + 3 * slaves),
    }
}

/// The LMI blocks `Ω_i`, `Σ_i` for every slave, at the given gains.
fn lmi_blocks(gains: &GainSet, h_m: f64, vars: &LmiVariablesTOD) -> Result<Vec<Matrix>> {
    let slaves = gains.slaves();
    let mut out = Vec::with_capacity(2 * slaves);
    for i in 0..slaves {
        out.push(assemble_omega(i, slaves, vars)?);
        out.push(assemble_sigma(i, gains, h_m, vars)?);
    }
    Ok(out)
}

struct Problem {
    blocks: Vec<AffineBlock>,
    vars: usize,
    total_dim: usize,
}

impl Problem {
    /// Reads the affine structure off the assembled one-joint blocks.
    fn build(kp: &[f64], kd: &[f64], h_m: f64) -> Result<Self> {
        let slaves = kp.len();
        let vars = 1 + 4 * slaves;
        let gains = GainSet::scaled_identity(kp, kd, 1)?;
        let base = lmi_blocks(&gains, h_m, &unpack(&vec![0.0; vars], slaves, 1))?;
        let mut coeffs: Vec<Vec<Matrix>> = vec![Vec::with_capacity(vars); base.len()];
        let mut unit = vec![0.0; vars];
        for k in 0..vars {
            unit[k] = 1.0;
            let hit = lmi_blocks(&gains, h_m, &unpack(&unit, slaves, 1))?;
            for (b, m) in hit.into_iter().enumerate() {
                coeffs[b].push(m - &base[b]);
            }
            unit[k] = 0.0;
        }
        let mut blocks: Vec<AffineBlock> = base
            .into_iter()
            .zip(coeffs)
            .map(|(constant, coeffs)| AffineBlock { constant, coeffs })
            .collect();
        for k in 0..vars {
            let mut coeffs = vec![Matrix::zeros(1, 1); vars];
            coeffs[k][(0, 0)] = -1.0;
            blocks.push(AffineBlock {
                constant: Matrix::zeros(1, 1),
                coeffs,
            });
        }
        let total_dim = blocks.iter().map(AffineBlock::dim).sum();
        Ok(Self {
            blocks,
            vars,
            total_dim,
        })
    }

    fn max_eigenvalue(&self, x: &[f64]) -> Result<f64> {
        self.blocks
            .iter()
            .map(|b| max_eigenvalue(&b.eval(x)))
            .try_fold(f64::NEG_INFINITY, |acc, l| Ok(acc.max(l?)))
    }

    /// Cholesky factors of `tI − F_b(x)`, `None` outside the barrier domain.
    fn slacks(&self, x: &[f64], t: f64) -> Option<Vec<Cholesky<f64, nalgebra::Dyn>>> {
        self.blocks
            .iter()
            .map(|b| {
                let s = Matrix::identity(b.dim(), b.dim()) * t - b.eval(x);
                s.cholesky()
            })
            .collect()
    }

    fn barrier(&self, tau: f64, x: &[f64], t: f64) -> Option<f64> {
        let factors = self.slacks(x, t)?;
        let logdet: f64 = factors
            .iter()
            .map(|c| c.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>())
            .sum();
        Some(tau * t - logdet)
    }

    /// Gradient and Hessian of the barrier objective in `z = (x, t)`.
    fn derivatives(&self, tau: f64, x: &[f64], t: f64) -> Option<(Vec<f64>, Matrix)> {
        let m = self.vars + 1;
        let mut grad = vec![0.0; m];
        grad[self.vars] = tau;
        let mut hess = Matrix::zeros(m, m);
        for (block, chol) in self.blocks.iter().zip(self.slacks(x, t)?) {
            let s_inv = chol.inverse();
            // dS/dx_k = −A_k, dS/dt = I.
            let w: Vec<Option<Matrix>> = block
                .coeffs
                .iter()
                .map(|a| (a.amax() > 0.0).then(|| -(&s_inv * a)))
                .chain(std::iter::once(Some(s_inv.clone())))
                .collect();
            for p in 0..m {
                let Some(wp) = &w[p] else { continue };
                grad[p] -= wp.trace();
                for q in p..m {
                    let Some(wq) = &w[q] else { continue };
                    let v = wp.dot(&wq.transpose());
                    hess[(p, q)] += v;
                    if p != q {
                        hess[(q, p)] += v;
                    }
                }
            }
        }
        Some((grad, hess))
    }
}

enum Outcome {
    Feasible,
    Infeasible,
    Undecided,
}

struct Solver<'a> {
    problem: Problem,
    query: &'a StabilityQuery,
    h_m: f64,
    margin: f64,
    iterations: usize,
}

impl Solver<'_> {
    /// Full-size eigenvalue check of a candidate.
    fn verify(&self, x: &[f64]) -> Result<bool> {
        if x.iter().any(|&v| v <= 0.0) {
            return Ok(false);
        }
        let vars = unpack(x, self.query.slaves(), self.query.joints());
        for block in lmi_blocks(&self.query.gains, self.h_m, &vars)? {
            if max_eigenvalue(&block)? >= -feasibility_eps(&block) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn run(&mut self) -> Result<(Outcome, Vec<f64>)> {
        let p = &self.problem;
        let mut x = vec![1.0; p.vars];
        let mut t = p.max_eigenvalue(&x)? + 1.0;
        let mut tau = 1.0;

        loop {
            // Centering.
            loop {
                if self.iterations >= TOD_EVALUATION_CAP {
                    return Ok((Outcome::Undecided, x));
                }
                self.iterations += 1;
                let p = &self.problem;
                let Some((grad, hess)) = p.derivatives(tau, &x, t) else {
                    return Err(Error::Divergence {
                        time: 0.0,
                        reason: "barrier iterate left its domain".into(),
                    });
                };
                let neg_grad = Matrix::from_column_slice(grad.len(), 1, &grad) * -1.0;
                let step = match hess.clone().cholesky() {
                    Some(c) => c.solve(&neg_grad),
                    None => {
                        let reg = hess + Matrix::identity(grad.len(), grad.len()) * 1e-12;
                        match reg.lu().solve(&neg_grad) {
                            Some(s) => s,
                            None => break,
                        }
                    }
                };
                let slope: f64 = grad.iter().zip(step.iter()).map(|(g, s)| g * s).sum();
                if -slope / 2.0 < CENTERING_TOL {
                    break;
                }
                let phi = p.barrier(tau, &x, t).unwrap_or(f64::INFINITY);
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha > 1e-12 {
                    let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                    let tn = t + alpha * step[p.vars];
                    if let Some(phin) = p.barrier(tau, &xn, tn) {
                        if phin <= phi + ARMIJO * alpha * slope {
                            x = xn;
                            t = tn;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
                if t < 0.0 && self.verify(&x)? {
                    return Ok((Outcome::Feasible, x));
                }
            }

            let gap = self.problem.total_dim as f64 / tau;
            if t < 0.0 && self.verify(&x)? {
                return Ok((Outcome::Feasible, x));
            }
            if t - gap >= -self.margin {
                return Ok((Outcome::Infeasible, x));
            }
            if gap < 1e-13 * (1.0 + t.abs()) {
                return Ok((Outcome::Undecided, x));
            }
            tau *= BARRIER_GROWTH;
        }
    }
}

/// Searches scaled-identity `R_m, R_si, Q_i, U_i, G_i ≻ 0` with `Ω_i ≺ 0`
/// and `Σ_i ≺ 0` for every slave.
pub fn feasible_tod(
    query: &StabilityQuery,
    mati: f64,
) -> Result<FeasibilityResult<LmiVariablesTOD>> {
    if !(mati > 0.0 && mati.is_finite()) {
        return Err(Error::InvalidParameter(format!("MATI must be positive, got {mati}")));
    }
    let (kp, kd) = query.scalar_gains()?;
    let h_m = delay_horizons(query.slaves(), mati, query.mad, ProtocolKind::TryOnceDiscard).h_m;
    let scale = kp.iter().chain(&kd).fold(0.0_f64, |m, v| m.max(2.0 * v.abs()));
    let mut solver = Solver {
        problem: Problem::build(&kp, &kd, h_m)?,
        query,
        h_m,
        margin: 1e-9 * (1.0 + scale),
        iterations: 0,
    };
    let (outcome, x) = solver.run()?;

    let n = query.joints();
    let vars = unpack(&x, query.slaves(), n);
    let worst = lmi_blocks(&query.gains, h_m, &vars)?
        .iter()
        .map(max_eigenvalue)
        .try_fold(f64::NEG_INFINITY, |acc, l| Ok::<_, Error>(acc.max(l?)))?;

    Ok(match outcome {
        Outcome::Feasible => FeasibilityResult {
            feasible: true,
            status: SolveStatus::Feasible,
            witness: Some(vars),
            max_block_eigenvalue: worst,
            iterations: solver.iterations,
        },
        Outcome::Infeasible => {
            FeasibilityResult::infeasible(SolveStatus::Infeasible, worst, solver.iterations)
        }
        Outcome::Undecided => {
            log::warn!(
                "TOD feasibility undecided at MATI {mati} after {} Newton steps; treating as infeasible",
                solver.iterations
            );
            FeasibilityResult::infeasible(SolveStatus::Undecided, worst, solver.iterations)
        }
    })
}
