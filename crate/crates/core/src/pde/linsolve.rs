//! Matrix-free Krylov solvers for the discretized operators: conjugate
//! gradients for the SPD Poisson operator, MINRES for the symmetric but
//! possibly indefinite Newton Jacobian.

use crate::error::{NumericalError, Result};
use crate::util::{par_axpy, par_dot};

pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients on a symmetric positive definite operator.
/// `apply(x, out)` writes `A x` into `out`. Iterates until
/// `‖r‖₂ ≤ rtol·‖b‖₂` or `max_iter`.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let bnorm = par_dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(KrylovStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut p = r.clone();
    let mut rs = par_dot(&r, &r);
    for it in 0..max_iter {
        if rs.sqrt() <= rtol * bnorm {
            return Ok(KrylovStats {
                iterations: it,
                relative_residual: rs.sqrt() / bnorm,
            });
        }
        apply(&p, &mut ap);
        let pap = par_dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(NumericalError::LinearSolveBreakdown(format!(
                "cg curvature p·Ap = {pap:.3e} at iteration {it}"
            ))
            .into());
        }
        let alpha = rs / pap;
        par_axpy(alpha, &p, x);
        par_axpy(-alpha, &ap, &mut r);
        let rs_new = par_dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(NumericalError::LinearSolveBreakdown(format!(
        "cg stalled at relative residual {:.3e} after {max_iter} iterations",
        rs.sqrt() / bnorm
    ))
    .into())
}

/// MINRES on a symmetric (possibly indefinite) operator, Paige-Saunders
/// Lanczos/Givens formulation. Overwrites `x` with the iterate whose residual
/// estimate first satisfies `‖b - A x‖₂ ≤ rtol·‖b‖₂`; hitting the iteration
/// cap returns the stats (caller decides usability), a zero Lanczos
/// breakdown is an error.
pub fn minres(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    x.fill(0.0);
    let beta1 = par_dot(b, b).sqrt();
    if beta1 == 0.0 {
        return Ok(KrylovStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut v = vec![0.0; n];
    let mut y = b.to_vec();
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    let mut oldb = 0.0f64;
    let mut beta = beta1;
    let mut dbar = 0.0f64;
    let mut epsln = 0.0f64;
    let mut phibar = beta1;
    let mut cs = -1.0f64;
    let mut sn = 0.0f64;

    for itn in 1..=max_iter {
        // next Lanczos vector: v = y/beta, y = A v - (beta/oldb) r1, then
        // orthogonalize against r2
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut y);
        if itn >= 2 {
            par_axpy(-(beta / oldb), &r1, &mut y);
        }
        let alfa = par_dot(&v, &y);
        par_axpy(-(alfa / beta), &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = par_dot(&y, &y).sqrt();
        if !beta.is_finite() {
            return Err(NumericalError::LinearSolveBreakdown(
                "minres produced a non-finite Lanczos norm".into(),
            )
            .into());
        }

        // previous rotation applied to the new tridiagonal column
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;

        // current rotation annihilating the subdiagonal
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // solution update through the direction recurrence
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        let denom = 1.0 / gamma;
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        par_axpy(phi, &w, x);

        if phibar.abs() <= rtol * beta1 {
            return Ok(KrylovStats {
                iterations: itn,
                relative_residual: phibar.abs() / beta1,
            });
        }
        if beta <= f64::MIN_POSITIVE {
            // Krylov space exhausted: the current iterate solves the system
            return Ok(KrylovStats {
                iterations: itn,
                relative_residual: phibar.abs() / beta1,
            });
        }
    }
    Ok(KrylovStats {
        iterations: max_iter,
        relative_residual: phibar.abs() / beta1,
    })
}
