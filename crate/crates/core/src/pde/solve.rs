//! Damped Newton iteration for the semilinear system `A v = μ[v-1]₊ᵖ` and
//! warm-started continuation in μ.

use crate::error::{DomainError, Result};
use crate::model::ProblemConfig;
use crate::pde::linsolve::minres;
use crate::pde::GridField;
use crate::radial::RadialProfile;
use crate::util::{par_axpy, par_dot, par_norm_inf};

/// Terminal state of a Newton run. A vanished field (max < 1, so the
/// nonlinearity is identically zero) is a legitimate solution branch but a
/// distinct outcome from the spike solutions the pipeline wants.
#[derive(Debug)]
pub enum SolveOutcome {
    Converged(GridField),
    TrivialBranch(GridField),
    Diverged { iterations: usize, residual: f64 },
}

impl SolveOutcome {
    pub fn field(&self) -> Option<&GridField> {
        match self {
            SolveOutcome::Converged(f) | SolveOutcome::TrivialBranch(f) => Some(f),
            SolveOutcome::Diverged { .. } => None,
        }
    }
}

fn nonlinearity(values: &[f64], mu: f64, p: f64, out: &mut [f64]) {
    use rayon::prelude::*;
    out.par_iter_mut().zip(values.par_iter()).for_each(|(o, &v)| {
        let e = v - 1.0;
        *o = if e > 0.0 { mu * e.powf(p) } else { 0.0 };
    });
}

fn nonlinearity_deriv(values: &[f64], mu: f64, p: f64, out: &mut [f64]) {
    use rayon::prelude::*;
    out.par_iter_mut().zip(values.par_iter()).for_each(|(o, &v)| {
        let e = v - 1.0;
        *o = if e > 0.0 { mu * p * e.powf(p - 1.0) } else { 0.0 };
    });
}

/// `‖A v - μ[v-1]₊ᵖ‖∞` over interior nodes.
pub fn residual_inf(field: &GridField, config: &ProblemConfig) -> f64 {
    let n = field.values.len();
    let mut av = vec![0.0; n];
    field.grid.apply(&field.values, &mut av);
    let mut g = vec![0.0; n];
    nonlinearity(&field.values, field.mu, config.p(), &mut g);
    let mut worst = 0.0f64;
    for gi in 0..n {
        if field.grid.interior()[gi] {
            worst = worst.max((av[gi] - g[gi]).abs());
        }
    }
    worst
}

/// Damped Newton with MINRES inner solves on the diagonally scaled Jacobian
/// `A - diag(μp[v-1]₊^{p-1})` (symmetric, indefinite once the spike forms).
/// Line search backtracks on the 2-norm of the residual; exhaustion is
/// reported as `Diverged` rather than an error.
pub fn solve_semilinear(
    field: &GridField,
    config: &ProblemConfig,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    if config.n() != 3 {
        return Err(DomainError::DimensionMismatch {
            expected: 3,
            got: config.n(),
        }
        .into());
    }
    if !(tol > 0.0) {
        return Err(DomainError::Invalid(format!("tolerance {tol} must be positive")).into());
    }
    let grid = &field.grid;
    let n = grid.len();
    let mu = field.mu;
    let p = config.p();

    let mut v = field.values.clone();
    let mut av = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut initial_rinf = None;

    for it in 0..max_iter {
        grid.apply(&v, &mut av);
        nonlinearity(&v, mu, p, &mut g);
        for gi in 0..n {
            resid[gi] = if grid.interior()[gi] {
                av[gi] - g[gi]
            } else {
                0.0
            };
        }
        let rinf = par_norm_inf(&resid);
        let r2 = par_dot(&resid, &resid);
        let first = *initial_rinf.get_or_insert(rinf.max(tol));
        if rinf <= tol {
            let out = GridField {
                grid: grid.clone(),
                values: v,
                mu,
            };
            out.validate()?;
            return Ok(if out.max_value() < 1.0 {
                SolveOutcome::TrivialBranch(out)
            } else {
                SolveOutcome::Converged(out)
            });
        }

        // scaled Jacobian B = S (A - D) S with S = (diag A + D)^{-1/2} > 0
        nonlinearity_deriv(&v, mu, p, &mut d);
        let adiag = grid.diagonal();
        for gi in 0..n {
            scale[gi] = if grid.interior()[gi] {
                1.0 / (adiag[gi] + d[gi]).sqrt()
            } else {
                0.0
            };
        }
        for gi in 0..n {
            rhs[gi] = -scale[gi] * resid[gi];
        }
        // inexact Newton: loose early, tight once the residual is small
        let progress = (rinf / first).min(1.0);
        let rtol = (progress * progress).clamp(1e-13, 1e-4);
        let apply = |x: &[f64], out: &mut [f64]| {
            let mut t = vec![0.0; x.len()];
            for gi in 0..x.len() {
                t[gi] = scale[gi] * x[gi];
            }
            grid.apply(&t, out);
            for gi in 0..x.len() {
                out[gi] = scale[gi] * (out[gi] - d[gi] * t[gi]);
            }
        };
        minres(apply, &rhs, &mut y, rtol, 6000)?;
        for gi in 0..n {
            step[gi] = scale[gi] * y[gi];
        }

        // Armijo backtracking on ‖F‖₂²
        let mut alpha = 1.0f64;
        let mut accepted = false;
        while alpha >= 1e-8 {
            trial.copy_from_slice(&v);
            par_axpy(alpha, &step, &mut trial);
            grid.apply(&trial, &mut av);
            nonlinearity(&trial, mu, p, &mut g);
            let mut t2 = 0.0;
            for gi in 0..n {
                if grid.interior()[gi] {
                    let r = av[gi] - g[gi];
                    t2 += r * r;
                }
            }
            if t2 <= r2 * (1.0 - 1e-4 * alpha) {
                std::mem::swap(&mut v, &mut trial);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok(SolveOutcome::Diverged {
                iterations: it,
                residual: rinf,
            });
        }
    }

    let rinf = {
        grid.apply(&v, &mut av);
        nonlinearity(&v, mu, p, &mut g);
        let mut worst = 0.0f64;
        for gi in 0..n {
            if grid.interior()[gi] {
                worst = worst.max((av[gi] - g[gi]).abs());
            }
        }
        worst
    };
    Ok(SolveOutcome::Diverged {
        iterations: max_iter,
        residual: rinf,
    })
}

#[derive(Debug)]
pub struct ContinuationFailure {
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Continuation output: the converged fields in sequence order, plus the
/// first failure (if any), after which no further steps are attempted.
#[derive(Debug)]
pub struct ContinuationRun {
    pub fields: Vec<GridField>,
    pub failure: Option<ContinuationFailure>,
}

/// Warm-started continuation along a strictly increasing μ sequence.
///
/// While the previous solution still resembles the rescaled profile (height
/// within 15% of `w₀(0)`), each step resamples it through the spike scaling:
/// inside the new core radius `ε'R₀` the profile `w₀(|x-c|/ε')` is sampled
/// fresh, outside it the previous far field is scaled by `(ε'/ε)^{N-2}` (the
/// two agree at the interface, where both equal 1). Once the lattice pins the
/// spike (roughly three cells per core radius) the discrete height detaches
/// from `w₀(0)` and resampling lands outside Newton's basin, so steps switch
/// to plain warm starts capped at 20% relative μ increments; failed attempts
/// retry with geometrically halved steps down to 2% before the entry is
/// reported as the first failure.
pub fn continue_in_mu(
    field: &GridField,
    config: &ProblemConfig,
    profile: &RadialProfile,
    mu_sequence: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ContinuationRun> {
    if mu_sequence.is_empty() {
        return Err(DomainError::Invalid("empty mu sequence".into()).into());
    }
    for w in mu_sequence.windows(2) {
        if w[1] <= w[0] {
            return Err(DomainError::NonIncreasingMu {
                prev: w[0],
                next: w[1],
            }
            .into());
        }
    }
    // Only the first entry must clear the seeding bound; later steps may walk
    // the spike below 3h, where the warm start still hands Newton a usable
    // (if coarse) initial field.
    let three_h = 3.0 * field.grid.h();
    let eps_first = mu_sequence[0].powf(-0.5);
    if eps_first * profile.r0 < three_h {
        return Err(DomainError::UnresolvableSpike {
            mu: mu_sequence[0],
            res: field.grid.res(),
            eps_r0: eps_first * profile.r0,
            three_h,
            mu_max: (profile.r0 / three_h) * (profile.r0 / three_h),
        }
        .into());
    }
    let mut fields: Vec<GridField> = Vec::with_capacity(mu_sequence.len());
    let mut prev = field.clone();
    for (k, &mu) in mu_sequence.iter().enumerate() {
        let outcome = if k == 0 {
            // first entry: solve straight from the (resolvable) input field
            let warm = resample_spike(&prev, profile, mu)?;
            solve_semilinear(&warm, config, tol, max_iter)?
        } else {
            advance_step(&prev, config, profile, mu, tol, max_iter)?
        };
        match outcome {
            SolveOutcome::Converged(f) => {
                prev = f.clone();
                fields.push(f);
            }
            SolveOutcome::TrivialBranch(_) => {
                return Ok(ContinuationRun {
                    fields,
                    failure: Some(ContinuationFailure {
                        mu,
                        iterations: 0,
                        residual: 0.0,
                    }),
                });
            }
            SolveOutcome::Diverged {
                iterations,
                residual,
            } => {
                return Ok(ContinuationRun {
                    fields,
                    failure: Some(ContinuationFailure {
                        mu,
                        iterations,
                        residual,
                    }),
                });
            }
        }
    }
    Ok(ContinuationRun {
        fields,
        failure: None,
    })
}

/// One continuation entry: walk from the converged `start` up to `target`,
/// inserting intermediate μ values as needed. Returns `Converged` only at
/// `target` itself; any unrecoverable failure is mapped to the entry.
fn advance_step(
    start: &GridField,
    config: &ProblemConfig,
    profile: &RadialProfile,
    target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    let w0c = profile.w0_center();
    let inner_cap = max_iter.min(12);
    let mut cur = start.clone();
    while cur.mu < target {
        let pinned = (cur.max_value() - w0c).abs() > 0.15 * w0c;
        let mut mu_try = if pinned {
            (cur.mu * 1.2).min(target)
        } else {
            target
        };
        let mut use_raw = pinned;
        loop {
            let warm = if use_raw {
                GridField {
                    grid: cur.grid.clone(),
                    values: cur.values.clone(),
                    mu: mu_try,
                }
            } else {
                resample_spike(&cur, profile, mu_try)?
            };
            // intermediate rungs only warm-start the next rung, so a looser
            // tolerance there costs nothing at `target` itself
            let (iter_budget, step_tol) = if mu_try == target {
                (max_iter, tol)
            } else {
                (inner_cap, tol.max(1e-8))
            };
            match solve_semilinear(&warm, config, step_tol, iter_budget)? {
                SolveOutcome::Converged(f) => {
                    cur = f;
                    break;
                }
                failed => {
                    if !use_raw {
                        use_raw = true; // resample missed the branch; retry in place
                    } else if mu_try / cur.mu > 1.02 {
                        mu_try = (cur.mu * mu_try).sqrt();
                    } else {
                        // even 2% steps fail: the branch ends here
                        return Ok(failed);
                    }
                }
            }
        }
    }
    Ok(SolveOutcome::Converged(cur))
}

/// Rescale a spike field from its μ to a new μ (see `continue_in_mu`). No
/// resolvability guard here: warm starts below the seeding bound are allowed
/// by design, and the subsequent solve decides whether the branch survives.
pub fn resample_spike(
    field: &GridField,
    profile: &RadialProfile,
    mu: f64,
) -> Result<GridField> {
    let grid = &field.grid;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(DomainError::InvalidMu(mu).into());
    }
    let eps_new = mu.powf(-0.5);
    let r0 = profile.r0;
    if mu == field.mu {
        return Ok(field.clone());
    }
    let center = grid.node(field.argmax());
    let n = profile.config().n() as i32;
    let outer_factor = (eps_new / field.epsilon()).powi(n - 2);
    let core = eps_new * r0;
    let mut values = vec![0.0; grid.len()];
    for gi in 0..grid.len() {
        if !grid.interior()[gi] {
            continue;
        }
        let x = grid.node(gi);
        let dist = ((x[0] - center[0]).powi(2)
            + (x[1] - center[1]).powi(2)
            + (x[2] - center[2]).powi(2))
        .sqrt();
        values[gi] = if dist <= core {
            profile.w0(dist / eps_new)
        } else {
            outer_factor * field.values[gi]
        };
    }
    Ok(GridField {
        grid: grid.clone(),
        values,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{build_grid, seed_spike};
    use crate::radial::shoot;

    fn setup() -> (ProblemConfig, RadialProfile) {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        let profile = shoot(&config, 1e-6).unwrap();
        (config, profile)
    }

    #[test]
    fn solves_single_spike_to_tight_residual() {
        let (config, profile) = setup();
        let grid = build_grid(65).unwrap();
        let seed = seed_spike(&grid, [0.0; 3], &profile, 600.0).unwrap();
        let out = solve_semilinear(&seed, &config, 1e-10, 60).unwrap();
        let field = match out {
            SolveOutcome::Converged(f) => f,
            other => panic!("expected convergence, got {other:?}"),
        };
        assert!(residual_inf(&field, &config) <= 1e-10);
        assert!(field.max_value() > 1.5, "spike survives: {}", field.max_value());

        // frozen radial free-boundary oracle at mu=600: v(0) = 3.060473.
        // The spike core spans 4.2 cells here, so the 7-point Laplacian's
        // (h/eps)^2 ~ 0.59 truncation shows up as a +0.29 height bias;
        // the band covers oracle + bias, refinement checks live elsewhere.
        let center = grid.idx(32, 32, 32);
        assert!(
            (field.values[center] - 3.060473).abs() < 0.35,
            "center height {} vs radial oracle",
            field.values[center]
        );
        assert!(field.values[center] > 3.060473 - 0.05);

        // idempotence: re-solving from the converged field changes nothing
        let again = solve_semilinear(&field, &config, 1e-10, 60).unwrap();
        let f2 = again.field().unwrap();
        let diff = field
            .values
            .iter()
            .zip(&f2.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-14);
    }

    #[test]
    fn zero_guess_lands_on_trivial_branch() {
        let (config, _) = setup();
        let grid = build_grid(65).unwrap();
        let zero = GridField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            mu: 600.0,
        };
        match solve_semilinear(&zero, &config, 1e-10, 20).unwrap() {
            SolveOutcome::TrivialBranch(f) => {
                assert!(f.max_value() < 1.0);
            }
            other => panic!("expected trivial branch, got {other:?}"),
        }
    }

    #[test]
    fn continuation_requires_increasing_mu() {
        let (config, profile) = setup();
        let grid = build_grid(65).unwrap();
        let seed = seed_spike(&grid, [0.0; 3], &profile, 400.0).unwrap();
        let err = continue_in_mu(&seed, &config, &profile, &[700.0, 500.0], 1e-10, 60)
            .unwrap_err();
        assert!(err.to_string().contains("increas"), "{err}");
    }

    #[test]
    fn singleton_continuation_matches_direct_solve() {
        let (config, profile) = setup();
        let grid = build_grid(65).unwrap();
        let seed = seed_spike(&grid, [0.0; 3], &profile, 600.0).unwrap();
        let run = continue_in_mu(&seed, &config, &profile, &[600.0], 1e-10, 60).unwrap();
        assert!(run.failure.is_none());
        let direct = solve_semilinear(&seed, &config, 1e-10, 60).unwrap();
        let a = &run.fields[0].values;
        let b = &direct.field().unwrap().values;
        let diff = a
            .iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-12, "max diff {diff}");
    }

    #[test]
    fn continuation_walks_up_in_mu() {
        let (config, profile) = setup();
        let grid = build_grid(65).unwrap();
        let seed = seed_spike(&grid, [0.0; 3], &profile, 400.0).unwrap();
        let run =
            continue_in_mu(&seed, &config, &profile, &[400.0, 700.0, 1000.0], 1e-10, 60)
                .unwrap();
        assert!(run.failure.is_none(), "{:?}", run.failure);
        assert_eq!(run.fields.len(), 3);
        for (field, mu) in run.fields.iter().zip([400.0, 700.0, 1000.0]) {
            assert_eq!(field.mu, mu);
            let res = residual_inf(field, &config);
            assert!(res <= 1e-10, "mu={mu}: residual {res}");
        }
        // Every height sits above the limiting center value w0(0); the exact
        // gap mixes the O(eps^{N-2}) continuum correction with lattice bias
        // that grows as the spike shrinks toward the 3-cell seeding floor
        // (measured +1.1 at mu=1000 on this grid), so only a broad band is
        // meaningful here. Refinement behavior is checked at 97 vs 129.
        let heights: Vec<f64> = run.fields.iter().map(|f| f.max_value()).collect();
        let w0c = profile.w0_center();
        for h in &heights {
            assert!(
                *h > w0c && *h < w0c + 1.5,
                "heights {heights:?} should stay in a band above w0(0) = {w0c}"
            );
        }
    }
}
