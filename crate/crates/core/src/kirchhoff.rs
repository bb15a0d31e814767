//! Kirchhoff-Routh energy of weighted point configurations,
//!
//! ```text
//! ℋ(x_1..x_k) = Σ_i k_i² H(x_i, x_i) + Σ_{i≠j} k_i k_j G(x_i, x_j),
//! ```
//!
//! its analytic gradient, and a damped-Newton search for critical
//! configurations (which govern where spikes can condense). Critical points
//! are saddles in general, so the search targets `∇ℋ = 0` directly rather
//! than descending the energy.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{DomainError, Result};
use crate::greens::{DomainKernel, DomainKind};
use crate::model::ProblemConfig;
use crate::util::{dist, dot, norm, solve_dense};

/// A weighted spike configuration in the kernel's domain.
#[derive(Debug, Clone)]
pub struct SpikeConfiguration<'a> {
    kernel: &'a DomainKernel,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl<'a> SpikeConfiguration<'a> {
    pub fn new(
        kernel: &'a DomainKernel,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(DomainError::TooFewPoints { need: 1, got: 0 }.into());
        }
        if points.len() != weights.len() {
            return Err(DomainError::Invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            ))
            .into());
        }
        let n = kernel.config().n();
        for p in &points {
            if p.len() != n {
                return Err(DomainError::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                }
                .into());
            }
            if !kernel.contains(p) {
                return Err(DomainError::PointOutsideDomain(norm(p)).into());
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 || !w.is_finite() {
                return Err(DomainError::InvalidWeight { index: i, value: w }.into());
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = dist(&points[i], &points[j]);
                if d < 1e-10 {
                    return Err(DomainError::DuplicatePoints(d).into());
                }
            }
        }
        Ok(SpikeConfiguration {
            kernel,
            points,
            weights,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_i k_i² H(x_i,x_i) + Σ_{i≠j} k_i k_j G(x_i,x_j)` (both orderings of
    /// each pair summed, as written).
    pub fn hamiltonian(&self) -> Result<f64> {
        ham_eval(self.kernel, &self.points, &self.weights)
    }

    /// Analytic gradient with respect to each point:
    /// `∇_{x_m} ℋ = k_m² ∇(H(x,x))|_{x_m} + 2 k_m Σ_{j≠m} k_j ∇_x G(x_m, x_j)`.
    pub fn hamiltonian_grad(&self) -> Result<Vec<Vec<f64>>> {
        ham_grad(self.kernel, &self.points, &self.weights)
    }
}

fn ham_eval(kernel: &DomainKernel, points: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    let k = points.len();
    let mut total = 0.0;
    for i in 0..k {
        total += weights[i] * weights[i] * kernel.robin_diag(&points[i])?;
        for j in 0..k {
            if j != i {
                total += weights[i] * weights[j] * kernel.green(&points[i], &points[j])?;
            }
        }
    }
    Ok(total)
}

fn ham_grad(
    kernel: &DomainKernel,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let k = points.len();
    let n = kernel.config().n();
    let mut grads = Vec::with_capacity(k);
    for m in 0..k {
        let mut g = kernel.robin_diag_grad(&points[m])?;
        for gi in g.iter_mut() {
            *gi *= weights[m] * weights[m];
        }
        for j in 0..k {
            if j == m {
                continue;
            }
            let gg = kernel.green_grad_x(&points[m], &points[j])?;
            for i in 0..n {
                g[i] += 2.0 * weights[m] * weights[j] * gg[i];
            }
        }
        grads.push(g);
    }
    Ok(grads)
}

/// One deduplicated critical configuration found by `find_critical`, stored in
/// canonical orientation.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub hamiltonian: f64,
    pub grad_inf_norm: f64,
    /// number of restarts that converged to this orbit
    pub hits: usize,
}

/// Search outcome; an empty `critical_points` list with nonzero counters is a
/// legitimate result (some Hamiltonians have no critical point).
#[derive(Debug, Clone, Serialize)]
pub struct CriticalSearch {
    pub critical_points: Vec<CriticalPoint>,
    pub restarts: usize,
    pub converged: usize,
    pub escaped: usize,
    pub failed: usize,
}

/// Damped Newton search for `∇ℋ = 0` from `restarts` seeded random starting
/// configurations (points uniform in the 0.8-scaled domain). Results are
/// re-verified against `tol` (infinity norm of the full gradient), rotated to
/// a canonical frame, and merged by orbit.
pub fn find_critical(
    kernel: &DomainKernel,
    weights: &[f64],
    restarts: usize,
    tol: f64,
    seed: u64,
) -> Result<CriticalSearch> {
    let k = weights.len();
    if k == 0 {
        return Err(DomainError::TooFewPoints { need: 1, got: 0 }.into());
    }
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 || !w.is_finite() {
            return Err(DomainError::InvalidWeight { index: i, value: w }.into());
        }
    }
    let n = kernel.config().n();
    let dim = k * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut search = CriticalSearch {
        critical_points: Vec::new(),
        restarts,
        converged: 0,
        escaped: 0,
        failed: 0,
    };

    for _ in 0..restarts {
        // starting configuration with healthy separation
        let mut z = vec![0.0; dim];
        let mut attempts = 0;
        loop {
            for m in 0..k {
                let p = kernel.sample_interior(&mut rng, 0.2);
                z[m * n..(m + 1) * n].copy_from_slice(&p);
            }
            if min_separation(&z, k, n) > 0.05 || attempts > 100 {
                break;
            }
            attempts += 1;
        }

        match newton_on_gradient(kernel, weights, &mut z, tol) {
            NewtonOutcome::Converged => {
                let points: Vec<Vec<f64>> =
                    (0..k).map(|m| z[m * n..(m + 1) * n].to_vec()).collect();
                let (cpoints, cweights) = canonicalize(kernel.kind(), &points, weights);
                // re-verify in the canonical frame (the infinity norm is not
                // rotation invariant; polished iterates have huge margin)
                let grads = match ham_grad(kernel, &cpoints, &cweights) {
                    Ok(g) => g,
                    Err(_) => {
                        search.failed += 1;
                        continue;
                    }
                };
                let ginf = grads
                    .iter()
                    .flat_map(|g| g.iter())
                    .fold(0.0f64, |a, &b| a.max(b.abs()));
                if ginf > tol {
                    search.failed += 1;
                    continue;
                }
                search.converged += 1;
                let ham = ham_eval(kernel, &cpoints, &cweights)?;
                merge_critical(&mut search.critical_points, cpoints, cweights, ham, ginf);
            }
            NewtonOutcome::Escaped => search.escaped += 1,
            NewtonOutcome::Failed => search.failed += 1,
        }
    }
    // stable order: by Hamiltonian value, then point count is fixed
    search
        .critical_points
        .sort_by(|a, b| a.hamiltonian.partial_cmp(&b.hamiltonian).unwrap());
    Ok(search)
}

enum NewtonOutcome {
    Converged,
    Escaped,
    Failed,
}

fn min_separation(z: &[f64], k: usize, n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            best = best.min(dist(&z[i * n..(i + 1) * n], &z[j * n..(j + 1) * n]));
        }
    }
    best
}

/// Iterates must stay well inside the domain; anything that drifts out is an
/// escape (the half-space Robin gradient decays toward x_N = -∞, so unbounded
/// iterates would otherwise fake convergence).
fn iterate_ok(kind: &DomainKind, z: &[f64], k: usize, n: usize) -> bool {
    if min_separation(z, k, n) < 1e-6 && k > 1 {
        return false;
    }
    for m in 0..k {
        let p = &z[m * n..(m + 1) * n];
        match kind {
            DomainKind::HalfSpace => {
                if p[n - 1] > -1e-4 || norm(p) > 10.0 {
                    return false;
                }
            }
            _ => {
                if !contains_with_margin(kind, p, n) {
                    return false;
                }
            }
        }
    }
    true
}

fn contains_with_margin(kind: &DomainKind, p: &[f64], n: usize) -> bool {
    match kind {
        DomainKind::UnitBall => norm(p) <= 0.999,
        DomainKind::HalfSpace => p[n - 1] <= -1e-4,
        DomainKind::Rescaled {
            base,
            center,
            scale,
        } => {
            let mapped: Vec<f64> = center
                .iter()
                .zip(p.iter())
                .map(|(c, v)| c + scale * v)
                .collect();
            contains_with_margin(base, &mapped, n)
        }
    }
}

fn grad_flat(kernel: &DomainKernel, weights: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let k = weights.len();
    let n = kernel.config().n();
    let points: Vec<Vec<f64>> = (0..k).map(|m| z[m * n..(m + 1) * n].to_vec()).collect();
    let grads = ham_grad(kernel, &points, weights)?;
    Ok(grads.into_iter().flatten().collect())
}

fn newton_on_gradient(
    kernel: &DomainKernel,
    weights: &[f64],
    z: &mut Vec<f64>,
    tol: f64,
) -> NewtonOutcome {
    let k = weights.len();
    let n = kernel.config().n();
    let dim = k * n;
    let kind = kernel.kind().clone();
    let fd_h = 1e-6;
    let max_iter = 300;

    let mut g = match grad_flat(kernel, weights, z) {
        Ok(g) => g,
        Err(_) => return NewtonOutcome::Failed,
    };
    let mut polish = 0usize;
    for _ in 0..max_iter {
        let ginf = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if ginf <= tol {
            // a couple of extra polished steps drive the gradient to rounding
            // level, so canonical-frame re-verification has margin
            polish += 1;
            if polish > 2 || ginf == 0.0 {
                return NewtonOutcome::Converged;
            }
        }

        // finite-difference Hessian of the analytic gradient, symmetrized
        let mut hess = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += fd_h;
            zm[j] -= fd_h;
            let (gp, gm) = match (
                grad_flat(kernel, weights, &zp),
                grad_flat(kernel, weights, &zm),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return NewtonOutcome::Failed,
            };
            for i in 0..dim {
                hess[i * dim + j] = (gp[i] - gm[i]) / (2.0 * fd_h);
            }
        }
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (hess[i * dim + j] + hess[j * dim + i]);
                hess[i * dim + j] = avg;
                hess[j * dim + i] = avg;
            }
        }

        let phi0 = dot(&g, &g);
        let mut lambda = 0.0f64;
        let mut stepped = false;
        'damping: loop {
            let mut a = hess.clone();
            for i in 0..dim {
                a[i * dim + i] += lambda;
            }
            let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let solve_ok = solve_dense(&mut a, &mut rhs).is_ok()
                && rhs.iter().all(|v| v.is_finite());
            if solve_ok {
                // backtracking on |∇ℋ|²
                let mut alpha = 1.0f64;
                while alpha >= 1e-10 {
                    let zt: Vec<f64> =
                        z.iter().zip(&rhs).map(|(a, s)| a + alpha * s).collect();
                    if iterate_ok(&kind, &zt, k, n) {
                        if let Ok(gt) = grad_flat(kernel, weights, &zt) {
                            if dot(&gt, &gt) <= phi0 * (1.0 - 1e-4 * alpha) {
                                *z = zt;
                                g = gt;
                                stepped = true;
                                break 'damping;
                            }
                        }
                    }
                    alpha *= 0.5;
                }
            }
            lambda = if lambda == 0.0 { 1e-8 } else { lambda * 100.0 };
            if lambda > 1e10 {
                break;
            }
        }
        if !stepped {
            // no descent direction left: converged iterates exit above, the
            // rest either escaped or stalled
            return if polish > 0 {
                NewtonOutcome::Converged
            } else if !iterate_ok(&kind, z, k, n) {
                NewtonOutcome::Escaped
            } else {
                NewtonOutcome::Failed
            };
        }
        if !iterate_ok(&kind, z, k, n) {
            return NewtonOutcome::Escaped;
        }
    }
    NewtonOutcome::Failed
}

/// Rotate a configuration to a canonical frame and sort the points, so that
/// configurations equal up to the domain's rotations/reflections and up to
/// permutation compare equal coordinatewise. Complete for configurations
/// spanning at most two directions (all cases exercised here); higher-rank
/// configurations may keep distinct representatives per mirror class.
fn canonicalize(
    kind: &DomainKind,
    points: &[Vec<f64>],
    weights: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = points.len();
    let n = points[0].len();
    let mut best: Option<(Vec<Vec<f64>>, Vec<f64>)> = None;

    let translation_gauge = matches!(kind, DomainKind::HalfSpace);
    for anchor in 0..k {
        let secondaries: Vec<usize> = if k == 1 {
            vec![usize::MAX]
        } else {
            (0..k).filter(|&b| b != anchor).collect()
        };
        for &secondary in &secondaries {
            let mut pts: Vec<Vec<f64>> = points.to_vec();
            if translation_gauge {
                // slide the anchor's horizontal part to the origin
                let shift: Vec<f64> = pts[anchor][..n - 1].to_vec();
                for p in pts.iter_mut() {
                    for i in 0..n - 1 {
                        p[i] -= shift[i];
                    }
                }
            }
            let horizontal_only = translation_gauge;
            // first rotation: anchor onto the +e1 ray (horizontal subspace
            // only for the half-space, whose rotations fix e_N)
            let a_vec: Vec<f64> = if horizontal_only {
                let mut v = pts[anchor].clone();
                v[n - 1] = 0.0;
                v
            } else {
                pts[anchor].clone()
            };
            if let Some(u) = reflector_to(&a_vec, 0, n) {
                for p in pts.iter_mut() {
                    reflect_in_place(&u, p, horizontal_only, n);
                }
            }
            // second rotation: the secondary's component perpendicular to e1
            // onto +e2 (fixes e1, and e_N in the half-space case)
            if secondary != usize::MAX && n >= 3 {
                let mut w = pts[secondary].clone();
                w[0] = 0.0;
                if horizontal_only {
                    w[n - 1] = 0.0;
                }
                if let Some(u) = reflector_to(&w, 1, n) {
                    for p in pts.iter_mut() {
                        reflect_in_place(&u, p, horizontal_only, n);
                    }
                }
            }
            // permutation: sort points (carrying weights) lexicographically
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&i, &j| {
                weights[i]
                    .partial_cmp(&weights[j])
                    .unwrap()
                    .then_with(|| cmp_coords(&pts[i], &pts[j]))
            });
            let cand_pts: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
            let cand_w: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
            let better = match &best {
                None => true,
                Some((bp, bw)) => cmp_config(&cand_pts, &cand_w, bp, bw).is_lt(),
            };
            if better {
                best = Some((cand_pts, cand_w));
            }
        }
    }
    best.unwrap()
}

fn cmp_coords(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        // tolerance so equivalent frames with rounding noise compare equal
        if (x - y).abs() > 1e-9 {
            return x.partial_cmp(y).unwrap();
        }
    }
    std::cmp::Ordering::Equal
}

fn cmp_config(
    ap: &[Vec<f64>],
    aw: &[f64],
    bp: &[Vec<f64>],
    bw: &[f64],
) -> std::cmp::Ordering {
    for (x, y) in aw.iter().zip(bw) {
        if (x - y).abs() > 1e-9 {
            return x.partial_cmp(y).unwrap();
        }
    }
    for (pa, pb) in ap.iter().zip(bp) {
        let c = cmp_coords(pa, pb);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

/// Householder vector mapping `v` onto `|v| e_axis`; `None` when already
/// aligned (or `v ≈ 0`), meaning the identity suffices.
fn reflector_to(v: &[f64], axis: usize, n: usize) -> Option<Vec<f64>> {
    let r = norm(v);
    if r < 1e-9 {
        return None;
    }
    let mut u: Vec<f64> = (0..n).map(|i| v[i] / r).collect();
    u[axis] -= 1.0;
    let un = norm(&u);
    if un < 1e-9 {
        return None;
    }
    for ui in u.iter_mut() {
        *ui /= un;
    }
    Some(u)
}

fn reflect_in_place(u: &[f64], p: &mut [f64], horizontal_only: bool, n: usize) {
    let m = if horizontal_only { n - 1 } else { n };
    let mut d = 0.0;
    for i in 0..m {
        d += u[i] * p[i];
    }
    d *= 2.0;
    for i in 0..m {
        p[i] -= d * u[i];
    }
}

fn merge_critical(
    list: &mut Vec<CriticalPoint>,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    hamiltonian: f64,
    grad_inf_norm: f64,
) {
    for cp in list.iter_mut() {
        if cp.points.len() != points.len() {
            continue;
        }
        let same = cp
            .points
            .iter()
            .zip(&points)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-5))
            && cp
                .weights
                .iter()
                .zip(&weights)
                .all(|(x, y)| (x - y).abs() <= 1e-12);
        if same {
            cp.hits += 1;
            if grad_inf_norm < cp.grad_inf_norm {
                cp.points = points;
                cp.weights = weights;
                cp.hamiltonian = hamiltonian;
                cp.grad_inf_norm = grad_inf_norm;
            }
            return;
        }
    }
    list.push(CriticalPoint {
        points,
        weights,
        hamiltonian,
        grad_inf_norm,
        hits: 1,
    });
}

/// Root of the reduced antipodal-pair equation for weights (1, -1) in the unit
/// ball: the slice energy `ψ(t) = ℋ(t e, -t e)` satisfies
///
/// ```text
/// ψ'(t) ∝ t(1-t²)^{1-N} + t(1+t²)^{1-N} - (2t)^{1-N} = 0,
/// ```
///
/// balancing the Robin boundary attraction against the opposite-charge Green
/// attraction. (With equal weights (1,1) the same slice is strictly monotone:
/// equal charges repel on collision and the boundary term dominates outward,
/// so no symmetric pair exists; `find_critical` confirms by finding nothing.)
pub fn dipole_reduced_tstar(config: &ProblemConfig) -> Result<f64> {
    let n = config.n() as i32;
    let q = |t: f64| -> f64 {
        t * (1.0 - t * t).powi(1 - n) + t * (1.0 + t * t).powi(1 - n)
            - (2.0 * t).powi(1 - n)
    };
    let mut lo = 1e-6;
    let mut hi = 1.0 - 1e-9;
    if !(q(lo) < 0.0 && q(hi) > 0.0) {
        return Err(crate::error::NumericalError::BracketFailed { lo, hi }.into());
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if q(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ball3() -> DomainKernel {
        DomainKernel::unit_ball(ProblemConfig::new(3, 2.0).unwrap())
    }

    /// Independent oracle value for the N=3 dipole radius (high-precision
    /// Brent solve of the reduced equation, frozen).
    const TSTAR_N3: f64 = 0.474_964_653_548_373_36;

    #[test]
    fn single_point_at_center_value() {
        let kernel = ball3();
        let config =
            SpikeConfiguration::new(&kernel, vec![vec![0.0; 3]], vec![1.0]).unwrap();
        let h = config.hamiltonian().unwrap();
        assert!((h + 1.0 / (4.0 * PI)).abs() < 1e-15);
        let g = config.hamiltonian_grad().unwrap();
        assert!(norm(&g[0]) < 1e-15);
    }

    #[test]
    fn hamiltonian_permutation_invariant() {
        let kernel = ball3();
        let pts = vec![
            vec![0.3, 0.1, -0.2],
            vec![-0.4, 0.2, 0.1],
            vec![0.0, -0.5, 0.3],
        ];
        let w = vec![1.0, 2.0, -1.5];
        let a = SpikeConfiguration::new(&kernel, pts.clone(), w.clone())
            .unwrap()
            .hamiltonian()
            .unwrap();
        let perm_pts = vec![pts[2].clone(), pts[0].clone(), pts[1].clone()];
        let perm_w = vec![w[2], w[0], w[1]];
        let b = SpikeConfiguration::new(&kernel, perm_pts, perm_w)
            .unwrap()
            .hamiltonian()
            .unwrap();
        assert!((a - b).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn antipodal_pair_matches_direct_assembly() {
        let kernel = ball3();
        let t = 0.37;
        let x1 = vec![t, 0.0, 0.0];
        let x2 = vec![-t, 0.0, 0.0];
        let config =
            SpikeConfiguration::new(&kernel, vec![x1.clone(), x2.clone()], vec![1.0, 1.0])
                .unwrap();
        let via_op = config.hamiltonian().unwrap();
        let direct = kernel.robin_diag(&x1).unwrap()
            + kernel.robin_diag(&x2).unwrap()
            + 2.0 * kernel.green(&x1, &x2).unwrap();
        assert!((via_op - direct).abs() <= 1e-12 * via_op.abs());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let kernel = ball3();
        let pts = vec![
            vec![0.3, 0.15, -0.2],
            vec![-0.45, 0.2, 0.12],
            vec![0.05, -0.5, 0.31],
        ];
        let w = vec![1.0, -2.0, 1.5];
        let config = SpikeConfiguration::new(&kernel, pts.clone(), w.clone()).unwrap();
        let grads = config.hamiltonian_grad().unwrap();
        let scale: f64 = grads.iter().map(|g| dot(g, g)).sum::<f64>().sqrt();
        let h = 1e-5;
        for m in 0..pts.len() {
            for i in 0..3 {
                let mut pp = pts.clone();
                let mut pm = pts.clone();
                pp[m][i] += h;
                pm[m][i] -= h;
                let fp = SpikeConfiguration::new(&kernel, pp, w.clone())
                    .unwrap()
                    .hamiltonian()
                    .unwrap();
                let fm = SpikeConfiguration::new(&kernel, pm, w.clone())
                    .unwrap()
                    .hamiltonian()
                    .unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (grads[m][i] - fd).abs() <= 1e-6 * scale,
                    "grad[{m}][{i}]: {} vs fd {fd}",
                    grads[m][i]
                );
            }
        }
    }

    #[test]
    fn off_center_gradient_is_radial() {
        let kernel = ball3();
        let config =
            SpikeConfiguration::new(&kernel, vec![vec![0.3, 0.0, 0.0]], vec![1.0]).unwrap();
        let g = config.hamiltonian_grad().unwrap();
        assert!(g[0][1].abs() < 1e-15 && g[0][2].abs() < 1e-15);
        assert!(g[0][0].abs() > 1e-3, "radial component should be nonzero");
    }

    #[test]
    fn ball_k1_finds_harmonic_center_from_every_restart() {
        let kernel = ball3();
        let search = find_critical(&kernel, &[1.0], 16, 1e-9, 71).unwrap();
        assert_eq!(search.converged, 16, "all restarts converge: {search:?}");
        assert_eq!(search.critical_points.len(), 1);
        let cp = &search.critical_points[0];
        assert!(norm(&cp.points[0]) <= 1e-8, "|x*| = {:.3e}", norm(&cp.points[0]));
        assert!((cp.hamiltonian + 1.0 / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn halfspace_k1_reports_no_critical_point() {
        let kernel = DomainKernel::half_space(ProblemConfig::new(3, 2.0).unwrap());
        let search = find_critical(&kernel, &[1.0], 16, 1e-9, 13).unwrap();
        assert!(search.critical_points.is_empty(), "{search:?}");
        assert_eq!(search.converged, 0);
        assert_eq!(search.escaped + search.failed, 16);
    }

    #[test]
    fn dipole_pair_matches_reduced_equation() {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        let tstar = dipole_reduced_tstar(&config).unwrap();
        assert!((tstar - TSTAR_N3).abs() < 1e-12, "t* = {tstar}");

        let kernel = DomainKernel::unit_ball(config);
        let search = find_critical(&kernel, &[1.0, -1.0], 64, 1e-9, 2024).unwrap();
        assert!(search.converged > 0, "{search:?}");
        assert_eq!(search.critical_points.len(), 1, "{search:?}");
        let cp = &search.critical_points[0];
        for p in &cp.points {
            assert!((norm(p) - tstar).abs() <= 1e-6, "radius {}", norm(p));
        }
        // antipodal: the pair sums to zero
        let s: Vec<f64> = (0..3).map(|i| cp.points[0][i] + cp.points[1][i]).collect();
        assert!(norm(&s) <= 1e-6);
    }

    #[test]
    fn equal_weights_pair_has_no_critical_point() {
        // Equal charges: the slice energy is strictly monotone (Green
        // repulsion blows up at collision, Robin pulls to the boundary), and
        // the full 6-dimensional search finds nothing anywhere else either.
        let kernel = ball3();
        let search = find_critical(&kernel, &[1.0, 1.0], 64, 1e-9, 5150).unwrap();
        assert!(
            search.critical_points.is_empty(),
            "unexpected critical point: {:?}",
            search.critical_points
        );
    }

    #[test]
    fn canonicalization_merges_rotated_copies() {
        let kernel = ball3();
        // run two searches with different seeds; orbits must land on the same
        // canonical representative
        let s1 = find_critical(&kernel, &[1.0, -1.0], 8, 1e-9, 1).unwrap();
        let s2 = find_critical(&kernel, &[1.0, -1.0], 8, 1e-9, 2).unwrap();
        let (a, b) = (&s1.critical_points[0], &s2.critical_points[0]);
        for (pa, pb) in a.points.iter().zip(&b.points) {
            for (x, y) in pa.iter().zip(pb) {
                assert!((x - y).abs() <= 1e-5, "{:?} vs {:?}", a.points, b.points);
            }
        }
    }

    #[test]
    fn rejects_invalid_configurations() {
        let kernel = ball3();
        assert!(SpikeConfiguration::new(&kernel, vec![], vec![]).is_err());
        assert!(
            SpikeConfiguration::new(&kernel, vec![vec![0.1, 0.0, 0.0]], vec![0.0]).is_err()
        );
        assert!(SpikeConfiguration::new(
            &kernel,
            vec![vec![0.1, 0.0, 0.0], vec![0.1, 0.0, 0.0]],
            vec![1.0, 1.0]
        )
        .is_err());
        assert!(
            SpikeConfiguration::new(&kernel, vec![vec![1.1, 0.0, 0.0]], vec![1.0]).is_err()
        );
        assert!(SpikeConfiguration::new(
            &kernel,
            vec![vec![0.1, 0.0, 0.0], vec![0.2, 0.0, 0.0]],
            vec![1.0]
        )
        .is_err());
    }
}
