//! Finite-difference solver for the free-boundary problem
//! `-Δv = μ[v-1]₊ᵖ`, `v = 0` on the unit sphere, on a Cartesian grid over
//! the bounding cube [-1,1]³ (N = 3 only).
//!
//! The curved boundary is handled by the symmetric Shortley-Weller
//! discretization: boundary-cut legs shorten to `θh` and, after eliminating
//! the zero Dirichlet value, only the diagonal entry changes, so the operator
//! stays symmetric positive definite with the standard `-1/h²` off-diagonal
//! couplings between interior neighbors.

pub mod dump;
pub mod linsolve;
pub mod solve;
pub mod spikes;

use std::sync::Arc;

use crate::error::{DomainError, Result};
use crate::radial::RadialProfile;

pub use solve::{continue_in_mu, solve_semilinear, ContinuationRun, SolveOutcome};
pub use spikes::{extract_spikes, PlasmaComponent, SpikeReport};

pub const SUPPORTED_RESOLUTIONS: [usize; 4] = [65, 97, 129, 193];

/// Discretized unit ball: interior mask plus the Shortley-Weller diagonal of
/// the negative Laplacian. Exterior entries of any field vector are kept at
/// exactly 0, which lets the operator read all 6 neighbors unconditionally.
#[derive(Debug)]
pub struct BallGrid {
    res: usize,
    h: f64,
    interior: Vec<bool>,
    diag: Vec<f64>,
}

pub fn build_grid(resolution: usize) -> Result<Arc<BallGrid>> {
    if !SUPPORTED_RESOLUTIONS.contains(&resolution) {
        return Err(DomainError::BadResolution(resolution).into());
    }
    let res = resolution;
    let h = 2.0 / (res as f64 - 1.0);
    let total = res * res * res;
    let coord = |i: usize| -> f64 { -1.0 + h * i as f64 };

    // Exact classification in integer coordinates u = 2i - (res-1), so that
    // lattice points exactly on the sphere (e.g. (1,2,2)/3 patterns when
    // res-1 is divisible by 3) count as boundary; the float test misclassifies
    // a few of them as interior with zero-length boundary legs.
    let m = res as i64 - 1;
    let mut interior = vec![false; total];
    for ix in 0..res {
        for iy in 0..res {
            for iz in 0..res {
                let u = [
                    2 * ix as i64 - m,
                    2 * iy as i64 - m,
                    2 * iz as i64 - m,
                ];
                if u[0] * u[0] + u[1] * u[1] + u[2] * u[2] < m * m {
                    interior[(ix * res + iy) * res + iz] = true;
                }
            }
        }
    }

    let mut diag = vec![0.0; total];
    let inv_h2 = 1.0 / (h * h);
    for ix in 0..res {
        for iy in 0..res {
            for iz in 0..res {
                let gi = (ix * res + iy) * res + iz;
                if !interior[gi] {
                    continue;
                }
                let x = [coord(ix), coord(iy), coord(iz)];
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let neighbor_interior = [
                    interior[gi - res * res],
                    interior[gi + res * res],
                    interior[gi - res],
                    interior[gi + res],
                    interior[gi - 1],
                    interior[gi + 1],
                ];
                let mut d = 0.0;
                for dim in 0..3 {
                    for (side, sign) in [(0usize, -1.0f64), (1usize, 1.0f64)] {
                        if neighbor_interior[2 * dim + side] {
                            d += inv_h2;
                        } else {
                            // leg shortened to θh where the ray hits |x| = 1
                            let xd = sign * x[dim];
                            let theta = (-xd + (xd * xd + 1.0 - r2).sqrt()) / h;
                            d += inv_h2 / theta;
                        }
                    }
                }
                diag[gi] = d;
            }
        }
    }

    Ok(Arc::new(BallGrid {
        res,
        h,
        interior,
        diag,
    }))
}

impl BallGrid {
    pub fn res(&self) -> usize {
        self.res
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.res * self.res * self.res
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.res + iy) * self.res + iz
    }

    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + self.h * i as f64
    }

    pub fn node(&self, gi: usize) -> [f64; 3] {
        let res = self.res;
        let iz = gi % res;
        let iy = (gi / res) % res;
        let ix = gi / (res * res);
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    /// `out = A v` where `A` is the negative discrete Laplacian with zero
    /// Dirichlet data. Requires (and preserves) exterior zeros in `v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        use rayon::prelude::*;
        let res = self.res;
        let plane = res * res;
        let inv_h2 = 1.0 / (self.h * self.h);
        out.par_chunks_mut(plane).enumerate().for_each(|(ix, slab)| {
            for li in 0..plane {
                let gi = ix * plane + li;
                if !self.interior[gi] {
                    slab[li] = 0.0;
                    continue;
                }
                // interior nodes are never on the cube face, so all six
                // neighbor indices are in range; exterior neighbors hold 0
                let s = v[gi - plane]
                    + v[gi + plane]
                    + v[gi - res]
                    + v[gi + res]
                    + v[gi - 1]
                    + v[gi + 1];
                slab[li] = self.diag[gi] * v[gi] - s * inv_h2;
            }
        });
    }

    /// Diagonal of `A` (zero at exterior nodes).
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Solve the Poisson problem `-Δu = f` with zero boundary data by
    /// conjugate gradients (the operator is SPD).
    pub fn poisson_solve(&self, f: impl Fn([f64; 3]) -> f64) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.len()];
        for gi in 0..self.len() {
            if self.interior[gi] {
                rhs[gi] = f(self.node(gi));
            }
        }
        let mut u = vec![0.0; self.len()];
        linsolve::cg(
            |x, out| self.apply(x, out),
            &rhs,
            &mut u,
            1e-12,
            20 * self.res,
        )?;
        Ok(u)
    }

    /// Volume weight of the grid cell around a node: `h³` well inside,
    /// linearly reduced where the cell straddles the sphere (radial half-cell
    /// model; the integrands of interest vanish there anyway).
    pub fn cell_volume(&self, gi: usize) -> f64 {
        let x = self.node(gi);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let frac = ((1.0 - r) / self.h + 0.5).clamp(0.0, 1.0);
        frac * self.h * self.h * self.h
    }
}

/// A field over the grid: values on every node of the bounding cube, zero on
/// and outside the sphere, together with the parameter `μ` (so the intrinsic
/// spike scale `ε = μ^{-1/2}` travels with the data).
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: Arc<BallGrid>,
    pub values: Vec<f64>,
    pub mu: f64,
}

impl GridField {
    pub fn epsilon(&self) -> f64 {
        self.mu.powf(-0.5)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    /// Index of the maximal node.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        let mut bv = f64::NEG_INFINITY;
        for (i, &v) in self.values.iter().enumerate() {
            if v > bv {
                bv = v;
                best = i;
            }
        }
        best
    }

    /// Check the field invariants: exterior zeros and the discrete maximum
    /// principle floor `v ≥ -10h²`.
    pub fn validate(&self) -> Result<()> {
        let floor = -10.0 * self.grid.h() * self.grid.h();
        for (gi, &v) in self.values.iter().enumerate() {
            if !self.grid.interior()[gi] && v != 0.0 {
                return Err(DomainError::Invalid(format!(
                    "nonzero exterior value {v} at node {gi}"
                ))
                .into());
            }
            if v < floor {
                return Err(DomainError::Invalid(format!(
                    "value {v} below the maximum-principle floor {floor}"
                ))
                .into());
            }
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(DomainError::InvalidMu(self.mu).into());
        }
        Ok(())
    }

    /// Discrete mass `μ^{3/2} Σ [v-1]₊ᵖ · cell volume`.
    pub fn mass(&self, p: f64) -> f64 {
        let mut total = 0.0;
        for gi in 0..self.values.len() {
            let excess = self.values[gi] - 1.0;
            if excess > 0.0 {
                total += excess.powf(p) * self.grid.cell_volume(gi);
            }
        }
        self.mu.powf(1.5) * total
    }
}

/// Sample the spike profile `v₀(x) = w₀(|x - center|/ε)` on the grid as an
/// initial guess. Rejected when the spike core `εR₀` spans fewer than three
/// cells; the error reports the largest resolvable `μ` for this grid.
pub fn seed_spike(
    grid: &Arc<BallGrid>,
    center: [f64; 3],
    profile: &RadialProfile,
    mu: f64,
) -> Result<GridField> {
    if profile.config().n() != 3 {
        return Err(DomainError::DimensionMismatch {
            expected: 3,
            got: profile.config().n(),
        }
        .into());
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(DomainError::InvalidMu(mu).into());
    }
    let cn = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
    if cn >= 1.0 {
        return Err(DomainError::PointOutsideDomain(cn).into());
    }
    let eps = mu.powf(-0.5);
    let r0 = profile.r0;
    let three_h = 3.0 * grid.h();
    if eps * r0 < three_h {
        return Err(DomainError::UnresolvableSpike {
            mu,
            res: grid.res(),
            eps_r0: eps * r0,
            three_h,
            mu_max: (r0 / three_h) * (r0 / three_h),
        }
        .into());
    }
    let mut values = vec![0.0; grid.len()];
    for gi in 0..grid.len() {
        if grid.interior()[gi] {
            let x = grid.node(gi);
            let d = ((x[0] - center[0]).powi(2)
                + (x[1] - center[1]).powi(2)
                + (x[2] - center[2]).powi(2))
            .sqrt();
            values[gi] = profile.w0(d / eps);
        }
    }
    Ok(GridField {
        grid: Arc::clone(grid),
        values,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemConfig;
    use crate::radial::shoot;

    fn profile_32() -> RadialProfile {
        shoot(&ProblemConfig::new(3, 2.0).unwrap(), 1e-6).unwrap()
    }

    #[test]
    fn rejects_unsupported_resolution() {
        assert!(build_grid(64).is_err());
        assert!(build_grid(128).is_err());
        assert!(build_grid(0).is_err());
    }

    #[test]
    fn on_sphere_lattice_points_count_as_boundary() {
        // (1,2,2)/3-type points sit exactly on the sphere when res-1 is
        // divisible by 3; they must classify as boundary or their stencil
        // legs degenerate to zero length (infinite diagonal)
        for res in [97usize, 193] {
            let grid = build_grid(res).unwrap();
            for gi in 0..grid.len() {
                if grid.interior()[gi] {
                    assert!(
                        grid.diagonal()[gi].is_finite(),
                        "res {res}: non-finite diagonal at node {gi}"
                    );
                }
            }
            let third = (res - 1) / 6;
            let gi = grid.idx((res - 1) / 2 + third, (res - 1) / 2 + 2 * third, (res - 1) / 2 + 2 * third);
            assert!(!grid.interior()[gi]);
        }
    }

    #[test]
    fn grid_mask_is_cube_symmetric() {
        let grid = build_grid(65).unwrap();
        let res = grid.res();
        for ix in 0..res {
            for iy in 0..res {
                for iz in 0..res {
                    let a = grid.interior()[grid.idx(ix, iy, iz)];
                    let m = res - 1;
                    for &(jx, jy, jz) in &[
                        (m - ix, iy, iz),
                        (iy, ix, iz),
                        (iz, iy, ix),
                    ] {
                        assert_eq!(a, grid.interior()[grid.idx(jx, jy, jz)]);
                    }
                }
            }
        }
    }

    #[test]
    fn poisson_matches_analytic_ball_solution() {
        // -Δu = 1 on the ball => u = (1 - |x|²)/6
        let grid = build_grid(65).unwrap();
        let u = grid.poisson_solve(|_| 1.0).unwrap();
        let center = grid.idx(32, 32, 32);
        assert!(
            (u[center] - 1.0 / 6.0).abs() < 2e-3,
            "u(0) = {} vs 1/6",
            u[center]
        );
        let mut max_err = 0.0f64;
        for gi in 0..grid.len() {
            if grid.interior()[gi] {
                let x = grid.node(gi);
                let exact = (1.0 - x[0] * x[0] - x[1] * x[1] - x[2] * x[2]) / 6.0;
                max_err = max_err.max((u[gi] - exact).abs());
            }
        }
        assert!(max_err < 3e-3, "max error {max_err}");
    }

    #[test]
    fn poisson_error_drops_with_resolution() {
        let mut errs = Vec::new();
        for res in [65usize, 129] {
            let grid = build_grid(res).unwrap();
            let u = grid.poisson_solve(|_| 1.0).unwrap();
            let mut max_err = 0.0f64;
            for gi in 0..grid.len() {
                if grid.interior()[gi] {
                    let x = grid.node(gi);
                    let exact = (1.0 - x[0] * x[0] - x[1] * x[1] - x[2] * x[2]) / 6.0;
                    max_err = max_err.max((u[gi] - exact).abs());
                }
            }
            errs.push(max_err);
        }
        let ratio = errs[0] / errs[1];
        assert!(
            ratio > 2.2,
            "halving h should cut the error roughly 4x, got {ratio:.2} ({errs:?})"
        );
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let grid = build_grid(65).unwrap();
        let u = grid.poisson_solve(|_| 0.0).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_is_symmetric() {
        let grid = build_grid(65).unwrap();
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut u = vec![0.0; grid.len()];
        let mut v = vec![0.0; grid.len()];
        for gi in 0..grid.len() {
            if grid.interior()[gi] {
                u[gi] = rng.gen_range(-1.0..1.0);
                v[gi] = rng.gen_range(-1.0..1.0);
            }
        }
        let mut au = vec![0.0; grid.len()];
        let mut av = vec![0.0; grid.len()];
        grid.apply(&u, &mut au);
        grid.apply(&v, &mut av);
        let left = crate::util::dot(&au, &v);
        let right = crate::util::dot(&u, &av);
        assert!(
            (left - right).abs() <= 1e-10 * left.abs().max(1.0),
            "{left} vs {right}"
        );
    }

    #[test]
    fn seed_respects_resolvability() {
        let grid = build_grid(65).unwrap();
        let profile = profile_32();
        // eps*R0 = 3h at mu_max = (R0/3h)²; just beyond must fail
        let r0 = profile.r0;
        let mu_max = (r0 / (3.0 * grid.h())).powi(2);
        let err = seed_spike(&grid, [0.0; 3], &profile, mu_max * 1.05).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("resolvable"), "unexpected message: {msg}");
        assert!(seed_spike(&grid, [0.0; 3], &profile, mu_max * 0.9).is_ok());
        assert!(seed_spike(&grid, [0.0; 3], &profile, -5.0).is_err());
        assert!(seed_spike(&grid, [1.5, 0.0, 0.0], &profile, 100.0).is_err());
    }

    #[test]
    fn seed_samples_profile_center_and_mass() {
        let grid = build_grid(97).unwrap();
        let profile = profile_32();
        // pick mu so that eps*R0 = 10h: comfortably resolved
        let eps = 10.0 * grid.h() / profile.r0;
        let mu = eps.powi(-2);
        let field = seed_spike(&grid, [0.0; 3], &profile, mu).unwrap();
        field.validate().unwrap();

        let center = grid.idx(48, 48, 48);
        assert!((field.values[center] - profile.w0_center()).abs() < 1e-12);
        assert_eq!(field.argmax(), center);

        let mass = field.mass(2.0);
        let expected = profile.mass;
        assert!(
            (mass - expected).abs() <= 0.05 * expected,
            "seed mass {mass} vs closed form {expected}"
        );
    }
}
