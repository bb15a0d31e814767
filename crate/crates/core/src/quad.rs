//! Gauss-Legendre quadrature and the product rule on spheres in ℝ³.

use crate::error::{DomainError, Result};

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1],
/// exact for polynomials of degree ≤ 2·order - 1. Nodes are found by Newton
/// iteration on the Legendre recurrence from the Chebyshev-based initial
/// guess; symmetric pairs are generated together so the rule is exactly
/// symmetric in floating point.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(2..=256).contains(&order) {
        return Err(DomainError::QuadratureOrderUnsupported(order).into());
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th positive root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_with_deriv(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule for surface integrals over the sphere `∂B_r(center)` in
/// ℝ³: Gauss-Legendre in cos(polar angle) × uniform azimuth. `order` polar
/// nodes and `2·order` azimuthal nodes; weights include the r² area factor,
/// so `Σ w_i f(x_i) ≈ ∮ f dσ`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub points: Vec<[f64; 3]>,
    /// outward unit normals at the corresponding points
    pub normals: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub radius: f64,
}

pub fn sphere_rule(center: &[f64; 3], r: f64, order: usize) -> Result<SphereRule> {
    if !r.is_finite() || r <= 0.0 {
        return Err(DomainError::Invalid(format!("sphere radius {r} must be positive")).into());
    }
    let (cos_nodes, cos_weights) = gauss_legendre(order)?;
    let m = 2 * order;
    let dphi = 2.0 * std::f64::consts::PI / m as f64;
    let mut points = Vec::with_capacity(order * m);
    let mut normals = Vec::with_capacity(order * m);
    let mut weights = Vec::with_capacity(order * m);
    for (ct, wt) in cos_nodes.iter().zip(&cos_weights) {
        let st = (1.0 - ct * ct).sqrt();
        for j in 0..m {
            let phi = dphi * (j as f64 + 0.5);
            let nrm = [st * phi.cos(), st * phi.sin(), *ct];
            points.push([
                center[0] + r * nrm[0],
                center[1] + r * nrm[1],
                center[2] + r * nrm[2],
            ]);
            normals.push(nrm);
            weights.push(wt * dphi * r * r);
        }
    }
    Ok(SphereRule {
        points,
        normals,
        weights,
        radius: r,
    })
}

impl SphereRule {
    /// `∮ f dσ` for a scalar integrand sampled at the rule's points.
    pub fn integrate(&self, mut f: impl FnMut(&[f64; 3], &[f64; 3]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.normals)
            .zip(&self.weights)
            .map(|((p, nrm), w)| w * f(p, nrm))
            .sum()
    }

    /// `∮ F dσ` for a vector integrand.
    pub fn integrate_vec(
        &self,
        mut f: impl FnMut(&[f64; 3], &[f64; 3]) -> [f64; 3],
    ) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for ((p, nrm), w) in self.points.iter().zip(&self.normals).zip(&self.weights) {
            let v = f(p, nrm);
            for c in 0..3 {
                acc[c] += w * v[c];
            }
        }
        acc
    }
}
