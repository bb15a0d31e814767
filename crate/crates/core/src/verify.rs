//! Quantitative checks of the asymptotic structure of solved fields: the
//! far-field Green-sum expansion, local spike profile agreement, mass
//! quantization, and the Pohozaev surface integral on small spheres.

use serde::Serialize;

use crate::error::{DomainError, Result};
use crate::greens::DomainKernel;
use crate::pde::spikes::SpikeReport;
use crate::pde::GridField;
use crate::quad::sphere_rule;
use crate::radial::RadialProfile;

/// A scalar field on ℝ³ with a gradient: the common interface for surface
/// integrals over analytic Green sums and over solved grid fields.
pub trait Field3 {
    fn value(&self, x: &[f64; 3]) -> f64;
    fn grad(&self, x: &[f64; 3]) -> [f64; 3];
}

/// `strength · C₃ Σᵢ sᵢ |x − zᵢ|⁻¹` with analytic gradients: a signed sum of
/// free-space fundamental solutions, the building block for Green sums (a
/// half-space Green function is a pole plus its reflection with `s = -1`).
#[derive(Debug, Clone)]
pub struct FreeSpaceSum {
    strength: f64,
    poles: Vec<([f64; 3], f64)>,
}

/// `C_N` for N = 3: the fundamental solution is `C₃ / |x|`.
pub const C3: f64 = 1.0 / (4.0 * std::f64::consts::PI);

impl FreeSpaceSum {
    pub fn new(strength: f64, poles: Vec<([f64; 3], f64)>) -> Result<Self> {
        if poles.is_empty() {
            return Err(DomainError::Invalid("no poles".into()).into());
        }
        for (z, s) in &poles {
            if !z.iter().all(|c| c.is_finite()) || !s.is_finite() {
                return Err(DomainError::Invalid(format!("non-finite pole {z:?} weight {s}")).into());
            }
        }
        if !strength.is_finite() {
            return Err(DomainError::Invalid(format!("non-finite strength {strength}")).into());
        }
        Ok(Self { strength, poles })
    }
}

impl Field3 for FreeSpaceSum {
    fn value(&self, x: &[f64; 3]) -> f64 {
        let mut acc = 0.0;
        for (z, s) in &self.poles {
            let d = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + (x[2] - z[2]).powi(2)).sqrt();
            acc += s / d;
        }
        self.strength * C3 * acc
    }

    fn grad(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (z, s) in &self.poles {
            let dx = [x[0] - z[0], x[1] - z[1], x[2] - z[2]];
            let d2 = dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2];
            let scale = -s / (d2 * d2.sqrt());
            for c in 0..3 {
                acc[c] += scale * dx[c];
            }
        }
        for c in &mut acc {
            *c *= self.strength * C3;
        }
        acc
    }
}

/// Trilinear sampler over a solved field. Values interpolate the eight cell
/// corners (exterior nodes hold exact zeros, consistent with the solver);
/// gradients are central differences of the interpolant with step `h`.
pub struct GridSampler<'a> {
    field: &'a GridField,
}

impl<'a> GridSampler<'a> {
    pub fn new(field: &'a GridField) -> Self {
        Self { field }
    }
}

impl Field3 for GridSampler<'_> {
    fn value(&self, x: &[f64; 3]) -> f64 {
        let grid = &self.field.grid;
        let res = grid.res();
        let h = grid.h();
        let mut i = [0usize; 3];
        let mut t = [0.0f64; 3];
        for c in 0..3 {
            let u = (x[c] + 1.0) / h;
            let lo = (u.floor() as isize).clamp(0, res as isize - 2) as usize;
            i[c] = lo;
            t[c] = (u - lo as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for dx in 0..2 {
            for dy in 0..2 {
                for dz in 0..2 {
                    let w = (if dx == 0 { 1.0 - t[0] } else { t[0] })
                        * (if dy == 0 { 1.0 - t[1] } else { t[1] })
                        * (if dz == 0 { 1.0 - t[2] } else { t[2] });
                    acc += w * self.field.values[grid.idx(i[0] + dx, i[1] + dy, i[2] + dz)];
                }
            }
        }
        acc
    }

    fn grad(&self, x: &[f64; 3]) -> [f64; 3] {
        let h = self.field.grid.h();
        let mut g = [0.0; 3];
        for c in 0..3 {
            let mut hi = *x;
            let mut lo = *x;
            hi[c] += h;
            lo[c] -= h;
            g[c] = (self.value(&hi) - self.value(&lo)) / (2.0 * h);
        }
        g
    }
}

/// `∮_{∂B_r(center)} [-(∂_ν u)∇u + ½|∇u|²ν] dσ` by the product Gauss-Legendre
/// sphere rule. Around an isolated pole of a Green sum this tends, as r → 0,
/// to `M²C₃²(N-2)|S²| ∇F(center)` with F the regular part at that pole; the
/// pure-singularity contribution integrates to zero by symmetry.
pub fn pohozaev_surface<F: Field3 + ?Sized>(
    field: &F,
    center: &[f64; 3],
    r: f64,
    order: usize,
) -> Result<[f64; 3]> {
    if !(16..=64).contains(&order) {
        return Err(DomainError::QuadratureOrderUnsupported(order).into());
    }
    let rule = sphere_rule(center, r, order)?;
    Ok(rule.integrate_vec(|p, nu| {
        let g = field.grad(p);
        let gn = g[0] * nu[0] + g[1] * nu[1] + g[2] * nu[2];
        let half = 0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        [
            -gn * g[0] + half * nu[0],
            -gn * g[1] + half * nu[1],
            -gn * g[2] + half * nu[2],
        ]
    }))
}

/// Far-field comparison over the grid region outside every exclusion ball.
#[derive(Debug, Clone, Serialize)]
pub struct RemainderReport {
    /// exclusion radius around each spike center
    pub r: f64,
    /// outer extent of the region (the domain radius)
    pub outer: f64,
    /// sup of `|ε^{2-N} v - Σᵢ M G(x, zᵢ)|` over the region's nodes
    pub sup_remainder: f64,
    /// sup of the gradient analogue (grid gradients by differences)
    pub sup_grad_remainder: f64,
    /// sup of the leading Green sum itself, the scale remainders compare to
    pub leading_scale: f64,
}

/// Compare the rescaled solved field `ε^{2-N} v` against the leading Green
/// sum `Σᵢ M_{p,0} G(x, zᵢ)` on all interior nodes farther than `r` from
/// every detected center. Grid gradients use central differences, falling
/// back to one-sided next to the exclusion balls and the domain boundary.
pub fn farfield_remainder(
    field: &GridField,
    report: &SpikeReport,
    profile: &RadialProfile,
    kernel: &DomainKernel,
    r: f64,
) -> Result<RemainderReport> {
    let grid = &field.grid;
    let eps = field.epsilon();
    let core = 2.0 * eps * profile.r0;
    let floor = core.max(3.0 * grid.h());
    if !(r > floor) {
        return Err(DomainError::Invalid(format!(
            "far-field radius {r} must exceed max(2εR₀, 3h) = {floor}"
        ))
        .into());
    }
    if report.centers.is_empty() {
        return Err(DomainError::Invalid("no spike centers to expand around".into()).into());
    }
    let mass = profile.mass;
    let n = profile.config().n() as i32;
    let epow = eps.powi(2 - n);
    let res = grid.res();

    let included = |gi: usize| -> bool {
        if !grid.interior()[gi] {
            return false;
        }
        let x = grid.node(gi);
        report.centers.iter().all(|z| {
            let d2 = (x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + (x[2] - z[2]).powi(2);
            d2 > r * r
        })
    };

    let lead_at = |x: &[f64; 3]| -> Result<f64> {
        let mut acc = 0.0;
        for z in &report.centers {
            acc += mass * kernel.green(x, z)?;
        }
        Ok(acc)
    };

    let mut sup_remainder = 0.0f64;
    let mut sup_grad = 0.0f64;
    let mut leading_scale = 0.0f64;
    let stride = [res * res, res, 1];
    for gi in 0..grid.len() {
        if !included(gi) {
            continue;
        }
        let x = grid.node(gi);
        let lead = lead_at(&x)?;
        leading_scale = leading_scale.max(lead.abs());
        sup_remainder = sup_remainder.max((epow * field.values[gi] - lead).abs());

        let mut grad_lead = [0.0; 3];
        for z in &report.centers {
            let g = kernel.green_grad_x(&x, z)?;
            for c in 0..3 {
                grad_lead[c] += mass * g[c];
            }
        }
        let mut diff2 = 0.0;
        let mut full_stencil = true;
        for c in 0..3 {
            let up = gi + stride[c];
            let down = gi.wrapping_sub(stride[c]);
            let up_ok = up < grid.len() && included(up);
            let down_ok = down < grid.len() && included(down);
            let dv = if up_ok && down_ok {
                (field.values[up] - field.values[down]) / (2.0 * grid.h())
            } else if up_ok {
                (field.values[up] - field.values[gi]) / grid.h()
            } else if down_ok {
                (field.values[gi] - field.values[down]) / grid.h()
            } else {
                full_stencil = false;
                0.0
            };
            if full_stencil {
                let d = epow * dv - grad_lead[c];
                diff2 += d * d;
            }
        }
        if full_stencil {
            sup_grad = sup_grad.max(diff2.sqrt());
        }
    }
    Ok(RemainderReport {
        r,
        outer: 1.0,
        sup_remainder,
        sup_grad_remainder: sup_grad,
        leading_scale,
    })
}

/// Sup over `|y| ≤ R` of `|v(center + εy) - w₀(|y|)|`, evaluated at the grid
/// nodes inside the ε-ball (plus the center itself, trilinearly interpolated
/// when it sits off-node). Node sampling keeps the spike core's own O(h²/ε²)
/// interpolation error out of the metric.
pub fn local_profile_error(
    field: &GridField,
    center: &[f64; 3],
    profile: &RadialProfile,
    big_r: f64,
) -> Result<f64> {
    let grid = &field.grid;
    let eps = field.epsilon();
    let window = eps * big_r;
    let three_h = 3.0 * grid.h();
    if !(window >= three_h) {
        return Err(DomainError::Invalid(format!(
            "profile window εR = {window} is below the resolvable scale 3h = {three_h}"
        ))
        .into());
    }
    let sampler = GridSampler::new(field);
    let mut sup = (sampler.value(center) - profile.w0_center()).abs();
    for gi in 0..grid.len() {
        if !grid.interior()[gi] {
            continue;
        }
        let x = grid.node(gi);
        let d = ((x[0] - center[0]).powi(2)
            + (x[1] - center[1]).powi(2)
            + (x[2] - center[2]).powi(2))
        .sqrt();
        if d <= window {
            sup = sup.max((field.values[gi] - profile.w0(d / eps)).abs());
        }
    }
    Ok(sup)
}

/// Measured nonlinear mass `μ^{N/2} ∫ [v-1]₊ᵖ` against the quantized value
/// `Z · M_{p,0}` with Z the number of detected centers.
pub fn mass_quantization_check(
    field: &GridField,
    report: &SpikeReport,
    profile: &RadialProfile,
) -> (f64, f64, usize) {
    let z = report.centers.len();
    let measured = field.mass(profile.config().p());
    (measured, z as f64 * profile.mass, z)
}
