//! Spike detection on solved fields: local maxima above the detection
//! threshold, plasma components of `{v > 1}` by flood fill, and the discrete
//! mass `μ^{3/2}∫[v-1]₊ᵖ`.

use serde::Serialize;

use crate::error::{ConsistencyError, DomainError, Result};
use crate::model::ProblemConfig;
use crate::pde::GridField;
use crate::radial::RadialProfile;

#[derive(Debug, Clone, Serialize)]
pub struct PlasmaComponent {
    pub node_count: usize,
    /// index into `centers` of the nearest detected maximum
    pub center_index: usize,
    /// free-boundary radius: farthest linear crossing of `v = 1` along grid
    /// edges leaving the component (never less than the farthest node)
    pub bounding_radius: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpikeReport {
    pub centers: Vec<[f64; 3]>,
    pub heights: Vec<f64>,
    pub components: Vec<PlasmaComponent>,
    /// total `μ^{3/2} Σ [v-1]₊ᵖ · cell volume`
    pub mass: f64,
    pub sigma: f64,
}

/// Detect spikes: local maxima over the 27-node neighborhood with value
/// `> 1 + σ`, refined per axis by the quadratic through the three nodes.
/// Components of `{v > 1}` (6-connected flood fill) are attached to their
/// nearest center; each must fit in a ball of radius `2εR₀` (plus one cell)
/// around it, otherwise the report is rejected as inconsistent.
pub fn extract_spikes(
    field: &GridField,
    config: &ProblemConfig,
    profile: &RadialProfile,
    sigma: f64,
) -> Result<SpikeReport> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(DomainError::Invalid(format!("sigma {sigma} must be positive")).into());
    }
    let grid = &field.grid;
    let res = grid.res();
    let v = &field.values;
    let threshold = 1.0 + sigma;

    let mut centers: Vec<[f64; 3]> = Vec::new();
    let mut heights: Vec<f64> = Vec::new();
    for ix in 1..res - 1 {
        for iy in 1..res - 1 {
            for iz in 1..res - 1 {
                let gi = grid.idx(ix, iy, iz);
                let vi = v[gi];
                if vi <= threshold || !grid.interior()[gi] {
                    continue;
                }
                let mut is_max = true;
                'scan: for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dz in -1i64..=1 {
                            if dx == 0 && dy == 0 && dz == 0 {
                                continue;
                            }
                            let nb = grid.idx(
                                (ix as i64 + dx) as usize,
                                (iy as i64 + dy) as usize,
                                (iz as i64 + dz) as usize,
                            );
                            if v[nb] >= vi {
                                is_max = false;
                                break 'scan;
                            }
                        }
                    }
                }
                if !is_max {
                    continue;
                }
                // per-axis quadratic refinement of position and height
                let node = grid.node(gi);
                let mut center = node;
                let mut height = vi;
                for (dim, stride) in [(0usize, res * res), (1, res), (2, 1)] {
                    let lo = v[gi - stride];
                    let hi = v[gi + stride];
                    let curv = lo - 2.0 * vi + hi;
                    if curv < 0.0 {
                        let delta = (0.5 * (lo - hi) / curv).clamp(-0.5, 0.5);
                        center[dim] = node[dim] + delta * grid.h();
                        height += -(lo - hi) * (lo - hi) / (8.0 * curv);
                    }
                }
                centers.push(center);
                heights.push(height);
            }
        }
    }

    // plasma components of {v > 1} by flood fill (6-connectivity)
    let mut visited = vec![false; grid.len()];
    let mut components = Vec::new();
    let mut total_mass_unscaled = 0.0;
    let p = config.p();
    for start in 0..grid.len() {
        if visited[start] || v[start] <= 1.0 || !grid.interior()[start] {
            continue;
        }
        let mut stack = vec![start];
        visited[start] = true;
        let mut nodes = Vec::new();
        while let Some(gi) = stack.pop() {
            nodes.push(gi);
            let iz = gi % res;
            let iy = (gi / res) % res;
            let ix = gi / (res * res);
            let mut push = |ni: usize| {
                if !visited[ni] && v[ni] > 1.0 && field.grid.interior()[ni] {
                    visited[ni] = true;
                    stack.push(ni);
                }
            };
            if ix > 0 {
                push(gi - res * res);
            }
            if ix + 1 < res {
                push(gi + res * res);
            }
            if iy > 0 {
                push(gi - res);
            }
            if iy + 1 < res {
                push(gi + res);
            }
            if iz > 0 {
                push(gi - 1);
            }
            if iz + 1 < res {
                push(gi + 1);
            }
        }

        if centers.is_empty() {
            return Err(ConsistencyError::ToleranceExceeded {
                name: "plasma component without a detected center",
                value: nodes.len() as f64,
                tol: 0.0,
            }
            .into());
        }
        // attach to the nearest center by the component's own maximum
        let peak = *nodes
            .iter()
            .max_by(|&&a, &&b| v[a].partial_cmp(&v[b]).unwrap())
            .unwrap();
        let px = grid.node(peak);
        let center_index = (0..centers.len())
            .min_by(|&a, &b| {
                d2(&centers[a], &px).partial_cmp(&d2(&centers[b], &px)).unwrap()
            })
            .unwrap();
        let c = centers[center_index];
        let mut radius = 0.0f64;
        let mut mass = 0.0;
        for &gi in &nodes {
            let x = grid.node(gi);
            radius = radius.max(d2(&c, &x).sqrt());
            mass += (v[gi] - 1.0).powf(p) * grid.cell_volume(gi);
            // extend to the v = 1 crossing on each edge that exits {v > 1};
            // interior nodes sit at least one cell inside the lattice, so the
            // six neighbor indices are always in bounds
            for (dim, stride) in [(0usize, res * res), (1, res), (2, 1)] {
                for (nb, sign) in [(gi - stride, -1.0), (gi + stride, 1.0)] {
                    if v[nb] > 1.0 && grid.interior()[nb] {
                        continue;
                    }
                    let t = (v[gi] - 1.0) / (v[gi] - v[nb].min(1.0));
                    let mut xc = x;
                    xc[dim] += sign * t * grid.h();
                    radius = radius.max(d2(&c, &xc).sqrt());
                }
            }
        }
        total_mass_unscaled += mass;
        components.push(PlasmaComponent {
            node_count: nodes.len(),
            center_index,
            bounding_radius: radius,
            mass: field.mu.powf(1.5) * mass,
        });
    }

    let eps = field.epsilon();
    let limit = 2.0 * eps * profile.r0 + grid.h();
    for comp in &components {
        if comp.bounding_radius > limit {
            return Err(ConsistencyError::ToleranceExceeded {
                name: "plasma component containment",
                value: comp.bounding_radius,
                tol: limit,
            }
            .into());
        }
    }

    Ok(SpikeReport {
        centers,
        heights,
        components,
        mass: field.mu.powf(1.5) * total_mass_unscaled,
        sigma,
    })
}

fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::solve::{solve_semilinear, SolveOutcome};
    use crate::pde::{build_grid, seed_spike};
    use crate::radial::shoot;

    fn solved_field() -> (ProblemConfig, RadialProfile, GridField) {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        let profile = shoot(&config, 1e-6).unwrap();
        let grid = build_grid(65).unwrap();
        let seed = seed_spike(&grid, [0.0; 3], &profile, 600.0).unwrap();
        match solve_semilinear(&seed, &config, 1e-10, 60).unwrap() {
            SolveOutcome::Converged(f) => (config, profile, f),
            other => panic!("setup failed: {other:?}"),
        }
    }

    #[test]
    fn trivial_field_gives_empty_report() {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        let profile = shoot(&config, 1e-6).unwrap();
        let grid = build_grid(65).unwrap();
        let zero = GridField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            mu: 600.0,
        };
        let report = extract_spikes(&zero, &config, &profile, 0.1).unwrap();
        assert!(report.centers.is_empty());
        assert!(report.components.is_empty());
        assert_eq!(report.mass, 0.0);
    }

    #[test]
    fn single_spike_detected_with_radius_and_mass() {
        let (config, profile, field) = solved_field();
        let report = extract_spikes(&field, &config, &profile, 0.1).unwrap();
        assert_eq!(report.centers.len(), 1, "centers: {:?}", report.centers);
        assert_eq!(report.components.len(), 1);
        let c = report.centers[0];
        assert!(d2(&c, &[0.0; 3]).sqrt() < field.grid.h(), "center {c:?}");
        assert!(report.heights[0] > 1.1);

        // plasma radius within one cell of the continuum prediction eps*R0
        let predicted = field.epsilon() * profile.r0;
        let got = report.components[0].bounding_radius;
        assert!(
            (got - predicted).abs() <= field.grid.h(),
            "radius {got} vs eps*R0 = {predicted}"
        );

        // mass within 10% of the quantized closed form
        assert!(
            (report.mass - profile.mass).abs() <= 0.1 * profile.mass,
            "mass {} vs {}",
            report.mass,
            profile.mass
        );
    }

    #[test]
    fn raising_sigma_never_adds_centers() {
        let (config, profile, field) = solved_field();
        let mut last = usize::MAX;
        for sigma in [0.05, 0.1, 0.5, 1.0, 2.0] {
            let report = extract_spikes(&field, &config, &profile, sigma).unwrap();
            assert!(report.centers.len() <= last);
            last = report.centers.len();
        }
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let (config, profile, field) = solved_field();
        assert!(extract_spikes(&field, &config, &profile, 0.0).is_err());
        assert!(extract_spikes(&field, &config, &profile, -1.0).is_err());
    }
}
