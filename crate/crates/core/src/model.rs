//! Problem parameters and the scaling bookkeeping for the free-boundary model
//!
//! ```text
//! -Δv = mu [v - 1]_+^p   in Omega,   v = 0 on the boundary,
//! ```
//!
//! obtained from the physical pair (alpha, lambda) through
//! `v = (lambda/|alpha|) psi` and `mu = lambda |alpha|^{p-1}`, with the
//! normalization `|alpha|^p * ∫ [v-1]_+^p = 1`.

use crate::error::{ConsistencyError, DomainError, Result};
use serde::Serialize;

/// Dimension and exponent for the model, plus the derived geometric constants.
///
/// Serializes flat as `{"N": .., "p": ..}`; this blob is embedded in every
/// emitted report for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConfig {
    #[serde(rename = "N")]
    n: usize,
    p: f64,
}

impl ProblemConfig {
    /// Validates `N >= 3` and `p` inside the subcritical window `(1, N/(N-2))`.
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < 3 {
            return Err(DomainError::DimensionTooLow(n).into());
        }
        let p_critical = n as f64 / (n as f64 - 2.0);
        if !p.is_finite() || p <= 1.0 || p >= p_critical {
            return Err(DomainError::ExponentOutOfWindow { n, p, p_critical }.into());
        }
        Ok(Self { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Critical exponent `p_N = N/(N-2)` bounding the admissible window.
    pub fn p_critical(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 2.0)
    }

    /// Volume of the unit ball, `omega_N = pi^{N/2} / Gamma(N/2 + 1)`.
    pub fn unit_ball_volume(&self) -> f64 {
        unit_ball_volume(self.n)
    }

    /// Surface measure of the unit sphere, `|S^{N-1}| = N omega_N`.
    pub fn unit_sphere_area(&self) -> f64 {
        self.n as f64 * unit_ball_volume(self.n)
    }

    /// Normalization of the fundamental solution, `C_N = 1/(N(N-2) omega_N)`,
    /// so that `-Δ (C_N |x|^{2-N}) = delta_0`.
    pub fn green_constant(&self) -> f64 {
        1.0 / (self.n as f64 * (self.n as f64 - 2.0) * unit_ball_volume(self.n))
    }
}

/// `omega_N` via the half-integer Gamma recursion (exact at machine precision,
/// no libm gamma needed).
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    // Gamma(n/2 + 1): start from Gamma(1) = 1 or Gamma(3/2) = sqrt(pi)/2.
    let mut g;
    let mut x; // current argument of g = Gamma(x)
    if n % 2 == 0 {
        g = 1.0;
        x = 1.0;
    } else {
        g = 0.5 * PI.sqrt();
        x = 1.5;
    }
    let target = n as f64 / 2.0 + 1.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    PI.powf(n as f64 / 2.0) / g
}

/// Physical parameters recovered from a solved field.
///
/// Sign convention: `alpha <= 0`, so the plasma region is `{v > 1}` and
/// `[alpha + lambda psi]_+ = |alpha|[v-1]_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlasmaState {
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// Inverts the normalization: `|alpha| = massIntegral^{-1/p}`,
/// `lambda = mu |alpha|^{1-p}`, where `massIntegral = ∫ [v-1]_+^p`.
pub fn recover_plasma_state(
    config: &ProblemConfig,
    mu: f64,
    mass_integral: f64,
) -> Result<PlasmaState> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(DomainError::InvalidMu(mu).into());
    }
    if !mass_integral.is_finite() || mass_integral <= 0.0 {
        return Err(DomainError::InvalidMassIntegral(mass_integral).into());
    }
    let alpha_abs = mass_integral.powf(-1.0 / config.p());
    let lambda = mu * alpha_abs.powf(1.0 - config.p());
    let state = PlasmaState {
        alpha: -alpha_abs,
        lambda,
        mu,
    };
    validate_state(config, &state, mass_integral)?;
    Ok(state)
}

/// Checks the two state invariants: `mu = lambda |alpha|^{p-1}` (relative
/// 1e-12) and `|alpha|^p * massIntegral = 1` (1e-12).
pub fn validate_state(config: &ProblemConfig, state: &PlasmaState, mass_integral: f64) -> Result<()> {
    if state.alpha > 0.0 {
        return Err(DomainError::Invalid(format!(
            "alpha must be <= 0 by convention, got {}",
            state.alpha
        ))
        .into());
    }
    if !(state.lambda > 0.0) {
        return Err(DomainError::Invalid(format!("lambda must be > 0, got {}", state.lambda)).into());
    }
    let mu_rec = state.lambda * state.alpha.abs().powf(config.p() - 1.0);
    let gap = (mu_rec - state.mu).abs() / state.mu.abs().max(f64::MIN_POSITIVE);
    if gap > 1e-12 {
        return Err(ConsistencyError::ToleranceExceeded {
            name: "mu = lambda |alpha|^{p-1}",
            value: gap,
            tol: 1e-12,
        }
        .into());
    }
    let norm = state.alpha.abs().powf(config.p()) * mass_integral;
    if (norm - 1.0).abs() > 1e-12 {
        return Err(ConsistencyError::ToleranceExceeded {
            name: "|alpha|^p * massIntegral = 1",
            value: (norm - 1.0).abs(),
            tol: 1e-12,
        }
        .into());
    }
    Ok(())
}

/// The quantized mass functional `(lambda/|alpha|^{1 - p/p_N})^{N/2}`, which by
/// the scaling identities equals `mu^{N/2} * massIntegral` once the
/// normalization holds. Returned in the second form; `quantization_gap`
/// measures how far the first form deviates.
pub fn quantization_ratio(config: &ProblemConfig, mu: f64, mass_integral: f64) -> f64 {
    mu.powf(config.n() as f64 / 2.0) * mass_integral
}

/// Relative gap between `(lambda/|alpha|^{1-p/p_N})^{N/2}` evaluated from the
/// recovered state and `mu^{N/2} * massIntegral`. Algebraically zero; must
/// stay below 1e-10 in floating point.
pub fn quantization_gap(config: &ProblemConfig, mu: f64, mass_integral: f64) -> Result<f64> {
    let state = recover_plasma_state(config, mu, mass_integral)?;
    let expo = 1.0 - config.p() / config.p_critical();
    let lhs = (state.lambda / state.alpha.abs().powf(expo)).powf(config.n() as f64 / 2.0);
    let rhs = quantization_ratio(config, mu, mass_integral);
    Ok((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derived_constants_match_closed_forms() {
        use std::f64::consts::PI;
        let c32 = ProblemConfig::new(3, 2.0).unwrap();
        assert!((c32.p_critical() - 3.0).abs() < 1e-15);
        assert!((c32.unit_ball_volume() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((c32.green_constant() - 1.0 / (4.0 * PI)).abs() < 1e-16);

        let c415 = ProblemConfig::new(4, 1.5).unwrap();
        assert!((c415.p_critical() - 2.0).abs() < 1e-15);
        assert!((c415.unit_ball_volume() - PI * PI / 2.0).abs() < 1e-13);
        assert!((c415.green_constant() - 1.0 / (4.0 * PI * PI)).abs() < 1e-16);
    }

    #[test]
    fn window_rejections_name_the_window() {
        let err = ProblemConfig::new(3, 3.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(1, 3)"), "message should name the window: {msg}");
        assert!(ProblemConfig::new(3, 1.0).is_err());
        assert!(ProblemConfig::new(2, 1.5).is_err());
        assert!(ProblemConfig::new(3, f64::NAN).is_err());
        // dimension check takes precedence and mentions N >= 3
        let err = ProblemConfig::new(2, 1.5).unwrap_err().to_string();
        assert!(err.contains("N >= 3"), "{err}");
    }

    #[test]
    fn recover_state_roundtrip() {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        let state = recover_plasma_state(&config, 1.0e4, 40.7).unwrap();
        assert!(state.alpha < 0.0);
        assert!(state.lambda > 0.0);
        // |alpha|^p mass = 1
        assert!((state.alpha.abs().powf(2.0) * 40.7 - 1.0).abs() < 1e-12);
        // mu = lambda |alpha|^{p-1}
        assert!((state.lambda * state.alpha.abs() - 1.0e4).abs() / 1.0e4 < 1e-12);
    }

    #[test]
    fn zero_mu_rejected() {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        assert!(recover_plasma_state(&config, 0.0, 1.0).is_err());
        assert!(recover_plasma_state(&config, -1.0, 1.0).is_err());
        assert!(recover_plasma_state(&config, 1.0, 0.0).is_err());
    }

    #[test]
    fn config_serializes_flat() {
        let config = ProblemConfig::new(3, 2.0).unwrap();
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(json, r#"{"N":3,"p":2.0}"#);
    }

    proptest! {
        #[test]
        fn quantization_identity_holds(
            n in 3usize..6,
            frac in 0.05f64..0.95,
            mu in 1e-3f64..1e6,
            mass in 1e-3f64..1e3,
        ) {
            let p_critical = n as f64 / (n as f64 - 2.0);
            let p = 1.0 + frac * (p_critical - 1.0);
            prop_assume!(p > 1.0 + 1e-6 && p < p_critical - 1e-6);
            let config = ProblemConfig::new(n, p).unwrap();
            let gap = quantization_gap(&config, mu, mass).unwrap();
            prop_assert!(gap <= 1e-10, "gap = {gap:.3e}");
        }
    }
}
