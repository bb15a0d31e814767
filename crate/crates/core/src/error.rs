//! Error taxonomy: rejected inputs, failed iterations, and violated contracts
//! are distinct types so callers can match on the failure class.

use thiserror::Error;

/// Inputs outside the admissible parameter or geometry range.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("dimension N={0} rejected: the subcritical window (1, N/(N-2)) needs N >= 3")]
    DimensionTooLow(usize),
    #[error("exponent p={p} outside the admissible window (1, {p_critical}) for N={n}")]
    ExponentOutOfWindow { n: usize, p: f64, p_critical: f64 },
    #[error("mu must be positive and finite, got {0}")]
    InvalidMu(f64),
    #[error("mass integral must be positive and finite, got {0}")]
    InvalidMassIntegral(f64),
    #[error("point has dimension {got}, kernel expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point lies outside the open domain (|x|={0:.6} for the unit ball, or x_N >= 0 for the half-space)")]
    PointOutsideDomain(f64),
    #[error("points coincide (separation {0:.3e} < 1e-10); the kernel is singular there and is never regularized")]
    CoincidentPoints(f64),
    #[error("invalid rescaling: scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("configuration needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("weights must be nonzero and finite (weight[{index}] = {value})")]
    InvalidWeight { index: usize, value: f64 },
    #[error("duplicate points in configuration (separation {0:.3e})")]
    DuplicatePoints(f64),
    #[error("boundary-mode points need x_N <= -1, got x_N = {0}")]
    PointAboveSlab(f64),
    #[error("grid resolution {0} unsupported: use one of 65, 97, 129, 193")]
    BadResolution(usize),
    #[error(
        "spike at mu={mu:.3e} unresolvable on resolution {res}: eps*R0 = {eps_r0:.4e} < 3h = {three_h:.4e}; \
         largest seedable mu on this grid is {mu_max:.4e}"
    )]
    UnresolvableSpike {
        mu: f64,
        res: usize,
        eps_r0: f64,
        three_h: f64,
        mu_max: f64,
    },
    #[error("continuation requires a strictly increasing mu sequence ({prev:.4e} -> {next:.4e})")]
    NonIncreasingMu { prev: f64, next: f64 },
    #[error("quadrature order {0} unsupported (use 4..=256)")]
    QuadratureOrderUnsupported(usize),
    #[error("{0}")]
    Invalid(String),
}

/// Iterations that failed to produce a usable result.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericalError {
    #[error("shooting bracket failed: u(1; a) has no sign change on [{lo:.3e}, {hi:.3e}]")]
    BracketFailed { lo: f64, hi: f64 },
    #[error("Newton iteration diverged after {iterations} steps (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("line search stalled at step {step:.3e} (residual {residual:.3e})")]
    LineSearchStalled { step: f64, residual: f64 },
    #[error("linear solve broke down: {0}")]
    LinearSolveBreakdown(String),
    #[error("singular system in dense solve (pivot {0:.3e})")]
    SingularSystem(f64),
}

/// Produced results that violate a stated contract beyond tolerance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsistencyError {
    #[error("{name} = {value:.6e} violates tolerance {tol:.3e}")]
    ToleranceExceeded {
        name: &'static str,
        value: f64,
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

pub type Result<T> = std::result::Result<T, Error>;
