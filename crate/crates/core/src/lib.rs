//! Numerical laboratory for spike solutions of the plasma free-boundary
//! problem `-Δv = μ [v - 1]_+^p` in bounded domains of R^N, N >= 3, with
//! subcritical exponent `1 < p < N/(N-2)`.
//!
//! The crate builds the limiting spike profile and its quantized mass from a
//! radial shooting problem, evaluates Green/Robin kernels of model domains in
//! closed form, locates critical points of the Kirchhoff-Routh energy that
//! govern spike placement, certifies nonexistence of force-balanced multi-spike
//! configurations, and solves the full nonlinear PDE on a 3-D grid to compare
//! the computed spikes against the predicted profile, mass, and far field.

pub mod balance;
pub mod error;
pub mod greens;
pub mod kirchhoff;
pub mod model;
pub mod pde;
pub mod quad;
pub mod radial;
pub mod util;
pub mod verify;

pub use error::{ConsistencyError, DomainError, Error, NumericalError, Result};
pub use model::{recover_plasma_state, PlasmaState, ProblemConfig};
