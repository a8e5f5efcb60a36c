//! TDOA source localization with NLOS mitigation.
//!
//! The toolkit estimates an unknown source position from time-difference-of-
//! arrival measurements whose underlying paths may carry positive
//! non-line-of-sight range biases. Instead of working on the TDOA metric
//! directly, the problem is rewritten in time-of-arrival form with the
//! unknown signal onset time as an extra variable, the residuals are scored
//! with a smoothed absolute-value loss for robustness, and the resulting
//! inequality/equality-constrained program is solved by integrating a
//! projection-type neural network as an ODE whose equilibria are KKT points.
//!
//! Module map:
//! - [`model`]: deployment geometry, measurement generation, noise/NLOS draws
//! - [`scenario`]: the two benchmark geometries (perimeter ring, random square)
//! - [`formulation`]: variable packing, objective, constraints, augmented
//!   Lagrangian and its closed-form gradient
//! - [`dynamics`]: the network right-hand side, Euler stepping, `solve`
//! - [`kkt`]: KKT residual reports and the projection-form equivalence check
//! - [`bench`]: Monte-Carlo harness, metrics, CRLB, grid oracle, CSV emission

pub mod bench;
pub mod dynamics;
mod error;
pub mod formulation;
pub mod kkt;
pub mod model;
pub mod scenario;

pub use error::Error;

/// Source onset time used by the shipped experiment presets (seconds).
pub const DEFAULT_ONSET_TIME: f64 = 0.1;

/// Propagation speed used by the shipped experiment presets (m/s).
pub const DEFAULT_PROPAGATION_SPEED: f64 = 1.0;

/// Result alias for fallible toolkit operations.
pub type Result<T> = std::result::Result<T, Error>;
