//! Numerical toolkit for tame elliptic structures on 4-manifolds.
//!
//! * [`grassmann4`]: `Λ²R⁴`, the sphere-pair model of oriented 2-planes,
//!   tangent maps and transversality signs.
//! * [`elliptic_fiber`]: a fiber `a: S²₋ → S²₊`, its audit, the fixed-point
//!   partition of `R⁴ \ {0}`, the twisted complex structure and the retraction
//!   to a linear structure.
//! * [`elliptic_field`]: structures over an open set of C², chart germs and the
//!   deformed structure whose line space carries a non-linear dual.
//! * [`curve_solver`]: Picard iteration for `∂f/∂z̄ = h(z, f, ∂f/∂z)`.
//! * [`duality`]: the incidence pairing, dual ellipticity, pencil tangents and
//!   the non-linearity certificate.
//! * [`taming`]: Crofton pairings and taming audits.
//! * [`invariants`]: Plücker and genus arithmetic.

pub mod curve_solver;
pub mod duality;
pub mod elliptic_field;
pub mod elliptic_fiber;
pub mod error;
pub mod grassmann4;
pub mod invariants;
pub mod sampling;
pub mod schema;
pub mod taming;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
