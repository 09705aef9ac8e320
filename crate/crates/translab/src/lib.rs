//! Numerical laboratory for finitely generated discrete subgroups of `SL_d(R)`.
//!
//! The crate is organized around the singular-value (Cartan) projection of a
//! group element and the quantities built on top of it:
//!
//! * [`cartan`]: sum-zero Cartan vectors, simple roots, the projection onto a
//!   face of the dominant cone, Iwasawa cocycles, Busemann functions, and the
//!   symmetric-space distance.
//! * [`orbit`]: enumeration of orbit balls for a finite generator set, with
//!   deduplication and regularity diagnostics.
//! * [`growth`]: Poincare series, critical exponents, directional counting
//!   exponents, growth indicator grids, and limit-cone estimates.
//! * [`flags`]: partial flags, attractor flags, general-position margins, and
//!   shadow membership solved as a convex minimization over the dominant cone.
//! * [`conformal`]: finite atomic conformal-density approximants, shadow-mass
//!   diagnostics, Hopf coordinates, and entropy-drop experiments.
//! * [`typea`]: closed forms special to `SL_d(R)`: coweight vectors, projection
//!   formulas, growth upper bounds, and symmetric-power representations.
//! * [`fixtures`]: built-in generator sets used by tests and the CLI.
//!
//! Distances are measured with the Euclidean norm on logarithms of singular
//! values. This differs from a Killing-form normalization by a fixed scale
//! factor per dimension; all reported distances use the Euclidean convention.

pub mod cartan;
pub mod conformal;
pub mod error;
pub mod fixtures;
pub mod flags;
pub mod growth;
pub mod orbit;
pub mod typea;

pub use cartan::{CartanVector, GroupElement, LinearForm, ThetaSet};
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
