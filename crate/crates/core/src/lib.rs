//! Exact computation in the super Virasoro algebras `SVir[0]`, `SVir[1/2]`
//! and their centerless quotients.
//!
//! The crate covers the superbracket and its identity checks, exact linear
//! algebra over the Gaussian rationals, local derivation analysis through
//! image intersections of ad-operators, and decision procedures for local
//! and 2-local automorphisms over finite probe sets.

pub mod algebra;
pub mod automorphisms;
pub mod derivations;
pub mod job;
pub mod linalg;
pub mod parallel;
pub mod scalar;
pub mod text;
pub mod verify;

pub use algebra::{AlgebraConfig, BasisSymbol, Element, Epsilon, Kind, Parity};
pub use parallel::Strategy;
pub use scalar::Scalar;
