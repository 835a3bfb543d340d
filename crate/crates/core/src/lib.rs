//! Exact arithmetic for truncated Witt rings and their power-series
//! extensions, Newton polygons of semilinear Frobenius matrices, graded
//! Dieudonné modules with symmetric pairings and their one-parameter
//! deformations, Hilbert symbols and local quadratic forms, and octonion
//! derivation algebras.
//!
//! Everything is exact: Witt constants are vectors of integers mod p^N,
//! polygons are multisets of rationals, octonion linear algebra is over Q.

// Index loops mirror the matrix formulas throughout the linear algebra.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod deform;
pub mod dieudonne;
pub mod error;
pub mod fq;
pub mod isocrystal;
pub mod isogeny;
pub mod local;
pub mod matrix;
pub mod octonion;
pub mod ring;
pub mod scenario;

pub use error::{Error, Result};
pub use ring::{RingElem, RingSpec};
