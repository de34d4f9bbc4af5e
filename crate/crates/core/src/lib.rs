//! Exact-arithmetic formal-calculus engine for q-deformed toroidal and
//! vertex-algebra structure functions.
//!
//! Everything is computed over Q(p^(1/2), l) with hbar-Laurent truncation;
//! every verification suite reports residuals that must vanish exactly up to
//! the declared truncation, never approximately.

pub mod error;
pub mod scalar;
pub mod series;

pub use error::{CalcError, Result};
