//! Exact coefficient arithmetic: rational functions in p and l, and
//! hbar-Laurent series truncated at a configurable order.

pub mod hscalar;
pub mod poly;
pub mod ratfunc;

pub use hscalar::HScalar;
pub use poly::Poly;
pub use ratfunc::ParamRat;
