//! Expansions of the confluent Heun equation in incomplete Beta and Appell F1
//! functions.

pub mod numeric;
pub mod special;

pub use num_complex::Complex64;
pub use numeric::ComplexScalar;
pub mod poly;
pub mod heun;
pub mod frobenius;
pub mod expansions;
pub mod termination;
pub mod cli;
