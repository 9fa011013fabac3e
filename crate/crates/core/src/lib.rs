//! Numerical toolkit for regular BMO spaces over finite atomic measures of
//! polynomial growth, truncated Calderón–Zygmund operators acting on them,
//! and certificates for the `T1` condition characterizing boundedness.

pub mod coefficients;
pub mod error;
pub mod geometry;
mod lp;
pub mod measures;
pub mod operators;
pub mod rbmo;
pub mod t1;
pub mod testfn;

pub use error::{Error, Result};
