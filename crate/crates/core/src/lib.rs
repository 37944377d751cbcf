//! Numerical toolkit for fractional Leibniz rules on periodic grids.

// parameter guards are written `!(x >= a)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod bilinear;
pub mod cone;
pub mod dump;
pub mod empirical;
pub mod family;
pub mod field;
pub mod grid;
pub mod harness;
pub mod leibniz;
pub mod lp;
pub mod maximal;
pub mod spectral;
pub mod symbol;

pub use error::{Error, Result};
pub use field::{RealField, SpectralField};
pub use grid::{GridSpec, MultiIndex};
pub use lp::LpFamily;
