//! Numerical laboratory for the fractional Fisher-KPP equation
//! `dn/dt + L^alpha n = n mu(x) - n^2` with a periodic stable-like kernel.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod domain;
pub mod eigen;
pub mod error;
pub mod evolution;
pub mod front;
pub mod operator;
pub mod quadrature;
pub mod scenario;
pub mod verification;

pub use error::{Error, Result};
