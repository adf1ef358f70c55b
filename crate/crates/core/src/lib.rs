#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod association;
pub mod error;
pub mod expr;
pub mod mollifier;
pub mod quadrature;
pub mod real;
pub mod reference;
pub mod representatives;
pub mod testfn;

pub use error::{Error, Result};
pub use real::{Dd, Real};
