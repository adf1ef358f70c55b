use thiserror::Error;

use crate::quadrature::QuadError;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    #[error("halfwidth must be positive, got {0}")]
    NonPositiveHalfwidth(f64),
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("kernel supports overlap: [{0}, {1}] and [{2}, {3}]")]
    OverlappingSupports(f64, f64, f64, f64),
    #[error("kernel `{0}` is not even")]
    NotEven(&'static str),
    #[error("kernel `{0}` is empty")]
    EmptyKernel(&'static str),
    #[error("kernel g must have zero integral, got {0:e}")]
    NonZeroMass(f64),
    #[error("kernel `{0}` is degenerate")]
    Degenerate(&'static str),
    #[error("moment system is singular for q = {0}")]
    SingularMomentSystem(usize),
    #[error("power exponent must exceed -1, got {0}")]
    ExponentTooSmall(f64),
    #[error("product of zero factors")]
    EmptyProduct,
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
