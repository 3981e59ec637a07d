//! Thinning simulation of univariate and bivariate CARMA(p,q)-Hawkes
//! processes, with residual diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod model;
pub mod presets;
pub mod quad;
pub mod spectral;
pub mod thinning;

pub use model::{CarmaHawkes, ModelSpec, ProcessState, ValidationReport};
pub use spectral::{PolyCoeffs, SpectralData};
