//! Numerical building blocks for multilinear averaging operators over
//! curved surfaces: periodic grid functions with Lebesgue/weak-Lebesgue
//! norms, FFT-based dyadic frequency projections, surface-measure
//! quadratures with Fourier-decay diagnostics, the averaging operators and
//! their lacunary maximal variants, dyadic Calderon-Zygmund decomposition,
//! and exact rational verification of Brascamp-Lieb data and exponent
//! regions.

pub mod bl;
pub mod czd;
pub mod exact;
pub mod fft;
pub mod freq;
pub mod grid;
pub mod interp;
pub mod mlavg;
pub mod surface;
pub mod util;

mod error;

pub use error::{Error, Result};
pub use num_complex::Complex64;
