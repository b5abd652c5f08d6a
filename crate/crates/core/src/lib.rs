//! Nonclassicality and genuine non-Gaussianity tests from a single quadrature
//! marginal of a bosonic mode.
//!
//! A measured marginal `M(x)` (or its Fourier dual, the characteristic
//! function cut `C(k)`) is promoted to a factorized fictitious Wigner function,
//! either `M(x)M(y)` (DM1) or `M(x)M_vac(y)` (DM2). The corresponding operator
//! fails to be positive only for nonclassical inputs, and its trace-norm
//! negativity is a quantitative witness.
//!
//! Conventions: `x̂ = (â + â†)/2`, `p̂ = (â - â†)/(2i)`, vacuum variance 1/4,
//! `x̂_θ = x̂ cos θ + p̂ sin θ`.

pub mod criteria;
pub mod data_pipeline;
pub mod demarg_maps;
pub mod entanglement;
pub mod error;
pub mod fock_core;
pub mod gaussian_bounds;
pub mod phasespace;
pub mod quadrature;
pub mod special;

pub use error::{DemargError, Result};
pub use nalgebra::Complex;

/// Complex double.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
