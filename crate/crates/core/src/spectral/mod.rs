//! Fourier discretization of the torus and the multiplier calculus.

mod field;
mod grid;
mod multiplier;
mod norms;
mod trajectory;

pub use field::{to_physical, to_spectral, SpectralField};
pub use grid::PeriodicGrid;
pub use multiplier::{
    apply_multiplier, deriv, derivative_symbol, dr, hilbert, mollify, MultiplierSymbol,
};
pub use norms::{
    sobolev_norm, sobolev_norm_sq, trapezoid, unit_interval_norms, zst_norm, zst_norm_order,
};
pub use trajectory::Trajectory;
