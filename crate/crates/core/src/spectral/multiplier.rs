use num_complex::Complex64;

use super::field::SpectralField;
use crate::error::{Error, Result};

/// Fourier multipliers acting coefficientwise on [`SpectralField`]s.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSymbol {
    /// `|k|^r` for `k != 0`, identity on the mean.
    Dr(f64),
    /// `∂ₓ^j`, symbol `(ik)^j`.
    Derivative(u32),
    /// `-i sgn(k)`.
    Hilbert,
    /// Bona-Smith regularization `exp(-ε^{1/10} k²)`.
    Mollifier(f64),
    /// Explicit symbol table over `k = -K..=K`.
    Custom(Vec<Complex64>),
}

impl MultiplierSymbol {
    /// Symbol value at wavenumber `k`. `Custom` tables are indexed with offset `K`
    /// where `K = (len - 1) / 2`.
    pub fn symbol(&self, k: i64) -> Complex64 {
        match self {
            MultiplierSymbol::Dr(r) => {
                if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new((k.unsigned_abs() as f64).powf(*r), 0.0)
                }
            }
            MultiplierSymbol::Derivative(j) => derivative_symbol(k, *j),
            MultiplierSymbol::Hilbert => Complex64::new(0.0, -(k.signum() as f64)),
            MultiplierSymbol::Mollifier(eps) => {
                Complex64::new((-eps.powf(0.1) * (k * k) as f64).exp(), 0.0)
            }
            MultiplierSymbol::Custom(table) => {
                let half = (table.len() as i64 - 1) / 2;
                table[(k + half) as usize]
            }
        }
    }
}

/// `(ik)^j` evaluated without complex powers, which keeps the real or
/// imaginary part exactly zero.
pub fn derivative_symbol(k: i64, j: u32) -> Complex64 {
    let mag = (k as f64).powi(j as i32);
    match j % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

pub fn apply_multiplier(field: &SpectralField, m: &MultiplierSymbol) -> Result<SpectralField> {
    if let MultiplierSymbol::Custom(table) = m {
        if table.len() != field.grid().n_coeffs() {
            return Err(Error::dim(format!(
                "custom symbol has {} entries, grid needs {}",
                table.len(),
                field.grid().n_coeffs()
            )));
        }
    }
    Ok(field.map_coeffs(|k, c| c * m.symbol(k)))
}

/// `D^r u`.
pub fn dr(field: &SpectralField, r: f64) -> SpectralField {
    field.map_coeffs(|k, c| c * MultiplierSymbol::Dr(r).symbol(k))
}

/// `∂ₓ^j u`.
pub fn deriv(field: &SpectralField, j: u32) -> SpectralField {
    field.map_coeffs(|k, c| c * derivative_symbol(k, j))
}

pub fn hilbert(field: &SpectralField) -> SpectralField {
    field.map_coeffs(|k, c| c * MultiplierSymbol::Hilbert.symbol(k))
}

/// Bona-Smith regularized data `v₀^ε`.
pub fn mollify(field: &SpectralField, eps: f64) -> SpectralField {
    let a = eps.powf(0.1);
    field.map_coeffs(|k, c| c * (-a * (k * k) as f64).exp())
}
