use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

/// Truncated Fourier discretization of the torus `[0, 2π)`.
///
/// Retained wavenumbers are `k = -K..=K`. Fields are sampled on `n_points`
/// equispaced collocation points; products are formed on a padded grid of
/// `padded_points >= 4K + 2` points so that quadratic and cubic products of
/// retained modes are alias-free after truncation back to `|k| <= K`.
#[derive(Clone)]
pub struct PeriodicGrid {
    n_modes: usize,
    n_points: usize,
    padded_points: usize,
    plans: Arc<Plans>,
    padded_plans: Arc<Plans>,
}

impl PeriodicGrid {
    pub const LENGTH: f64 = 2.0 * PI;

    /// Grid with the default collocation count: `2(2K+1)` rounded up to a power of two.
    pub fn new(n_modes: usize) -> Result<Self> {
        Self::with_points(n_modes, Self::default_points(n_modes))
    }

    pub fn default_points(n_modes: usize) -> usize {
        (2 * (2 * n_modes + 1)).next_power_of_two()
    }

    pub fn with_points(n_modes: usize, n_points: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::domain("n_modes must be positive"));
        }
        if n_points < 2 * n_modes + 1 {
            return Err(Error::domain(format!(
                "n_points = {n_points} must be at least 2*n_modes+1 = {}",
                2 * n_modes + 1
            )));
        }
        let minimum_padded = 4 * n_modes + 2;
        let padded_points = if n_points >= minimum_padded {
            n_points
        } else {
            minimum_padded.next_power_of_two()
        };
        let plans = Arc::new(Plans::new(n_points));
        let padded_plans = if padded_points == n_points {
            plans.clone()
        } else {
            Arc::new(Plans::new(padded_points))
        };
        Ok(PeriodicGrid {
            n_modes,
            n_points,
            padded_points,
            plans,
            padded_plans,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn padded_points(&self) -> usize {
        self.padded_points
    }

    /// Number of stored coefficients, `2K + 1`.
    pub fn n_coeffs(&self) -> usize {
        2 * self.n_modes + 1
    }

    /// Dimension of the mean-zero subspace, `2K`.
    pub fn mean_zero_dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn point(&self, j: usize) -> f64 {
        Self::LENGTH * j as f64 / self.n_points as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.point(j)).collect()
    }

    pub fn padded_grid_points(&self) -> Vec<f64> {
        let n = self.padded_points as f64;
        (0..self.padded_points)
            .map(|j| Self::LENGTH * j as f64 / n)
            .collect()
    }

    /// Retained wavenumbers in storage order, `-K..=K`.
    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> {
        let k = self.n_modes as i64;
        -k..=k
    }

    /// Storage index of wavenumber `k`.
    #[inline]
    pub fn index(&self, k: i64) -> usize {
        debug_assert!(k.unsigned_abs() as usize <= self.n_modes);
        (k + self.n_modes as i64) as usize
    }

    /// Wavenumber of mean-zero basis slot `i` (ordering `-K..=-1, 1..=K`).
    #[inline]
    pub fn mean_zero_wavenumber(&self, i: usize) -> i64 {
        let k = self.n_modes as i64;
        if (i as i64) < k {
            i as i64 - k
        } else {
            i as i64 - k + 1
        }
    }

    /// Mean-zero basis slot of wavenumber `k != 0`.
    #[inline]
    pub fn mean_zero_slot(&self, k: i64) -> usize {
        debug_assert!(k != 0);
        let kk = self.n_modes as i64;
        if k < 0 {
            (k + kk) as usize
        } else {
            (k + kk - 1) as usize
        }
    }

    /// Coefficients `|k| <= K` from samples of length `n`, via the FFT of that size.
    pub(crate) fn analyze(&self, samples: &[f64], padded: bool) -> Vec<Complex64> {
        let (plans, n) = self.plans_for(padded);
        debug_assert_eq!(samples.len(), n);
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        plans.forward.process(&mut buf);
        self.truncate(&buf, n)
    }

    pub(crate) fn analyze_complex(&self, samples: &[Complex64], padded: bool) -> Vec<Complex64> {
        let (plans, n) = self.plans_for(padded);
        debug_assert_eq!(samples.len(), n);
        let mut buf = samples.to_vec();
        plans.forward.process(&mut buf);
        self.truncate(&buf, n)
    }

    /// Complex samples of the trigonometric polynomial with coefficients `coeffs`.
    pub(crate) fn synthesize(&self, coeffs: &[Complex64], padded: bool) -> Vec<Complex64> {
        let (plans, n) = self.plans_for(padded);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for k in self.wavenumbers() {
            buf[k.rem_euclid(n as i64) as usize] = coeffs[self.index(k)];
        }
        plans.inverse.process(&mut buf);
        buf
    }

    /// Padded-grid samples of a polynomial with band `band <= padded_points/2`;
    /// `coeffs[j + band]` is the coefficient of `e^{ijx}`.
    pub(crate) fn synthesize_padded_band(&self, coeffs: &[Complex64], band: usize) -> Vec<Complex64> {
        let n = self.padded_points;
        debug_assert!(2 * band < n && coeffs.len() == 2 * band + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (i, c) in coeffs.iter().enumerate() {
            let k = i as i64 - band as i64;
            buf[k.rem_euclid(n as i64) as usize] = *c;
        }
        self.padded_plans.inverse.process(&mut buf);
        buf
    }

    fn plans_for(&self, padded: bool) -> (&Plans, usize) {
        if padded {
            (&self.padded_plans, self.padded_points)
        } else {
            (&self.plans, self.n_points)
        }
    }

    fn truncate(&self, spectrum: &[Complex64], n: usize) -> Vec<Complex64> {
        let scale = 1.0 / n as f64;
        self.wavenumbers()
            .map(|k| spectrum[k.rem_euclid(n as i64) as usize] * scale)
            .collect()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_modes == other.n_modes && self.n_points == other.n_points
    }
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n_modes", &self.n_modes)
            .field("n_points", &self.n_points)
            .field("padded_points", &self.padded_points)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_points_are_padded_powers_of_two() {
        assert_eq!(PeriodicGrid::default_points(32), 256);
        assert_eq!(PeriodicGrid::default_points(16), 128);
        assert_eq!(PeriodicGrid::default_points(3), 16);
        let g = PeriodicGrid::new(32).unwrap();
        assert_eq!(g.padded_points(), 256);
    }

    #[test]
    fn rejects_aliasing_point_counts() {
        assert!(PeriodicGrid::with_points(8, 16).is_err());
        assert!(PeriodicGrid::with_points(0, 16).is_err());
        let g = PeriodicGrid::with_points(8, 17).unwrap();
        assert!(g.padded_points() >= 34);
    }

    #[test]
    fn mean_zero_slots_round_trip() {
        let g = PeriodicGrid::new(5).unwrap();
        for i in 0..g.mean_zero_dim() {
            let k = g.mean_zero_wavenumber(i);
            assert_ne!(k, 0);
            assert_eq!(g.mean_zero_slot(k), i);
        }
    }

    #[test]
    fn collocation_points() {
        let g = PeriodicGrid::with_points(2, 8).unwrap();
        assert!((g.point(2) - PI / 2.0).abs() < 1e-15);
        assert_eq!(g.points().len(), 8);
    }
}
