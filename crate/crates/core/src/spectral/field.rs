use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use super::grid::PeriodicGrid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A periodic function stored as its Fourier coefficients `û(k)`, `|k| <= K`,
/// with `u(x) = Σ û(k) e^{ikx}` and `û(k) = (1/2π) ∫ u e^{-ikx} dx`.
///
/// Real-valued functions satisfy `û(-k) = conj(û(k))`. Complex test vectors
/// (single exponentials) are representable too; physical-space products and
/// [`to_physical`] assume realness.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

/// Samples on the collocation grid to Fourier coefficients.
pub fn to_spectral(samples: &[f64], grid: &PeriodicGrid) -> Result<SpectralField> {
    if samples.len() != grid.n_points() {
        return Err(Error::dim(format!(
            "expected {} samples, got {}",
            grid.n_points(),
            samples.len()
        )));
    }
    Ok(SpectralField {
        grid: grid.clone(),
        coeffs: grid.analyze(samples, false),
    })
}

/// Real samples `u(x_j)` on the collocation grid.
pub fn to_physical(field: &SpectralField) -> Vec<f64> {
    field
        .grid
        .synthesize(&field.coeffs, false)
        .into_iter()
        .map(|z| z.re)
        .collect()
}

impl SpectralField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.n_coeffs()],
        }
    }

    pub fn from_coeffs(grid: &PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_coeffs() {
            return Err(Error::dim(format!(
                "expected {} coefficients, got {}",
                grid.n_coeffs(),
                coeffs.len()
            )));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Field with the listed `(k, û(k))` entries and zeros elsewhere. Entries are
    /// taken literally; no conjugate partner is added.
    pub fn from_modes(grid: &PeriodicGrid, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(grid);
        for &(k, c) in modes {
            if k.unsigned_abs() as usize > grid.n_modes() {
                return Err(Error::dim(format!(
                    "wavenumber {k} exceeds n_modes = {}",
                    grid.n_modes()
                )));
            }
            f.coeffs[grid.index(k)] += c;
        }
        Ok(f)
    }

    /// Samples `f` on the collocation grid and transforms.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.points().into_iter().map(f).collect();
        SpectralField {
            grid: grid.clone(),
            coeffs: grid.analyze(&samples, false),
        }
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[grid.index(0)] = Complex64::new(c, 0.0);
        f
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.grid.n_modes() {
            return ZERO;
        }
        self.coeffs[self.grid.index(k)]
    }

    pub fn set_coeff(&mut self, k: i64, value: Complex64) {
        let i = self.grid.index(k);
        self.coeffs[i] = value;
    }

    pub fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::dim(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Mean value `[u] = û(0)` (real part).
    pub fn mean(&self) -> f64 {
        self.coeffs[self.grid.index(0)].re
    }

    pub fn project_mean_zero(&self) -> SpectralField {
        let mut out = self.clone();
        out.coeffs[self.grid.index(0)] = ZERO;
        out
    }

    /// Largest conjugate-symmetry defect relative to the largest coefficient.
    pub fn realness_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let k = self.grid.n_modes() as i64;
        (0..=k)
            .map(|m| (self.coeff(-m) - self.coeff(m).conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.realness_defect() <= tol
    }

    /// Projection onto real-valued functions: `(û(k) + conj û(-k)) / 2`.
    pub fn real_part(&self) -> SpectralField {
        let mut out = self.clone();
        for k in self.grid.wavenumbers() {
            let v = 0.5 * (self.coeff(k) + self.coeff(-k).conj());
            out.coeffs[self.grid.index(k)] = v;
        }
        out
    }

    /// Copies `û(k)`, `k > 0`, onto `û(-k) = conj(û(k))` and zeroes the
    /// imaginary part of the mean, so the field is exactly real.
    pub fn enforce_real(&mut self) {
        let grid = self.grid.clone();
        let k = grid.n_modes() as i64;
        for m in 1..=k {
            let v = self.coeffs[grid.index(m)];
            self.coeffs[grid.index(-m)] = v.conj();
        }
        let i0 = grid.index(0);
        self.coeffs[i0].im = 0.0;
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// `L²` inner product `∫ u conj(v) dx = 2π Σ û(k) conj(v̂(k))`.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        2.0 * PI
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
    }

    /// Real `L²` pairing `∫ u v dx` for real fields.
    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.inner(other).re
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, Complex64) -> Complex64) -> SpectralField {
        let mut out = self.clone();
        for k in self.grid.wavenumbers() {
            let i = self.grid.index(k);
            out.coeffs[i] = f(k, self.coeffs[i]);
        }
        out
    }

    /// Real samples on the padded product grid.
    pub fn padded_samples(&self) -> Vec<f64> {
        self.grid
            .synthesize(&self.coeffs, true)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    pub fn padded_samples_complex(&self) -> Vec<Complex64> {
        self.grid.synthesize(&self.coeffs, true)
    }

    /// Field from samples on the padded grid, truncated to `|k| <= K`.
    pub fn from_padded_samples(grid: &PeriodicGrid, samples: &[f64]) -> SpectralField {
        SpectralField {
            grid: grid.clone(),
            coeffs: grid.analyze(samples, true),
        }
    }

    pub fn from_padded_samples_complex(grid: &PeriodicGrid, samples: &[Complex64]) -> SpectralField {
        SpectralField {
            grid: grid.clone(),
            coeffs: grid.analyze_complex(samples, true),
        }
    }

    /// Alias-free product `P_K(u v)`, formed on the padded grid.
    pub fn product(&self, other: &SpectralField) -> Result<SpectralField> {
        self.same_grid(other)?;
        let a = self.padded_samples_complex();
        let b = other.padded_samples_complex();
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Self::from_padded_samples_complex(&self.grid, &prod))
    }

    /// Exact `∫ u v w dx` for three retained-band fields (padded-grid quadrature).
    pub fn triple_integral(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
        u.same_grid(v)?;
        u.same_grid(w)?;
        let a = u.padded_samples();
        let b = v.padded_samples();
        let c = w.padded_samples();
        let n = a.len() as f64;
        let sum: f64 = a.iter().zip(&b).zip(&c).map(|((x, y), z)| x * y * z).sum();
        Ok(PeriodicGrid::LENGTH * sum / n)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.grid, rhs.grid);
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.grid, rhs.grid);
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.coeffs
            .iter_mut()
            .zip(&rhs.coeffs)
            .for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.coeffs
            .iter_mut()
            .zip(&rhs.coeffs)
            .for_each(|(a, b)| *a -= b);
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scale(a)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(grid: &PeriodicGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(grid);
        for k in 0..=grid.n_modes() as i64 {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.set_coeff(k, c);
        }
        f.enforce_real();
        f
    }

    /// Direct O(N K) DFT, independent of the FFT path.
    fn direct_dft(samples: &[f64], k_max: i64) -> Vec<Complex64> {
        let n = samples.len();
        (-k_max..=k_max)
            .map(|k| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(j, &u)| {
                        let x = 2.0 * PI * j as f64 / n as f64;
                        u * Complex64::from_polar(1.0, -(k as f64) * x)
                    })
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn cosine_has_two_half_coefficients() {
        let grid = PeriodicGrid::new(4).unwrap();
        let f = to_spectral(
            &grid.points().iter().map(|x| (3.0 * x).cos()).collect::<Vec<_>>(),
            &grid,
        )
        .unwrap();
        for k in grid.wavenumbers() {
            let expect = if k.abs() == 3 { 0.5 } else { 0.0 };
            assert!((f.coeff(k) - Complex64::new(expect, 0.0)).norm() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn zero_samples_give_zero_coeffs() {
        let grid = PeriodicGrid::new(6).unwrap();
        let f = to_spectral(&vec![0.0; grid.n_points()], &grid).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn sample_length_mismatch() {
        let grid = PeriodicGrid::new(6).unwrap();
        assert!(matches!(
            to_spectral(&[0.0; 3], &grid),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn round_trip_matches_direct_dft() {
        for k in [3usize, 8, 15] {
            let grid = PeriodicGrid::new(k).unwrap();
            assert!(grid.n_points() <= 64);
            let f = random_real(&grid, 7 + k as u64);
            let samples = to_physical(&f);
            let direct = direct_dft(&samples, k as i64);
            for (a, b) in direct.iter().zip(f.coeffs()) {
                assert!((a - b).norm() < 1e-13);
            }
            let back = to_spectral(&samples, &grid).unwrap();
            let again = to_physical(&back);
            let scale = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let err = samples
                .iter()
                .zip(&again)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err / scale < 1e-12);
            assert!(back.is_real(1e-12));
        }
    }

    #[test]
    fn mean_and_projection() {
        let grid = PeriodicGrid::new(4).unwrap();
        let c = SpectralField::constant(&grid, 5.0);
        assert!((c.mean() - 5.0).abs() < 1e-15);
        assert!(c.project_mean_zero().is_zero());
        let s = SpectralField::from_fn(&grid, |x| x.sin());
        assert!(s.mean().abs() < 1e-15);
        assert!((&s.project_mean_zero() - &s).max_abs() < 1e-16);
    }

    #[test]
    fn product_is_alias_free() {
        let grid = PeriodicGrid::new(8).unwrap();
        let a = SpectralField::from_fn(&grid, |x| (8.0 * x).cos());
        let p = a.product(&a).unwrap();
        // cos² 8x = 1/2 + cos(16x)/2; the k = 16 part is outside the band.
        assert!((p.mean() - 0.5).abs() < 1e-14);
        for k in 1..=8 {
            assert!(p.coeff(k).norm() < 1e-14);
        }
    }
}
