//! The localized, volume-preserving control operator `Gh = g·(h − ∫gh)` and
//! operators built from it.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use crate::spectral::{dr, sobolev_norm, PeriodicGrid, SpectralField};

/// Coefficient tables are accepted once doubling the quadrature changes no
/// entry by more than this.
const TABLE_TOL: f64 = 1e-14;
const MAX_QUADRATURE: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileShape {
    /// `c·exp(−1/(1−y²))`, `y = (x − center)/radius`, periodized.
    Bump { center: f64, radius: f64 },
    /// `g ≡ 1/(2π)`.
    Uniform,
}

/// The control profile `g`: smooth, nonnegative, `∫g = 1`.
///
/// Besides samples, the profile keeps `ĝ(j)` for `|j| <= 2K` computed by a
/// converged fine quadrature, which makes the truncated operator
/// `P_K G P_K` exact rather than collocated.
#[derive(Clone)]
pub struct ControlProfile {
    grid: PeriodicGrid,
    shape: ProfileShape,
    normalization: f64,
    table: Arc<Vec<Complex64>>,
    padded_g: Arc<Vec<f64>>,
    g_field: SpectralField,
    g_matrix: Arc<DenseOperator>,
    quadrature_points: usize,
}

impl std::fmt::Debug for ControlProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlProfile")
            .field("shape", &self.shape)
            .field("n_modes", &self.grid.n_modes())
            .finish()
    }
}

impl PartialEq for ControlProfile {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.shape == other.shape
    }
}

/// Unnormalized bump `exp(−1/(1−y²))` at periodic distance `d` from the center.
fn raw_bump(x: f64, center: f64, radius: f64) -> f64 {
    let d = (x - center + PI).rem_euclid(2.0 * PI) - PI;
    let y = d / radius;
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

impl ControlProfile {
    /// Bump profile supported in `[center − radius, center + radius]`.
    pub fn bump(grid: &PeriodicGrid, center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < PI) {
            return Err(Error::domain(format!(
                "profile radius must lie in (0, pi), got {radius}"
            )));
        }
        if !(0.0..2.0 * PI).contains(&center) {
            return Err(Error::domain(format!(
                "profile center must lie in [0, 2pi), got {center}"
            )));
        }
        let band = 2 * grid.n_modes();
        let mut m = (16 * band).next_power_of_two().max(1024);
        let mut prev = raw_table(m, band, center, radius);
        loop {
            m *= 2;
            if m > MAX_QUADRATURE {
                return Err(Error::Resolution(format!(
                    "profile coefficients did not converge with {MAX_QUADRATURE} quadrature points"
                )));
            }
            let next = raw_table(m, band, center, radius);
            let change = next
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            prev = next;
            if change <= TABLE_TOL * prev[band].norm() {
                break;
            }
        }
        // Normalize so that 2π ĝ(0) = 1 holds to rounding.
        let mass = 2.0 * PI * prev[band].re;
        let table: Vec<Complex64> = prev.iter().map(|c| c / mass).collect();
        Ok(Self::from_table(
            grid,
            ProfileShape::Bump { center, radius },
            1.0 / mass,
            table,
            m,
        ))
    }

    pub fn uniform(grid: &PeriodicGrid) -> Self {
        let band = 2 * grid.n_modes();
        let mut table = vec![Complex64::new(0.0, 0.0); 2 * band + 1];
        table[band] = Complex64::new(1.0 / (2.0 * PI), 0.0);
        Self::from_table(grid, ProfileShape::Uniform, 1.0 / (2.0 * PI), table, 0)
    }

    fn from_table(
        grid: &PeriodicGrid,
        shape: ProfileShape,
        normalization: f64,
        mut table: Vec<Complex64>,
        quadrature_points: usize,
    ) -> Self {
        let band = 2 * grid.n_modes();
        for j in 1..=band {
            let avg = 0.5 * (table[band + j] + table[band - j].conj());
            table[band + j] = avg;
            table[band - j] = avg.conj();
        }
        table[band].im = 0.0;
        let k = grid.n_modes();
        let g_field =
            SpectralField::from_coeffs(grid, table[band - k..=band + k].to_vec()).expect("band");
        let padded_g = grid
            .synthesize_padded_band(&table, band)
            .into_iter()
            .map(|z| z.re)
            .collect();
        let g_matrix = g_matrix_from_table(grid, &table);
        ControlProfile {
            grid: grid.clone(),
            shape,
            normalization,
            table: Arc::new(table),
            padded_g: Arc::new(padded_g),
            g_field,
            g_matrix: Arc::new(g_matrix),
            quadrature_points,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn shape(&self) -> ProfileShape {
        self.shape
    }

    /// The constant `c` in `g = c·exp(−1/(1−y²))` (or `1/2π` for the uniform profile).
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Quadrature size at which the coefficient table converged (0 for uniform).
    pub fn quadrature_points(&self) -> usize {
        self.quadrature_points
    }

    /// Exact value `g(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self.shape {
            ProfileShape::Bump { center, radius } => self.normalization * raw_bump(x, center, radius),
            ProfileShape::Uniform => 1.0 / (2.0 * PI),
        }
    }

    /// Exact samples `g(x_j)` on the collocation grid.
    pub fn samples(&self) -> Vec<f64> {
        self.grid.points().into_iter().map(|x| self.value(x)).collect()
    }

    /// `P_K g`.
    pub fn g_field(&self) -> &SpectralField {
        &self.g_field
    }

    /// `ĝ(j)` for `|j| <= 2K`, zero beyond.
    pub fn coefficient(&self, j: i64) -> Complex64 {
        let band = 2 * self.grid.n_modes() as i64;
        if j.abs() > band {
            Complex64::new(0.0, 0.0)
        } else {
            self.table[(j + band) as usize]
        }
    }

    /// `max_{K<|j|<=2K} |ĝ(j)| / ĝ(0)`: how much of `g` the retained band misses.
    pub fn spectral_tail(&self) -> f64 {
        let k = self.grid.n_modes() as i64;
        ((k + 1)..=(2 * k))
            .map(|j| self.coefficient(j).norm())
            .fold(0.0, f64::max)
            / self.coefficient(0).re
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        match self.shape {
            ProfileShape::Bump { center, radius } => Some((center - radius, center + radius)),
            ProfileShape::Uniform => None,
        }
    }

    /// Matrix of `G` on the mean-zero modes.
    pub fn g_matrix(&self) -> &DenseOperator {
        &self.g_matrix
    }

    /// Galerkin multiplication by `g` on the full band, `(k, m) ↦ ĝ(k − m)`,
    /// indexed by `k + K`.
    pub fn multiplication_matrix(&self) -> DMatrix<Complex64> {
        let n = self.grid.n_coeffs();
        DMatrix::from_fn(n, n, |r, c| self.coefficient(r as i64 - c as i64))
    }

    /// Nodal form of `G` on collocation samples with the exact `g(x_j)` and the
    /// trapezoid rule for `∫gh`.
    pub fn apply_g_nodal(&self, h: &[f64]) -> Result<Vec<f64>> {
        let g = self.samples();
        if h.len() != g.len() {
            return Err(Error::dim(format!(
                "expected {} samples, got {}",
                g.len(),
                h.len()
            )));
        }
        let w = 2.0 * PI / g.len() as f64;
        let integral: f64 = g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() * w;
        Ok(g.iter().zip(h).map(|(a, b)| a * (b - integral)).collect())
    }
}

/// `ĝ(j)`, `|j| <= band`, of the unnormalized bump from `m` trapezoid nodes.
fn raw_table(m: usize, band: usize, center: f64, radius: f64) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(raw_bump(2.0 * PI * j as f64 / m as f64, center, radius), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    (-(band as i64)..=band as i64)
        .map(|j| buf[j.rem_euclid(m as i64) as usize] * scale)
        .collect()
}

fn g_matrix_from_table(grid: &PeriodicGrid, table: &[Complex64]) -> DenseOperator {
    let band = 2 * grid.n_modes() as i64;
    let c = |j: i64| table[(j + band) as usize];
    let n = grid.mean_zero_dim();
    let m = DMatrix::from_fn(n, n, |r, s| {
        let k = grid.mean_zero_wavenumber(r);
        let l = grid.mean_zero_wavenumber(s);
        c(k - l) - c(k) * c(-l) * (2.0 * PI)
    });
    DenseOperator::from_matrix_unchecked(grid, m)
}

fn check_grid(h: &SpectralField, p: &ControlProfile) -> Result<()> {
    if h.grid() != p.grid() {
        return Err(Error::dim("field and profile live on different grids"));
    }
    Ok(())
}

/// `Gh = P_K[g·(h − ∫gh)]`, with `g·h` formed on the padded grid from the `2K`-band
/// profile, which makes the product exact on the retained modes.
pub fn apply_g_op(h: &SpectralField, p: &ControlProfile) -> Result<SpectralField> {
    check_grid(h, p)?;
    let hs = h.padded_samples();
    let prod: Vec<f64> = hs.iter().zip(p.padded_g.iter()).map(|(a, b)| a * b).collect();
    let integral = 2.0 * PI * prod.iter().sum::<f64>() / prod.len() as f64;
    let gh = SpectralField::from_padded_samples(p.grid(), &prod);
    Ok(&gh - &(p.g_field() * integral))
}

/// `G D^γ G u`.
pub fn feedback(u: &SpectralField, gamma: f64, p: &ControlProfile) -> Result<SpectralField> {
    let gu = apply_g_op(u, p)?;
    apply_g_op(&dr(&gu, gamma), p)
}

/// Matrix of `G D^γ G` on the mean-zero modes.
pub fn feedback_matrix(p: &ControlProfile, gamma: f64) -> DenseOperator {
    let g = p.g_matrix();
    let d = dr_operator(p.grid(), gamma);
    let m = g.matrix() * d.matrix() * g.matrix();
    DenseOperator::from_matrix_unchecked(p.grid(), m)
}

/// Diagonal `D^r` on the mean-zero modes.
pub fn dr_operator(grid: &PeriodicGrid, r: f64) -> DenseOperator {
    DenseOperator::diagonal(grid, |k| {
        Complex64::new((k.unsigned_abs() as f64).powf(r), 0.0)
    })
}

/// `E = G D³ [D^s; G] D^{−s} + [D^s; G] D³ G D^{−s}`, the lower-order remainder
/// produced when `D^s` is commuted through the feedback term.
pub fn remainder_e(s: f64, p: &ControlProfile) -> DenseOperator {
    let grid = p.grid();
    let g = p.g_matrix().matrix();
    let ds = dr_operator(grid, s).into_matrix();
    let dms = dr_operator(grid, -s).into_matrix();
    let d3 = dr_operator(grid, 3.0).into_matrix();
    let c = &ds * g - g * &ds;
    let e = g * &d3 * &c * &dms + &c * &d3 * g * &dms;
    DenseOperator::from_matrix_unchecked(grid, e)
}

/// `D^{−s} [D^s; G D³ G]`, the remainder in the equation for `w = D^{−s}u`
/// along adjoint solutions.
pub fn remainder_adjoint(s: f64, p: &ControlProfile) -> DenseOperator {
    let grid = p.grid();
    let b = feedback_matrix(p, 3.0).into_matrix();
    let ds = dr_operator(grid, s).into_matrix();
    let dms = dr_operator(grid, -s).into_matrix();
    let e = &dms * (&ds * &b - &b * &ds);
    DenseOperator::from_matrix_unchecked(grid, e)
}

/// Largest observed `‖D^r[D^s; ψ]f‖ / ‖f‖_{r+s−1}` over `trials` random mean-zero
/// `f`. A diagnostic for the order-`(s − 1)` commutator bound.
pub fn commutator_constant(
    r: f64,
    s: f64,
    psi: &SpectralField,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::domain("commutator_constant needs at least one trial"));
    }
    let grid = psi.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = r + s - 1.0;
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let mut f = SpectralField::zeros(&grid);
        for k in 1..=grid.n_modes() as i64 {
            let amp = (1.0 + (k * k) as f64).powf(-weight / 2.0);
            let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * amp;
            f.set_coeff(k, z);
            f.set_coeff(-k, z.conj());
        }
        let comm = &dr(&psi.product(&f)?, s) - &psi.product(&dr(&f, s))?;
        let num = sobolev_norm(&dr(&comm, r).project_mean_zero(), 0.0);
        let den = sobolev_norm(&f, weight);
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}
