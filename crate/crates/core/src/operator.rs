//! Dense matrices over the mean-zero truncated Fourier modes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{PeriodicGrid, SpectralField};

/// A `2K × 2K` complex matrix acting on the coefficients `û(k)`, `0 < |k| ≤ K`.
///
/// Slots are ordered `k = −K, …, −1, 1, …, K` (see [`PeriodicGrid::mean_zero_slot`]).
#[derive(Clone, PartialEq)]
pub struct DenseOperator {
    grid: PeriodicGrid,
    matrix: DMatrix<Complex64>,
}

impl std::fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseOperator")
            .field("dim", &self.dim())
            .field("n_modes", &self.grid.n_modes())
            .finish()
    }
}

impl DenseOperator {
    pub fn new(grid: &PeriodicGrid, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.mean_zero_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::dim(format!(
                "operator is {}x{}, grid needs {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("operator has non-finite entries"));
        }
        Ok(DenseOperator {
            grid: grid.clone(),
            matrix,
        })
    }

    pub(crate) fn from_matrix_unchecked(grid: &PeriodicGrid, matrix: DMatrix<Complex64>) -> Self {
        DenseOperator {
            grid: grid.clone(),
            matrix,
        }
    }

    pub fn identity(grid: &PeriodicGrid) -> Self {
        let n = grid.mean_zero_dim();
        Self::from_matrix_unchecked(grid, DMatrix::identity(n, n))
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        let n = grid.mean_zero_dim();
        Self::from_matrix_unchecked(grid, DMatrix::zeros(n, n))
    }

    /// Diagonal operator with entries `symbol(k)`.
    pub fn diagonal(grid: &PeriodicGrid, symbol: impl Fn(i64) -> Complex64) -> Self {
        let n = grid.mean_zero_dim();
        let diag =
            DVector::from_iterator(n, (0..n).map(|i| symbol(grid.mean_zero_wavenumber(i))));
        Self::from_matrix_unchecked(grid, DMatrix::from_diagonal(&diag))
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Applies the operator; the mean of `u` is ignored and the output has mean zero.
    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        if u.grid() != &self.grid {
            return Err(Error::dim("field and operator live on different grids"));
        }
        Ok(from_vector(&self.grid, &(&self.matrix * to_vector(u))))
    }

    pub fn apply_vec(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    pub fn compose(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check(rhs)?;
        Ok(Self::from_matrix_unchecked(&self.grid, &self.matrix * &rhs.matrix))
    }

    pub fn add(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check(rhs)?;
        Ok(Self::from_matrix_unchecked(&self.grid, &self.matrix + &rhs.matrix))
    }

    pub fn sub(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check(rhs)?;
        Ok(Self::from_matrix_unchecked(&self.grid, &self.matrix - &rhs.matrix))
    }

    /// `[self; rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.check(rhs)?;
        Ok(Self::from_matrix_unchecked(
            &self.grid,
            &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix,
        ))
    }

    pub fn scale(&self, a: f64) -> DenseOperator {
        Self::from_matrix_unchecked(&self.grid, &self.matrix * Complex64::new(a, 0.0))
    }

    /// `L²` adjoint (conjugate transpose in the Fourier basis).
    pub fn adjoint(&self) -> DenseOperator {
        Self::from_matrix_unchecked(&self.grid, self.matrix.adjoint())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    /// `‖A − A*‖_F / ‖A‖_F`, zero for the zero matrix.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.frobenius_norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.adjoint()).norm() / n
    }

    /// Deviation from mapping real fields to real fields: `‖A − J A J‖_F / ‖A‖_F`
    /// where `J` is `û(k) ↦ conj(û(−k))`.
    pub fn realness_defect(&self) -> f64 {
        let n = self.frobenius_norm();
        if n == 0.0 {
            return 0.0;
        }
        let dim = self.dim();
        let mut d = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let a = self.matrix[(i, j)];
                let b = self.matrix[(dim - 1 - i, dim - 1 - j)].conj();
                d += (a - b).norm_sqr();
            }
        }
        d.sqrt() / n
    }

    /// All eigenvalues via complex Schur decomposition.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let (_, t) = self.matrix.clone().schur().unpack();
        (0..self.dim()).map(|i| t[(i, i)]).collect()
    }

    /// `min Re λ(L)`, the decay rate predicted for `∂ₜv = −Lv`.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    fn check(&self, rhs: &DenseOperator) -> Result<()> {
        if self.grid != rhs.grid {
            return Err(Error::dim("operators live on different grids"));
        }
        Ok(())
    }
}

/// Mean-zero coefficients of `u` in slot order.
pub fn to_vector(u: &SpectralField) -> DVector<Complex64> {
    let grid = u.grid();
    DVector::from_iterator(
        grid.mean_zero_dim(),
        (0..grid.mean_zero_dim()).map(|i| u.coeff(grid.mean_zero_wavenumber(i))),
    )
}

/// Field with the given mean-zero coefficients and zero mean.
pub fn from_vector(grid: &PeriodicGrid, v: &DVector<Complex64>) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    for i in 0..grid.mean_zero_dim() {
        f.set_coeff(grid.mean_zero_wavenumber(i), v[i]);
    }
    f
}

/// Builds the matrix of a real-linear map on mean-zero fields from the images of
/// `cos kx` and `sin kx`, using `e^{±ikx} = cos kx ± i sin kx`. Columns are computed
/// in parallel.
pub fn assemble_matrix<F>(grid: &PeriodicGrid, op: F) -> Result<DenseOperator>
where
    F: Fn(&SpectralField) -> Result<SpectralField> + Sync,
{
    let k_max = grid.n_modes() as i64;
    type Columns = (i64, DVector<Complex64>, DVector<Complex64>);
    let pairs: Vec<Result<Columns>> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let half = Complex64::new(0.5, 0.0);
            let cos = SpectralField::from_modes(grid, &[(k, half), (-k, half)])?;
            let sin = SpectralField::from_modes(
                grid,
                &[(k, Complex64::new(0.0, -0.5)), (-k, Complex64::new(0.0, 0.5))],
            )?;
            let c = to_vector(&op(&cos)?);
            let s = to_vector(&op(&sin)?);
            Ok((k, c, s))
        })
        .collect();
    let n = grid.mean_zero_dim();
    let mut m = DMatrix::zeros(n, n);
    let i = Complex64::new(0.0, 1.0);
    for pair in pairs {
        let (k, c, s) = pair?;
        m.set_column(grid.mean_zero_slot(k), &(&c + &s * i));
        m.set_column(grid.mean_zero_slot(-k), &(&c - &s * i));
    }
    DenseOperator::new(grid, m)
}
