//! The linear closed-loop flow `∂ₜv + Lv = F` on mean-zero fields.

mod decay;
mod ledger;

pub use decay::{bona_smith_distances, decay_rate, uniform_estimate_ratio, DecayFit};
pub(crate) use decay::tail_fit;
pub use ledger::{energy_ledger, weighted_ledger, LedgerReport, WeightedLedgerReport};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::control::{feedback_matrix, ControlProfile};
use crate::error::{Error, Result};
use crate::operator::{from_vector, to_vector, DenseOperator};
use crate::spectral::{derivative_symbol, PeriodicGrid, SpectralField, Trajectory};

/// Data of the linear operator
/// `L = εD^{2l+1} + (−1)^{l+1}∂ₓ^{2l+1} + β₀∂ₓ³ + β₁∂ₓ + β_h∂ₓ^{2l−1} + G D^{2l−1} G`.
///
/// `beta_high` is zero for the models in the literature; it absorbs the
/// mean shift of the hierarchy nonlinearity `u∂ₓ^{2l−1}u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub epsilon: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta_high: f64,
    pub order_l: u32,
    pub profile: ControlProfile,
    pub feedback_on: bool,
}

impl LinearModel {
    /// Fifth-order model with feedback on and all other coefficients zero.
    pub fn new(profile: ControlProfile) -> Self {
        LinearModel {
            epsilon: 0.0,
            beta0: 0.0,
            beta1: 0.0,
            beta_high: 0.0,
            order_l: 2,
            profile,
            feedback_on: true,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_betas(mut self, beta0: f64, beta1: f64) -> Self {
        self.beta0 = beta0;
        self.beta1 = beta1;
        self
    }

    pub fn with_order(mut self, order_l: u32) -> Self {
        self.order_l = order_l;
        self
    }

    pub fn with_feedback(mut self, on: bool) -> Self {
        self.feedback_on = on;
        self
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.profile.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if self.order_l < 2 {
            return Err(Error::domain(format!(
                "order_l must be at least 2, got {}",
                self.order_l
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::domain(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        for (name, v) in [
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta_high", self.beta_high),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Symbol of the diagonal (Fourier-multiplier) part of `L` at `k`.
    pub fn diagonal_symbol(&self, k: i64) -> Complex64 {
        let l = self.order_l;
        let abs = k.unsigned_abs() as f64;
        let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
        Complex64::new(self.epsilon * abs.powi(2 * l as i32 + 1), 0.0)
            + derivative_symbol(k, 2 * l + 1) * sign
            + derivative_symbol(k, 3) * self.beta0
            + derivative_symbol(k, 1) * self.beta1
            + derivative_symbol(k, 2 * l - 1) * self.beta_high
    }

    /// Exponent `l − 1/2` of the dissipative gain `D^{l−1/2}G`.
    pub fn gain(&self) -> f64 {
        self.order_l as f64 - 0.5
    }
}

/// Dense matrix of `L` on the mean-zero modes; the flow is `∂ₜv = −Lv + F`.
pub fn assemble_generator(model: &LinearModel) -> Result<DenseOperator> {
    model.validate()?;
    let grid = model.grid();
    let diag = DenseOperator::diagonal(grid, |k| model.diagonal_symbol(k));
    if !model.feedback_on {
        return Ok(diag);
    }
    let b = feedback_matrix(&model.profile, 2.0 * model.order_l as f64 - 1.0);
    diag.add(&b)
}

/// `S(t) = exp(−tL)`.
pub fn propagator(l: &DenseOperator, t: f64) -> Result<DenseOperator> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "propagator time must be finite and nonnegative, got {t}"
        )));
    }
    let grid = l.grid();
    if t == 0.0 {
        return Ok(DenseOperator::identity(grid));
    }
    let m = l.matrix();
    let n = m.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)));
    let s = if diagonal {
        DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            (0..n).map(|i| (-m[(i, i)] * t).exp()),
        ))
    } else {
        (m * Complex64::new(-t, 0.0)).exp()
    };
    DenseOperator::new(grid, s)
}

fn phi_scalar(z: Complex64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    if z.norm() > 0.5 {
        let e = z.exp();
        return ((e - one) / z, (e - one - z) / (z * z));
    }
    // φ_j(z) = Σ_m z^m / (m + j)!
    let (mut p1, mut p2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut term = one;
    for m in 0..25 {
        let mf = m as f64;
        p1 += term / (mf + 1.0);
        p2 += term / ((mf + 1.0) * (mf + 2.0));
        term *= z / (mf + 1.0);
    }
    (p1, p2)
}

/// `(φ₁(A), φ₂(A))` for `A = −tL`, where `φ₁(z) = (e^z − 1)/z` and
/// `φ₂(z) = (e^z − 1 − z)/z²`. Non-diagonal generators go through the
/// block-triangular exponential `exp [[A, I, 0], [0, 0, I], [0, 0, 0]]`.
pub fn phi_functions(l: &DenseOperator, t: f64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("phi-function time must be positive, got {t}")));
    }
    let m = l.matrix();
    let n = m.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)));
    if diagonal {
        let (p1, p2): (Vec<_>, Vec<_>) = (0..n).map(|i| phi_scalar(-m[(i, i)] * t)).unzip();
        return Ok((
            DMatrix::from_diagonal(&DVector::from_vec(p1)),
            DMatrix::from_diagonal(&DVector::from_vec(p2)),
        ));
    }
    let mut big = DMatrix::<Complex64>::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(m * Complex64::new(-t, 0.0)));
    for i in 0..n {
        big[(i, n + i)] = Complex64::new(1.0, 0.0);
        big[(n + i, 2 * n + i)] = Complex64::new(1.0, 0.0);
    }
    let e = big.exp();
    Ok((
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    ))
}

/// Number of steps `T/dt`, requiring `dt` to divide `T`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::domain(format!("T must be nonnegative, got {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
        return Err(Error::domain(format!("dt = {dt} does not divide T = {t_final}")));
    }
    Ok(n as usize)
}

pub(crate) fn require_mean_zero(u: &SpectralField, what: &str) -> Result<()> {
    let scale = u.max_abs().max(1.0);
    if u.mean().abs() > 1e-13 * scale {
        return Err(Error::domain(format!(
            "{what} must have mean zero, got mean {:e}",
            u.mean()
        )));
    }
    if !u.is_real(1e-12) {
        return Err(Error::domain(format!("{what} is not real-valued")));
    }
    Ok(())
}

/// Cached generator and one-step propagators for a fixed `dt`.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    model: LinearModel,
    dt: f64,
    generator: DenseOperator,
    step: DMatrix<Complex64>,
    step_adjoint: DMatrix<Complex64>,
}

impl LinearFlow {
    pub fn new(model: &LinearModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        let generator = assemble_generator(model)?;
        let step = propagator(&generator, dt)?.into_matrix();
        let step_adjoint = step.adjoint();
        Ok(LinearFlow {
            model: model.clone(),
            dt,
            generator,
            step,
            step_adjoint,
        })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.model.grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn generator(&self) -> &DenseOperator {
        &self.generator
    }

    pub fn step_matrix(&self) -> &DMatrix<Complex64> {
        &self.step
    }

    pub fn step_adjoint_matrix(&self) -> &DMatrix<Complex64> {
        &self.step_adjoint
    }

    /// Forward recursion on coefficient vectors,
    /// `x_{n+1} = S x_n + dt/2 (S f_n + f_{n+1})`.
    pub fn evolve_vectors(
        &self,
        x0: DVector<Complex64>,
        forcing: Option<&[DVector<Complex64>]>,
        steps: usize,
    ) -> Vec<DVector<Complex64>> {
        let h = Complex64::new(0.5 * self.dt, 0.0);
        let mut out = Vec::with_capacity(steps + 1);
        out.push(x0);
        for n in 0..steps {
            let cur = &out[n];
            let next = match forcing {
                None => &self.step * cur,
                Some(f) => &self.step * (cur + &f[n] * h) + &f[n + 1] * h,
            };
            out.push(next);
        }
        out
    }

    /// Backward recursion `u_N = φ`, `u_n = S* u_{n+1}`, stored forward-indexed.
    pub fn adjoint_vectors(&self, phi: DVector<Complex64>, steps: usize) -> Vec<DVector<Complex64>> {
        let mut out = vec![phi; steps + 1];
        for n in (0..steps).rev() {
            out[n] = &self.step_adjoint * &out[n + 1];
        }
        out
    }

    pub fn evolve(
        &self,
        v0: &SpectralField,
        forcing: Option<&[SpectralField]>,
        steps: usize,
    ) -> Result<Trajectory> {
        if v0.grid() != self.grid() {
            return Err(Error::dim("initial data and model live on different grids"));
        }
        require_mean_zero(v0, "initial data")?;
        let f: Option<Vec<DVector<Complex64>>> = match forcing {
            None => None,
            Some(f) => {
                if f.len() != steps + 1 {
                    return Err(Error::dim(format!(
                        "forcing has {} samples, expected {}",
                        f.len(),
                        steps + 1
                    )));
                }
                if f.iter().any(|x| x.grid() != self.grid()) {
                    return Err(Error::dim("forcing and model live on different grids"));
                }
                Some(f.iter().map(to_vector).collect())
            }
        };
        let xs = self.evolve_vectors(to_vector(v0), f.as_deref(), steps);
        Trajectory::new(self.dt, xs.iter().map(|x| from_vector(self.grid(), x)).collect())
    }

    pub fn adjoint(&self, u_t: &SpectralField, steps: usize) -> Result<Trajectory> {
        if u_t.grid() != self.grid() {
            return Err(Error::dim("terminal data and model live on different grids"));
        }
        require_mean_zero(u_t, "terminal data")?;
        let xs = self.adjoint_vectors(to_vector(u_t), steps);
        Trajectory::new(self.dt, xs.iter().map(|x| from_vector(self.grid(), x)).collect())
    }
}

/// Solves `∂ₜv + Lv = F`, `v(0) = v0` on `[0, T]`. `forcing`, if given, holds
/// `F(t_n)` for `n = 0..=T/dt`; its mean is ignored.
pub fn evolve_linear(
    model: &LinearModel,
    v0: &SpectralField,
    forcing: Option<&[SpectralField]>,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = step_count(t_final, dt)?;
    LinearFlow::new(model, dt)?.evolve(v0, forcing, steps)
}

/// Solves the adjoint system `−∂ₜu + L*u = 0`, `u(T) = u_T`, backward in time.
pub fn adjoint_evolve(
    model: &LinearModel,
    u_t: &SpectralField,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = step_count(t_final, dt)?;
    LinearFlow::new(model, dt)?.adjoint(u_t, steps)
}
