//! Exact control by the Hilbert uniqueness method: observation of adjoint
//! solutions, the observability Gramian and the minimum-energy controls.

mod cg;
mod fixed_point;

pub use cg::pcg;
pub use fixed_point::{solve_nonlinear_control, NonlinearControl, NonlinearControlOptions};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{dr_operator, remainder_adjoint};
use crate::error::{Error, Result};
use crate::linear::{propagator, step_count, LinearFlow, LinearModel};
use crate::operator::{from_vector, to_vector, DenseOperator};
use crate::spectral::{sobolev_norm, PeriodicGrid, SpectralField, Trajectory};

/// Trapezoid weight of sample `n` out of `0..=steps`.
pub(crate) fn trap_weight(n: usize, steps: usize) -> f64 {
    if n == 0 || n == steps {
        0.5
    } else {
        1.0
    }
}

/// Time samples `k(t_n)` of a control, each mean-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    grid: PeriodicGrid,
    dt: f64,
    values: Vec<SpectralField>,
}

impl ControlSignal {
    pub fn new(dt: f64, values: Vec<SpectralField>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        let Some(first) = values.first() else {
            return Err(Error::dim("a control signal needs at least one sample"));
        };
        let grid = first.grid().clone();
        for v in &values {
            if v.grid() != &grid {
                return Err(Error::dim("control samples live on different grids"));
            }
            if v.mean().abs() > 1e-13 * v.max_abs().max(1.0) {
                return Err(Error::domain(format!(
                    "control samples must be mean-zero, got mean {:e}",
                    v.mean()
                )));
            }
        }
        Ok(ControlSignal { grid, dt, values })
    }

    pub fn zeros(grid: &PeriodicGrid, dt: f64, steps: usize) -> Result<Self> {
        Self::new(dt, vec![SpectralField::zeros(grid); steps + 1])
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn t_final(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    /// `Σₙ wₙ dt ‖D^r k(t_n)‖²` with trapezoid weights `wₙ`; `r = 0` is the `L²` energy
    /// that the Gramian quadratic form reproduces.
    pub fn dr_energy(&self, r: f64) -> f64 {
        let n = self.steps();
        self.values
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let d = crate::spectral::dr(k, r);
                trap_weight(i, n) * self.dt * d.dot(&d)
            })
            .sum()
    }

    pub fn energy(&self) -> f64 {
        self.dr_energy(0.0)
    }

    /// Forcing `G D^{l−1/2} k(t_n)` entering the state equation.
    pub fn forcing(&self, model: &LinearModel) -> Result<Vec<SpectralField>> {
        if &self.grid != model.grid() {
            return Err(Error::dim("signal and model live on different grids"));
        }
        let act = actuation_matrix(model);
        Ok(self
            .values
            .iter()
            .map(|k| from_vector(&self.grid, &(&act * to_vector(k))))
            .collect())
    }
}

/// `D^{l−1/2} G`, mapping adjoint states to controls.
pub(crate) fn observation_matrix(model: &LinearModel) -> DMatrix<Complex64> {
    dr_operator(model.grid(), model.gain()).matrix() * model.profile.g_matrix().matrix()
}

/// `G D^{l−1/2}`, the adjoint of the observation.
pub(crate) fn actuation_matrix(model: &LinearModel) -> DMatrix<Complex64> {
    model.profile.g_matrix().matrix() * dr_operator(model.grid(), model.gain()).matrix()
}

/// Adjoint flow, observation and actuation for one horizon. With a weight `s`
/// the adjoint runs in the variable `w = D^{−s}u` with the remainder correction
/// `E`, and the control is the Riesz representative `k = D^{−2s}D^{l−1/2}Gu`.
#[derive(Debug, Clone)]
pub(crate) struct HumEngine {
    model: LinearModel,
    flow: LinearFlow,
    steps: usize,
    observe: DMatrix<Complex64>,
    actuate: DMatrix<Complex64>,
    weighted: Option<Weighted>,
}

#[derive(Debug, Clone)]
struct Weighted {
    s: f64,
    w_step: DMatrix<Complex64>,
    d_s: DMatrix<Complex64>,
    d_minus_s: DMatrix<Complex64>,
}

impl HumEngine {
    pub fn new(model: &LinearModel, t_final: f64, dt: f64, weight: Option<f64>) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::domain(format!("control horizon must be positive, got {t_final}")));
        }
        let steps = step_count(t_final, dt)?;
        let flow = LinearFlow::new(model, dt)?;
        let mut observe = observation_matrix(model);
        let weighted = match weight {
            None => None,
            Some(s) => {
                let grid = model.grid();
                let d_minus_2s = dr_operator(grid, -2.0 * s);
                observe = d_minus_2s.matrix() * observe;
                // −∂ₜw + (L* − E_adj) w = 0 for w = D^{−s}u.
                let lw = flow.generator().adjoint().sub(&remainder_adjoint(s, &model.profile))?;
                let w_step = propagator(&lw, dt)?.into_matrix();
                Some(Weighted {
                    s,
                    w_step,
                    d_s: dr_operator(grid, s).into_matrix(),
                    d_minus_s: dr_operator(grid, -s).into_matrix(),
                })
            }
        };
        Ok(HumEngine {
            model: model.clone(),
            actuate: actuation_matrix(model),
            flow,
            steps,
            observe,
            weighted,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.model.grid()
    }

    pub fn dt(&self) -> f64 {
        self.flow.dt()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn flow(&self) -> &LinearFlow {
        &self.flow
    }

    /// Adjoint states `u_n`, `u_N = φ`.
    pub fn adjoint(&self, phi: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
        match &self.weighted {
            None => self.flow.adjoint_vectors(phi.clone(), self.steps),
            Some(w) => {
                let mut ws = vec![&w.d_minus_s * phi; self.steps + 1];
                for n in (0..self.steps).rev() {
                    ws[n] = &w.w_step * &ws[n + 1];
                }
                ws.iter().map(|x| &w.d_s * x).collect()
            }
        }
    }

    pub fn controls(&self, phi: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
        self.adjoint(phi).iter().map(|u| &self.observe * u).collect()
    }

    pub fn forcing(&self, k: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
        k.iter().map(|x| &self.actuate * x).collect()
    }

    /// `W(k)`: the state driven from zero by the control `k`.
    pub fn response(&self, k: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
        let f = self.forcing(k);
        self.flow
            .evolve_vectors(DVector::zeros(k[0].len()), Some(&f), self.steps)
    }

    /// `Λφ = W(k(φ))(T)`.
    pub fn gramian_apply(&self, phi: &DVector<Complex64>) -> DVector<Complex64> {
        let k = self.controls(phi);
        self.response(&k).pop().expect("nonempty trajectory")
    }

    pub fn signal(&self, phi: &DVector<Complex64>) -> Result<ControlSignal> {
        let values = self
            .controls(phi)
            .iter()
            .map(|k| {
                let mut f = from_vector(self.grid(), k);
                f.enforce_real();
                f
            })
            .collect();
        ControlSignal::new(self.dt(), values)
    }

    pub fn assemble(&self) -> Result<GramianMatrix> {
        let n = self.grid().mean_zero_dim();
        let cols: Vec<DVector<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = DVector::zeros(n);
                e[j] = Complex64::new(1.0, 0.0);
                self.gramian_apply(&e)
            })
            .collect();
        let m = DMatrix::from_columns(&cols);
        Ok(GramianMatrix {
            operator: DenseOperator::new(self.grid(), m)?,
            t_final: self.steps as f64 * self.dt(),
            dt: self.dt(),
            weight: self.weighted.as_ref().map(|w| w.s),
        })
    }

    /// `T·diag(B B*)` with `B` the actuation, the Jacobi preconditioner of the
    /// matrix-free path.
    pub fn preconditioner(&self) -> DVector<f64> {
        let b = &self.actuate * &self.observe;
        let t = self.steps as f64 * self.dt();
        DVector::from_iterator(b.nrows(), (0..b.nrows()).map(|i| (b[(i, i)].re * t).max(1e-300)))
    }
}

/// The observability Gramian `Λ` on the mean-zero modes.
#[derive(Debug, Clone)]
pub struct GramianMatrix {
    pub operator: DenseOperator,
    pub t_final: f64,
    pub dt: f64,
    /// Sobolev weight of the weighted variant, `None` for the `L²` pairing.
    pub weight: Option<f64>,
}

impl GramianMatrix {
    /// `‖Λ − Λ*‖ / ‖Λ‖`.
    pub fn symmetry_defect(&self) -> f64 {
        self.operator.hermitian_defect()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.operator.hermitian_eigen().0
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `⟨Λφ, φ⟩` in `L²`.
    pub fn quadratic_form(&self, phi: &SpectralField) -> Result<f64> {
        Ok(self.operator.apply(phi)?.dot(phi))
    }

    fn hermitian(&self) -> DMatrix<Complex64> {
        let m = self.operator.matrix();
        (m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }
}

/// Observability Gramian of the linear model over `[0, T]`, assembled column by
/// column from adjoint and forward solves.
pub fn gramian(model: &LinearModel, t_final: f64, dt: f64) -> Result<GramianMatrix> {
    HumEngine::new(model, t_final, dt, None)?.assemble()
}

/// Gramian of the `s`-weighted (`H^{−s}`/`H^s`) pairing.
pub fn weighted_gramian(model: &LinearModel, t_final: f64, dt: f64, s: f64) -> Result<GramianMatrix> {
    HumEngine::new(model, t_final, dt, Some(s))?.assemble()
}

/// Observation `k(t_n) = D^{l−1/2}G u(t_n)` of the adjoint solution with `u(T) = φ`.
pub fn control_from_adjoint(
    phi: &SpectralField,
    model: &LinearModel,
    t_final: f64,
    dt: f64,
) -> Result<ControlSignal> {
    if phi.grid() != model.grid() {
        return Err(Error::dim("terminal data and model live on different grids"));
    }
    crate::linear::require_mean_zero(phi, "adjoint terminal data")?;
    HumEngine::new(model, t_final, dt, None)?.signal(&to_vector(phi))
}

/// Linear state driven by `signal` from `v0`.
pub fn steer_linear(model: &LinearModel, v0: &SpectralField, signal: &ControlSignal) -> Result<Trajectory> {
    let f = signal.forcing(model)?;
    LinearFlow::new(model, signal.dt())?.evolve(v0, Some(&f), signal.steps())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GramianMethod {
    /// Cholesky on the assembled Gramian for `dim ≤ 128`, CG beyond.
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumOptions {
    pub method: GramianMethod,
    pub cg_tol: f64,
    pub cg_max_iterations: usize,
}

impl Default for HumOptions {
    fn default() -> Self {
        HumOptions {
            method: GramianMethod::Auto,
            cg_tol: 1e-13,
            cg_max_iterations: 2000,
        }
    }
}

/// Solver for `Λφ = b`, factored once and reused.
pub(crate) enum GramianSolver<'a> {
    Direct(Cholesky<Complex64, Dyn>),
    Iterative {
        engine: &'a HumEngine,
        precond: DVector<f64>,
        tol: f64,
        max_iterations: usize,
    },
}

impl<'a> GramianSolver<'a> {
    pub fn new(engine: &'a HumEngine, opts: &HumOptions) -> Result<Self> {
        let dim = engine.grid().mean_zero_dim();
        let direct = match opts.method {
            GramianMethod::Auto => dim <= 128,
            GramianMethod::Direct => true,
            GramianMethod::ConjugateGradient => false,
        };
        if direct {
            let g = engine.assemble()?;
            let lambda_min = g.lambda_min();
            let chol = Cholesky::new(g.hermitian()).ok_or_else(|| Error::IllConditioned {
                lambda_min,
                reason: "Gramian is not positive definite".into(),
            })?;
            if !(lambda_min > 0.0) {
                return Err(Error::IllConditioned {
                    lambda_min,
                    reason: "Gramian has a nonpositive eigenvalue".into(),
                });
            }
            Ok(GramianSolver::Direct(chol))
        } else {
            Ok(GramianSolver::Iterative {
                engine,
                precond: engine.preconditioner(),
                tol: opts.cg_tol,
                max_iterations: opts.cg_max_iterations,
            })
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            GramianSolver::Direct(_) => "cholesky",
            GramianSolver::Iterative { .. } => "pcg",
        }
    }

    /// Returns `φ` and the CG iteration count (0 for the direct path).
    pub fn solve(&self, b: &DVector<Complex64>) -> Result<(DVector<Complex64>, usize)> {
        match self {
            GramianSolver::Direct(chol) => Ok((chol.solve(b), 0)),
            GramianSolver::Iterative {
                engine,
                precond,
                tol,
                max_iterations,
            } => pcg(|x| engine.gramian_apply(x), precond, b, *tol, *max_iterations),
        }
    }
}

/// Minimum-energy linear control and its resimulation check.
#[derive(Debug, Clone)]
pub struct LinearControl {
    pub signal: ControlSignal,
    /// Adjoint terminal data `φ` solving `Λφ = v_T − S(T)v₀`.
    pub phi: SpectralField,
    /// `‖v(T) − v_T‖_s / max(‖v_T‖_s, 1e−14)` from a forward resimulation.
    pub endpoint_error: f64,
    pub method: &'static str,
    pub cg_iterations: usize,
    pub trajectory: Trajectory,
}

fn check_pair(model: &LinearModel, v0: &SpectralField, vt: &SpectralField) -> Result<()> {
    if v0.grid() != model.grid() || vt.grid() != model.grid() {
        return Err(Error::dim("control data and model live on different grids"));
    }
    crate::linear::require_mean_zero(v0, "initial state")?;
    crate::linear::require_mean_zero(vt, "target state")
}

/// Steers `v0` to `vT` in time `T` with the HUM control.
pub fn solve_linear_control(
    model: &LinearModel,
    v0: &SpectralField,
    vt: &SpectralField,
    t_final: f64,
    dt: f64,
    s: f64,
) -> Result<LinearControl> {
    solve_linear_control_with(model, v0, vt, t_final, dt, s, None, &HumOptions::default())
}

/// As [`solve_linear_control`], optionally in the `s`-weighted pairing
/// (`weight = Some(s)`), with explicit solver options.
#[allow(clippy::too_many_arguments)]
pub fn solve_linear_control_with(
    model: &LinearModel,
    v0: &SpectralField,
    vt: &SpectralField,
    t_final: f64,
    dt: f64,
    s: f64,
    weight: Option<f64>,
    opts: &HumOptions,
) -> Result<LinearControl> {
    check_pair(model, v0, vt)?;
    let engine = HumEngine::new(model, t_final, dt, weight)?;
    let steps = engine.steps();
    let free = engine.flow().evolve_vectors(to_vector(v0), None, steps);
    let b = to_vector(vt) - &free[steps];
    let (phi, signal, method, iterations) = if b.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        let zero = DVector::zeros(b.len());
        (zero.clone(), engine.signal(&zero)?, "trivial", 0)
    } else {
        let solver = GramianSolver::new(&engine, opts)?;
        let (phi, it) = solver.solve(&b)?;
        let mut field = from_vector(model.grid(), &phi);
        field.enforce_real();
        let phi = to_vector(&field);
        (phi.clone(), engine.signal(&phi)?, solver.method_name(), it)
    };
    let trajectory = steer_linear(model, v0, &signal)?;
    let err = sobolev_norm(&(trajectory.last() - vt), s);
    Ok(LinearControl {
        endpoint_error: err / sobolev_norm(vt, s).max(1e-14),
        phi: from_vector(model.grid(), &phi),
        signal,
        method,
        cg_iterations: iterations,
        trajectory,
    })
}

/// The `s`-weighted control of the `H^{−s}`/`H^s` duality: minimizes
/// `Σ wₙ dt ‖D^s k(t_n)‖²` among controls that reach the target.
pub fn solve_weighted_control(
    model: &LinearModel,
    v0: &SpectralField,
    vt: &SpectralField,
    t_final: f64,
    dt: f64,
    s: f64,
) -> Result<LinearControl> {
    solve_linear_control_with(model, v0, vt, t_final, dt, s, Some(s), &HumOptions::default())
}

/// Physical control `h(t_n) = −D^{2l−1}G u(t_n) + D^{l−1/2}k(t_n)` along a
/// controlled trajectory; the feedback part is present only when the model has
/// feedback on.
pub fn physical_control(
    model: &LinearModel,
    trajectory: &Trajectory,
    signal: &ControlSignal,
) -> Result<Vec<SpectralField>> {
    if trajectory.len() != signal.values().len() || trajectory.grid() != model.grid() {
        return Err(Error::dim("trajectory and signal do not match"));
    }
    let gain = model.gain();
    trajectory
        .states()
        .iter()
        .zip(signal.values())
        .map(|(u, k)| {
            let mut h = crate::spectral::dr(k, gain);
            if model.feedback_on {
                let gu = crate::control::apply_g_op(u, &model.profile)?;
                h -= &crate::spectral::dr(&gu, 2.0 * gain);
            }
            Ok(h)
        })
        .collect()
}

/// Spectral summary of the Gramian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub t_final: f64,
    pub dt: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition_number: f64,
    /// `Ĉ = 1/λ_min`, the observed observability constant.
    pub observability_constant: f64,
    /// Wavenumber carrying most of the weight of the `λ_min` eigenvector.
    pub worst_mode: i64,
    pub symmetry_defect: f64,
    pub eigenvalues: Vec<f64>,
}

pub fn observability_report(model: &LinearModel, t_final: f64, dt: f64) -> Result<ObservabilityReport> {
    let g = gramian(model, t_final, dt)?;
    let (values, vectors) = g.operator.hermitian_eigen();
    let grid = model.grid();
    let v0 = vectors.column(0);
    let mut weight = vec![0.0; grid.n_modes() + 1];
    for i in 0..grid.mean_zero_dim() {
        weight[grid.mean_zero_wavenumber(i).unsigned_abs() as usize] += v0[i].norm_sqr();
    }
    let worst_mode = (1..weight.len())
        .max_by(|&a, &b| weight[a].total_cmp(&weight[b]))
        .unwrap_or(1) as i64;
    let lambda_min = values[0];
    let lambda_max = *values.last().expect("nonempty spectrum");
    Ok(ObservabilityReport {
        t_final: g.t_final,
        dt,
        lambda_min,
        lambda_max,
        condition_number: lambda_max / lambda_min,
        observability_constant: 1.0 / lambda_min,
        worst_mode,
        symmetry_defect: g.symmetry_defect(),
        eigenvalues: values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlProfile;

    #[test]
    fn trapezoid_weights_sum_to_horizon() {
        let n = 10;
        let s: f64 = (0..=n).map(|i| trap_weight(i, n)).sum();
        assert_eq!(s, n as f64);
    }

    #[test]
    fn zero_signal_and_zero_target() {
        let grid = PeriodicGrid::new(4).unwrap();
        let model = LinearModel::new(ControlProfile::bump(&grid, 3.0, 1.5).unwrap());
        let z = SpectralField::zeros(&grid);
        let k = control_from_adjoint(&z, &model, 0.1, 0.01).unwrap();
        assert!(k.is_zero() && k.steps() == 10);
        let c = solve_linear_control(&model, &z, &z, 0.1, 0.01, 2.5).unwrap();
        assert!(c.signal.is_zero());
        assert_eq!(c.endpoint_error, 0.0);
    }

    #[test]
    fn signal_rejects_mean() {
        let grid = PeriodicGrid::new(4).unwrap();
        let e = ControlSignal::new(0.1, vec![SpectralField::constant(&grid, 1.0)]);
        assert!(matches!(e, Err(Error::Domain(_))));
    }
}
