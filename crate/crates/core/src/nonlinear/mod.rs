//! The controlled nonlinear equation `∂ₜu + Lu + N(u) = F`.

pub(crate) mod picard;

pub use picard::{picard_solve, PicardOptions, PicardReport};

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{phi_functions, step_count, LinearFlow, LinearModel};
use crate::operator::{from_vector, to_vector};
use crate::spectral::{
    deriv, sobolev_norm, unit_interval_norms, PeriodicGrid, SpectralField, Trajectory,
};

/// Nonlinearity `c₀uuₓ + c₁u²uₓ + c₂uₓuₓₓ + c₃uuₓₓₓ`, or the hierarchy term
/// `u∂ₓ^{2l−1}u` when `hierarchy_term` is set and `l > 2` (the `c`'s are then unused).
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearModel {
    pub linear: LinearModel,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub hierarchy_term: bool,
}

impl NonlinearModel {
    pub fn new(linear: LinearModel, c: [f64; 4]) -> Self {
        NonlinearModel {
            linear,
            c0: c[0],
            c1: c[1],
            c2: c[2],
            c3: c[3],
            hierarchy_term: false,
        }
    }

    /// Fifth-order KdV: `−30u²uₓ + 20uₓuₓₓ + 10uuₓₓₓ`.
    pub fn kdv5(linear: LinearModel) -> Self {
        Self::new(linear, [0.0, -30.0, 20.0, 10.0])
    }

    /// `u∂ₓ³u`, the nonlinearity of the closed-loop model.
    pub fn kawahara_like(linear: LinearModel) -> Self {
        Self::new(linear, [0.0, 0.0, 0.0, 1.0])
    }

    /// Order-`l` model with the single nonlinearity `u∂ₓ^{2l−1}u`.
    pub fn hierarchy(linear: LinearModel) -> Self {
        let mut m = Self::new(linear, [0.0; 4]);
        m.hierarchy_term = true;
        m
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.linear.grid()
    }

    pub fn uses_hierarchy(&self) -> bool {
        self.hierarchy_term && self.linear.order_l > 2
    }

    pub fn validate(&self) -> Result<()> {
        self.linear.validate()?;
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Model for `ũ = u − m`: the terms linear in `ũ` move into `L`.
    pub fn shifted(&self, m: f64) -> NonlinearModel {
        let mut out = self.clone();
        if m == 0.0 {
            return out;
        }
        if self.uses_hierarchy() {
            out.linear.beta_high += m;
        } else {
            out.linear.beta1 += self.c0 * m + self.c1 * m * m;
            out.linear.beta0 += self.c3 * m;
            out.c0 += 2.0 * self.c1 * m;
        }
        out
    }
}

/// `N(u)`, with every product formed on the padded grid and truncated to the
/// retained band. The padded grid has more than `4K` points, so the cubic term is
/// alias-free as well.
pub fn nonlinearity(u: &SpectralField, model: &NonlinearModel) -> Result<SpectralField> {
    if u.grid() != model.grid() {
        return Err(Error::dim("field and model live on different grids"));
    }
    let grid = u.grid();
    let us = u.padded_samples();
    let prod: Vec<f64> = if model.uses_hierarchy() {
        let d = deriv(u, 2 * model.linear.order_l - 1).padded_samples();
        us.iter().zip(&d).map(|(a, b)| a * b).collect()
    } else {
        let ux = deriv(u, 1).padded_samples();
        let uxx = if model.c2 != 0.0 {
            deriv(u, 2).padded_samples()
        } else {
            vec![0.0; us.len()]
        };
        let uxxx = if model.c3 != 0.0 {
            deriv(u, 3).padded_samples()
        } else {
            vec![0.0; us.len()]
        };
        (0..us.len())
            .map(|j| {
                let (u, ux) = (us[j], ux[j]);
                model.c0 * u * ux
                    + model.c1 * u * u * ux
                    + model.c2 * ux * uxx[j]
                    + model.c3 * u * uxxx[j]
            })
            .collect()
    };
    Ok(SpectralField::from_padded_samples(grid, &prod))
}

/// Knobs of the nonlinear stepper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Sobolev index used for the small-data check and the blow-up guard.
    pub s: f64,
    /// Small-data radius; larger data only triggers a warning.
    pub rho: f64,
    /// Abort once `‖ũ(t)‖_s` exceeds this multiple of the data size.
    pub blowup_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            s: 2.5,
            rho: 1e-2,
            blowup_factor: 1e3,
        }
    }
}

/// Linear propagator and nonlinearity of the mean-shifted problem, on
/// mean-zero coefficient vectors.
#[derive(Debug, Clone)]
pub struct NonlinearFlow {
    model: NonlinearModel,
    shifted: NonlinearModel,
    mean: f64,
    linear: LinearFlow,
    phi1: DMatrix<Complex64>,
    phi2: DMatrix<Complex64>,
}

impl NonlinearFlow {
    pub fn new(model: &NonlinearModel, mean: f64, dt: f64) -> Result<Self> {
        model.validate()?;
        let shifted = model.shifted(mean);
        let linear = LinearFlow::new(&shifted.linear, dt)?;
        let (p1, p2) = phi_functions(linear.generator(), dt)?;
        let h = Complex64::new(dt, 0.0);
        Ok(NonlinearFlow {
            model: model.clone(),
            shifted,
            mean,
            linear,
            phi1: p1 * h,
            phi2: p2 * h,
        })
    }

    pub fn model(&self) -> &NonlinearModel {
        &self.model
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn linear(&self) -> &LinearFlow {
        &self.linear
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.model.grid()
    }

    pub fn dt(&self) -> f64 {
        self.linear.dt()
    }

    /// Shifted nonlinearity on a mean-zero coefficient vector.
    pub fn apply_vec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let u = from_vector(self.grid(), x);
        // Both sides live on one grid, so this cannot fail.
        to_vector(&nonlinearity(&u, &self.shifted).expect("grid checked at construction"))
    }

    pub fn apply_all(&self, xs: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
        xs.par_iter().map(|x| self.apply_vec(x)).collect()
    }

    /// `S x_n` plus the trapezoid Duhamel term of the forcing, exactly as in the
    /// linear flow.
    fn linear_step(
        &self,
        x: &DVector<Complex64>,
        forcing: Option<&[DVector<Complex64>]>,
        n: usize,
    ) -> DVector<Complex64> {
        let s_mat = self.linear.step_matrix();
        match forcing {
            None => s_mat * x,
            Some(f) => {
                let half = Complex64::new(0.5 * self.dt(), 0.0);
                s_mat * (x + &f[n] * half) + &f[n + 1] * half
            }
        }
    }

    /// Second-order exponential time differencing for the nonlinearity:
    /// `x_{n+1} = a_n − dtφ₁N_n − dtφ₂(N(p_n) − N_n)` with predictor
    /// `p_n = a_n − dtφ₁N_n`, where `a_n` is the linear step.
    pub fn evolve_vectors(
        &self,
        x0: DVector<Complex64>,
        forcing: Option<&[DVector<Complex64>]>,
        steps: usize,
        blowup: Option<(f64, f64)>,
    ) -> Result<Vec<DVector<Complex64>>> {
        let dt = self.dt();
        let mut out = Vec::with_capacity(steps + 1);
        let mut n_cur = self.apply_vec(&x0);
        out.push(x0);
        for n in 0..steps {
            let a = self.linear_step(&out[n], forcing, n);
            let predicted = &a - &self.phi1 * &n_cur;
            let n_pred = self.apply_vec(&predicted);
            let next = predicted - &self.phi2 * (n_pred - &n_cur);
            if let Some((s, limit)) = blowup {
                let norm = sobolev_norm(&from_vector(self.grid(), &next), s);
                if !(norm <= limit) {
                    return Err(Error::Divergence {
                        time: (n + 1) as f64 * dt,
                        norm,
                        limit,
                    });
                }
            }
            n_cur = self.apply_vec(&next);
            out.push(next);
        }
        Ok(out)
    }

    /// Discrete Duhamel integral `ω_{n+1} = Sω_n + dtφ₁r_n + dtφ₂(r_{n+1} − r_n)`,
    /// `ω_0 = 0`: the exact integral of the piecewise-linear interpolant of `r`.
    pub fn duhamel(&self, r: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
        let s_mat = self.linear.step_matrix();
        let mut out = Vec::with_capacity(r.len());
        out.push(DVector::zeros(r[0].len()));
        for n in 0..r.len() - 1 {
            let next = s_mat * &out[n] + &self.phi1 * &r[n] + &self.phi2 * (&r[n + 1] - &r[n]);
            out.push(next);
        }
        out
    }

    /// Free (forced linear) trajectory from `x0`.
    pub fn linear_vectors(
        &self,
        x0: DVector<Complex64>,
        forcing: Option<&[DVector<Complex64>]>,
        steps: usize,
    ) -> Vec<DVector<Complex64>> {
        self.linear.evolve_vectors(x0, forcing, steps)
    }

    /// Fields `m + ũ` from shifted state vectors.
    pub fn to_trajectory(&self, xs: &[DVector<Complex64>]) -> Result<Trajectory> {
        let states = xs
            .iter()
            .map(|x| {
                let mut u = from_vector(self.grid(), x);
                u.set_coeff(0, Complex64::new(self.mean, 0.0));
                u
            })
            .collect();
        Trajectory::new(self.dt(), states)
    }
}

pub(crate) fn check_real(u: &SpectralField, what: &str) -> Result<()> {
    if !u.is_real(1e-12) {
        return Err(Error::domain(format!("{what} is not real-valued")));
    }
    Ok(())
}

/// Validated forcing samples as mean-zero vectors; the forcing must not move the mean.
pub(crate) fn forcing_vectors(
    grid: &PeriodicGrid,
    forcing: Option<&[SpectralField]>,
    steps: usize,
) -> Result<Option<Vec<DVector<Complex64>>>> {
    let Some(f) = forcing else { return Ok(None) };
    if f.len() != steps + 1 {
        return Err(Error::dim(format!(
            "forcing has {} samples, expected {}",
            f.len(),
            steps + 1
        )));
    }
    for x in f {
        if x.grid() != grid {
            return Err(Error::dim("forcing and model live on different grids"));
        }
        if x.mean().abs() > 1e-12 * x.max_abs().max(1.0) {
            return Err(Error::domain(format!(
                "forcing must preserve volume, got mean {:e}",
                x.mean()
            )));
        }
    }
    Ok(Some(f.iter().map(to_vector).collect()))
}

pub(crate) fn warn_if_large(u0: &SpectralField, opts: &SolverOptions) {
    let size = sobolev_norm(&u0.project_mean_zero(), opts.s);
    if size > opts.rho {
        warn!(
            "initial data has ‖u0 − [u0]‖_{} = {size:.3e}, above the small-data radius {:.3e}",
            opts.s, opts.rho
        );
    }
}

/// Solves `∂ₜu + Lu + N(u) = F`, `u(0) = u0`, on `[0, T]`. Feedback is on when the
/// linear model says so; `forcing` holds `F(t_n)` for `n = 0..=T/dt` and must be
/// mean-zero (open-loop controls of the form `Gh` are).
pub fn evolve_nonlinear(
    model: &NonlinearModel,
    u0: &SpectralField,
    forcing: Option<&[SpectralField]>,
    t_final: f64,
    dt: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if u0.grid() != model.grid() {
        return Err(Error::dim("initial data and model live on different grids"));
    }
    check_real(u0, "initial data")?;
    let steps = step_count(t_final, dt)?;
    let f = forcing_vectors(model.grid(), forcing, steps)?;
    warn_if_large(u0, opts);
    let flow = NonlinearFlow::new(model, u0.mean(), dt)?;
    let x0 = to_vector(u0);
    let data = sobolev_norm(&u0.project_mean_zero(), opts.s)
        + forcing.map_or(0.0, |f| {
            f.iter().map(|x| sobolev_norm(x, opts.s)).sum::<f64>() * dt
        });
    let guard = (data > 0.0).then_some((opts.s, opts.blowup_factor * data));
    let xs = flow.evolve_vectors(x0, f.as_deref(), steps, guard)?;
    flow.to_trajectory(&xs)
}

/// Fitted decay of `‖u(t) − [u₀]‖_s` along a nonlinear trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearDecay {
    pub rate: f64,
    pub c_hat: f64,
    pub final_ratio: f64,
    /// False when the norm did not fall below half its initial value, so the
    /// rate carries no sign information beyond "not decaying".
    pub conclusive: bool,
    pub window: (f64, f64),
}

/// Mean-zero part of every state.
pub fn fluctuation(traj: &Trajectory) -> Result<Trajectory> {
    Trajectory::new(
        traj.dt(),
        traj.states().iter().map(|u| u.project_mean_zero()).collect(),
    )
}

pub fn measure_decay(traj: &Trajectory, s: f64) -> Result<NonlinearDecay> {
    let norms = fluctuation(traj)?.norms(s);
    if norms[0] == 0.0 {
        return Err(Error::InconclusiveDecay("trajectory is identically constant".into()));
    }
    if norms.len() < 3 {
        return Err(Error::InconclusiveDecay("trajectory too short to fit".into()));
    }
    let final_ratio = norms[norms.len() - 1] / norms[0];
    let (rate, c_hat, t0) = crate::linear::tail_fit(&norms, traj.dt());
    Ok(NonlinearDecay {
        rate,
        c_hat,
        final_ratio,
        conclusive: final_ratio < 0.5,
        window: (t0, traj.t_final()),
    })
}

/// `e^{nλ/2}⫴ũ⫴_n` over the unit intervals `[n, n+1]` of the trajectory.
pub fn weighted_interval_norms(traj: &Trajectory, s: f64, rate: f64) -> Result<Vec<f64>> {
    Ok(unit_interval_norms(&fluctuation(traj)?, s)
        .into_iter()
        .enumerate()
        .map(|(n, b)| (0.5 * n as f64 * rate).exp() * b)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlProfile;
    use std::f64::consts::PI;

    fn model(k: usize, c: [f64; 4]) -> NonlinearModel {
        let grid = PeriodicGrid::new(k).unwrap();
        NonlinearModel::new(LinearModel::new(ControlProfile::uniform(&grid)), c)
    }

    fn sine(grid: &PeriodicGrid, k: i64, a: f64) -> SpectralField {
        let c = Complex64::new(0.0, -0.5 * a);
        SpectralField::from_modes(grid, &[(k, c), (-k, c.conj())]).unwrap()
    }

    #[test]
    fn product_to_sum_cases() {
        let m = model(8, [1.0, 0.0, 0.0, 0.0]);
        let u = sine(m.grid(), 1, 1.0);
        let n = nonlinearity(&u, &m).unwrap();
        let want = sine(m.grid(), 2, 0.5);
        assert!((&n - &want).max_abs() < 1e-15);
        let m = model(8, [0.0, 0.0, 0.0, 1.0]);
        let n = nonlinearity(&u, &m).unwrap();
        assert!((&n + &want).max_abs() < 1e-15);
    }

    #[test]
    fn shift_moves_linear_terms_into_generator() {
        let m = model(8, [0.5, -30.0, 20.0, 10.0]);
        let mean = 0.3;
        let sh = m.shifted(mean);
        let u = SpectralField::from_fn(m.grid(), |x| 0.2 * x.cos() + 0.1 * (3.0 * x).sin());
        let mut full = u.clone();
        full.set_coeff(0, Complex64::new(mean, 0.0));
        let lhs = nonlinearity(&full, &m).unwrap().project_mean_zero();
        let lin = &(&deriv(&u, 1) * (sh.linear.beta1)) + &(&deriv(&u, 3) * sh.linear.beta0);
        let rhs = &nonlinearity(&u, &sh).unwrap().project_mean_zero() + &lin;
        assert!((&lhs - &rhs).max_abs() < 1e-13);
    }

    #[test]
    fn hierarchy_needs_higher_order() {
        let grid = PeriodicGrid::new(8).unwrap();
        let lin = LinearModel::new(ControlProfile::uniform(&grid));
        let h2 = NonlinearModel::hierarchy(lin.clone());
        assert!(!h2.uses_hierarchy());
        let h3 = NonlinearModel::hierarchy(lin.with_order(3));
        assert!(h3.uses_hierarchy());
        let u = sine(&grid, 1, 1.0);
        // u ∂⁵u = sin x cos x for u = sin x.
        let n = nonlinearity(&u, &h3).unwrap();
        let want = sine(&grid, 2, 0.5);
        assert!((&n - &want).max_abs() < 1e-15);
        assert_eq!(h3.shifted(0.5).linear.beta_high, 0.5);
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = model(8, [0.0, -30.0, 20.0, 10.0]);
        let u0 = SpectralField::zeros(m.grid());
        let traj = evolve_nonlinear(&m, &u0, None, 0.1, 0.01, &SolverOptions::default()).unwrap();
        assert!(traj.states().iter().all(|u| u.is_zero()));
        assert!(matches!(
            measure_decay(&traj, 2.5),
            Err(Error::InconclusiveDecay(_))
        ));
    }

    #[test]
    fn blowup_guard_trips() {
        let grid = PeriodicGrid::new(8).unwrap();
        let lin = LinearModel::new(ControlProfile::bump(&grid, PI, 1.0).unwrap()).with_feedback(false);
        let m = NonlinearModel::new(lin, [0.0, 0.0, 0.0, 1.0]);
        let u0 = SpectralField::from_fn(&grid, |x| 3.0 * x.sin() + 2.0 * (2.0 * x).cos());
        let opts = SolverOptions {
            blowup_factor: 0.5,
            ..SolverOptions::default()
        };
        let err = evolve_nonlinear(&m, &u0, None, 1.0, 1e-2, &opts).unwrap_err();
        match err {
            Error::Divergence { time, norm, limit } => {
                assert!((time - 1e-2).abs() < 1e-15 && norm > limit);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn mean_changing_forcing_is_rejected() {
        let m = model(4, [0.0, 0.0, 0.0, 1.0]);
        let u0 = SpectralField::from_fn(m.grid(), |x| 1e-3 * x.sin());
        let f = vec![SpectralField::constant(m.grid(), 1.0); 3];
        let err = evolve_nonlinear(&m, &u0, Some(&f), 0.2, 0.1, &SolverOptions::default());
        assert!(matches!(err, Err(Error::Domain(_))));
    }
}
