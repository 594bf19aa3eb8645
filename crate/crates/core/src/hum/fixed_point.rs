use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ControlSignal, GramianSolver, HumEngine, HumOptions};
use crate::error::{Error, Result};
use crate::nonlinear::picard::{zst_vectors, ContractionMonitor};
use crate::nonlinear::{check_real, NonlinearFlow, NonlinearModel};
use crate::operator::to_vector;
use crate::spectral::{sobolev_norm, SpectralField, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearControlOptions {
    pub s: f64,
    /// Stop once successive iterates are closer than this in discrete `Z_{s,T}`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Relaxation `θ` in `v ← (1 − θ)v + θΓ(v)`.
    pub relaxation: f64,
    /// Smallness threshold for `‖u0‖_s + ‖u_T‖_s`; exceeding it only warns.
    pub rho: f64,
    pub hum: HumOptions,
}

impl Default for NonlinearControlOptions {
    fn default() -> Self {
        NonlinearControlOptions {
            s: 2.5,
            tol: 1e-10,
            max_iterations: 30,
            relaxation: 1.0,
            rho: 1e-2,
            hum: HumOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearControl {
    pub signal: ControlSignal,
    /// Resimulation of the controlled nonlinear equation.
    pub trajectory: Trajectory,
    /// `‖u(T) − u_T‖_s` of the resimulation.
    pub endpoint_error: f64,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub method: &'static str,
}

/// Exact control of the nonlinear equation by the fixed point
/// `Γ(v) = S(·)u0 − ω(v) + W(k(Λ⁻¹(u_T − S(T)u0 + ω(v)(T))))`,
/// where `ω` is the discrete Duhamel integral of the nonlinearity and `W(k)` the
/// linear response to the HUM control `k`. Nonzero volumes are handled by
/// shifting to the mean; `u0` and `u_T` must share it.
pub fn solve_nonlinear_control(
    model: &NonlinearModel,
    u0: &SpectralField,
    ut: &SpectralField,
    t_final: f64,
    dt: f64,
    opts: &NonlinearControlOptions,
) -> Result<NonlinearControl> {
    if u0.grid() != model.grid() || ut.grid() != model.grid() {
        return Err(Error::dim("control data and model live on different grids"));
    }
    check_real(u0, "initial state")?;
    check_real(ut, "target state")?;
    let mean = u0.mean();
    if (ut.mean() - mean).abs() > 1e-12 * mean.abs().max(1.0) {
        return Err(Error::domain(format!(
            "the volume is conserved: initial mean {} cannot be steered to {}",
            mean,
            ut.mean()
        )));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::domain(format!("relaxation must lie in (0, 1], got {}", opts.relaxation)));
    }
    let x0 = to_vector(u0);
    let xt = to_vector(ut);
    let delta = sobolev_norm(&u0.project_mean_zero(), opts.s) + sobolev_norm(&ut.project_mean_zero(), opts.s);
    if delta > opts.rho {
        log::warn!(
            "data size {:.3e} exceeds the smallness threshold {:.3e}; the fixed point may not contract",
            delta,
            opts.rho
        );
    }
    let flow = NonlinearFlow::new(model, mean, dt)?;
    let linear = flow.linear().model().clone();
    let engine = HumEngine::new(&linear, t_final, dt, None)?;
    let steps = engine.steps();
    let grid = model.grid().clone();
    let gain = linear.gain();
    let base = flow.linear_vectors(x0.clone(), None, steps);
    let solver = GramianSolver::new(&engine, &opts.hum)?;
    let theta = Complex64::new(opts.relaxation, 0.0);

    let control_for = |v: &[DVector<Complex64>]| -> Result<(Vec<DVector<Complex64>>, DVector<Complex64>)> {
        let omega = flow.duhamel(&flow.apply_all(v));
        let b = &xt - &base[steps] + &omega[steps];
        let (phi, _) = solver.solve(&b)?;
        let k = engine.controls(&phi);
        let w = engine.response(&k);
        let next = base
            .iter()
            .zip(&omega)
            .zip(&w)
            .map(|((a, o), w)| a - o + w)
            .collect();
        Ok((next, phi))
    };

    let mut v = vec![DVector::zeros(x0.len()); steps + 1];
    let mut monitor = ContractionMonitor::default();
    for it in 1..=opts.max_iterations {
        let (next, phi) = control_for(&v)?;
        let relaxed: Vec<DVector<Complex64>> = next
            .iter()
            .zip(&v)
            .map(|(n, o)| o + (n - o) * theta)
            .collect();
        let diff: Vec<DVector<Complex64>> = relaxed.iter().zip(&v).map(|(a, b)| a - b).collect();
        let d = zst_vectors(&grid, &diff, dt, opts.s, gain);
        let stalled = monitor.push(d);
        v = relaxed;
        if d < opts.tol {
            let signal = engine.signal(&phi)?;
            let f: Vec<DVector<Complex64>> =
                signal.values().iter().map(to_vector).collect();
            let xs = flow.evolve_vectors(x0, Some(&engine.forcing(&f)), steps, None)?;
            let trajectory = flow.to_trajectory(&xs)?;
            let endpoint_error = sobolev_norm(&(trajectory.last() - ut), opts.s);
            return Ok(NonlinearControl {
                signal,
                trajectory,
                endpoint_error,
                iterations: it,
                distances: monitor.distances,
                ratios: monitor.ratios,
                method: solver.method_name(),
            });
        }
        if stalled {
            return Err(Error::SmallDataViolation(format!(
                "control fixed point is not contracting after {it} iterations (data size {delta:.3e}, ratios {:?})",
                &monitor.ratios[monitor.ratios.len().saturating_sub(3)..]
            )));
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        reason: format!(
            "iterate distance {:.3e} still above tol {:.3e}",
            monitor.distances.last().copied().unwrap_or(f64::NAN),
            opts.tol
        ),
    })
}
