use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_real, forcing_vectors, warn_if_large, NonlinearFlow, NonlinearModel};
use crate::error::{Error, Result};
use crate::linear::step_count;
use crate::operator::{from_vector, to_vector};
use crate::spectral::{sobolev_norm, sobolev_norm_sq, trapezoid, PeriodicGrid, SpectralField, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub s: f64,
    /// Stop once successive iterates are closer than this in discrete `Z_{s,T}`.
    pub tol: f64,
    pub max_iterations: usize,
    pub rho: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            s: 2.5,
            tol: 1e-12,
            max_iterations: 50,
            rho: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// `Z_{s,T}` distance between iterate `j` and `j − 1`.
    pub distances: Vec<f64>,
    /// Successive distance ratios, the observed contraction factors.
    pub ratios: Vec<f64>,
}

/// Discrete `Z_{s,T}` norm of a trajectory of mean-zero vectors.
pub(crate) fn zst_vectors(
    grid: &PeriodicGrid,
    xs: &[DVector<Complex64>],
    dt: f64,
    s: f64,
    gain: f64,
) -> f64 {
    let fields: Vec<SpectralField> = xs.iter().map(|x| from_vector(grid, x)).collect();
    let sup = fields.iter().map(|u| sobolev_norm(u, s)).fold(0.0, f64::max);
    let sq: Vec<f64> = fields.iter().map(|u| sobolev_norm_sq(u, s + gain)).collect();
    sup + trapezoid(&sq, dt).max(0.0).sqrt()
}

/// Tracks successive iterate distances and flags non-contraction.
#[derive(Debug, Default)]
pub(crate) struct ContractionMonitor {
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    run: usize,
}

impl ContractionMonitor {
    /// Records a distance; returns true once three consecutive ratios are `≥ 1`.
    pub fn push(&mut self, d: f64) -> bool {
        if let Some(&prev) = self.distances.last() {
            let r = if prev > 0.0 { d / prev } else { f64::INFINITY };
            self.ratios.push(r);
            self.run = if r >= 1.0 { self.run + 1 } else { 0 };
        }
        self.distances.push(d);
        self.run >= 3 || !d.is_finite()
    }
}

/// Fixed point of the discrete Duhamel map
/// `Γ(v) = S(·)u0 + W_F − ω(v)`, with `ω` the Duhamel integral of the
/// piecewise-linear interpolant of `N(v)`, iterated from the free flow.
pub fn picard_solve(
    model: &NonlinearModel,
    u0: &SpectralField,
    forcing: Option<&[SpectralField]>,
    t_final: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<PicardReport> {
    if u0.grid() != model.grid() {
        return Err(Error::dim("initial data and model live on different grids"));
    }
    check_real(u0, "initial data")?;
    let steps = step_count(t_final, dt)?;
    let f = forcing_vectors(model.grid(), forcing, steps)?;
    warn_if_large(
        u0,
        &super::SolverOptions {
            s: opts.s,
            rho: opts.rho,
            ..Default::default()
        },
    );
    let flow = NonlinearFlow::new(model, u0.mean(), dt)?;
    let grid = model.grid().clone();
    let gain = model.linear.gain();
    let x0 = to_vector(u0);
    let base = flow.linear_vectors(x0, f.as_deref(), steps);
    let gamma = |v: &[DVector<Complex64>]| -> Vec<DVector<Complex64>> {
        let w = flow.duhamel(&flow.apply_all(v));
        base.iter().zip(&w).map(|(a, b)| a - b).collect()
    };
    let mut v = base.clone();
    let mut monitor = ContractionMonitor::default();
    for it in 1..=opts.max_iterations {
        let next = gamma(&v);
        let diff: Vec<DVector<Complex64>> = next.iter().zip(&v).map(|(a, b)| a - b).collect();
        let d = zst_vectors(&grid, &diff, dt, opts.s, gain);
        let stalled = monitor.push(d);
        v = next;
        if d < opts.tol {
            return Ok(PicardReport {
                trajectory: flow.to_trajectory(&v)?,
                iterations: it,
                distances: monitor.distances,
                ratios: monitor.ratios,
            });
        }
        if stalled {
            return Err(Error::Convergence {
                iterations: it,
                reason: format!(
                    "Duhamel map is not contracting (last ratios {:?})",
                    &monitor.ratios[monitor.ratios.len().saturating_sub(3)..]
                ),
            });
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
