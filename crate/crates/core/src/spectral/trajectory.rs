use super::field::SpectralField;
use super::grid::PeriodicGrid;
use super::norms::sobolev_norm;
use crate::error::{Error, Result};

/// States `u(t_n)` at `t_n = n·dt` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: PeriodicGrid,
    dt: f64,
    states: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(dt: f64, states: Vec<SpectralField>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        let first = states
            .first()
            .ok_or_else(|| Error::dim("trajectory needs at least one state"))?;
        let grid = first.grid().clone();
        for s in &states {
            first.same_grid(s)?;
        }
        Ok(Trajectory { grid, dt, states })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        self.dt * (self.states.len() - 1) as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dt * n as f64
    }

    pub fn first(&self) -> &SpectralField {
        &self.states[0]
    }

    pub fn last(&self) -> &SpectralField {
        &self.states[self.states.len() - 1]
    }

    pub fn norms(&self, s: f64) -> Vec<f64> {
        self.states.iter().map(|u| sobolev_norm(u, s)).collect()
    }

    /// Pointwise difference of two trajectories on the same time grid.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.len() != other.len() || (self.dt - other.dt).abs() > 1e-14 * self.dt {
            return Err(Error::dim("trajectories have different time grids"));
        }
        self.states[0].same_grid(&other.states[0])?;
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Trajectory {
            grid: self.grid.clone(),
            dt: self.dt,
            states,
        })
    }

    pub fn into_states(self) -> Vec<SpectralField> {
        self.states
    }
}
