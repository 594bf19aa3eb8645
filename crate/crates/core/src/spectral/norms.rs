use std::f64::consts::PI;

use super::field::SpectralField;
use super::trajectory::Trajectory;

/// `‖u‖_s = (2π Σ (1+k²)^s |û(k)|²)^{1/2}`.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> f64 {
    sobolev_norm_sq(field, s).sqrt()
}

pub fn sobolev_norm_sq(field: &SpectralField, s: f64) -> f64 {
    let grid = field.grid();
    2.0 * PI
        * grid
            .wavenumbers()
            .map(|k| (1.0 + (k * k) as f64).powf(s) * field.coeff(k).norm_sqr())
            .sum::<f64>()
}

/// Discrete `Z_{s,T}` norm for the fifth-order case.
pub fn zst_norm(traj: &Trajectory, s: f64) -> f64 {
    zst_norm_order(traj, s, 2)
}

/// Discrete `Z^l_{s,T}` norm: `max_n ‖v_n‖_s + (∫ ‖v‖²_{s+l-1/2} dt)^{1/2}`, with the
/// time integral by the composite trapezoid rule.
pub fn zst_norm_order(traj: &Trajectory, s: f64, order_l: u32) -> f64 {
    let gain = order_l as f64 - 0.5;
    let sup = traj
        .states()
        .iter()
        .map(|u| sobolev_norm(u, s))
        .fold(0.0, f64::max);
    let sq: Vec<f64> = traj
        .states()
        .iter()
        .map(|u| sobolev_norm_sq(u, s + gain))
        .collect();
    sup + trapezoid(&sq, traj.dt()).max(0.0).sqrt()
}

/// Per-unit-interval norms `⫴u⫴_n` over `[n, n+1]`, `n = 0..floor(T)`.
/// Requires `1/dt` to be an integer number of steps.
pub fn unit_interval_norms(traj: &Trajectory, s: f64) -> Vec<f64> {
    let per_unit = (1.0 / traj.dt()).round() as usize;
    if per_unit == 0 {
        return Vec::new();
    }
    let states = traj.states();
    let intervals = (states.len() - 1) / per_unit;
    (0..intervals)
        .map(|n| {
            let window = &states[n * per_unit..=(n + 1) * per_unit];
            let sup = window.iter().map(|u| sobolev_norm(u, s)).fold(0.0, f64::max);
            let sq: Vec<f64> = window.iter().map(|u| sobolev_norm_sq(u, s + 1.5)).collect();
            sup + trapezoid(&sq, traj.dt()).sqrt()
        })
        .collect()
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}
