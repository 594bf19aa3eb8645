use serde::{Deserialize, Serialize};

use super::{assemble_generator, evolve_linear, LinearModel};
use crate::error::{Error, Result};
use crate::spectral::{
    mollify, sobolev_norm, sobolev_norm_sq, trapezoid, zst_norm_order, SpectralField,
};

/// Result of fitting `‖v(t)‖_s ≈ C e^{−λt}‖v₀‖_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted `λ̂`.
    pub rate: f64,
    /// Fitted `Ĉ`.
    pub c_hat: f64,
    /// `min Re λ(L)`, the rate predicted by the generator.
    pub spectral_abscissa: f64,
    /// `‖v(T)‖_s / ‖v₀‖_s`.
    pub final_ratio: f64,
    /// Fit window `[t0, T]`.
    pub window: (f64, f64),
}

/// Least-squares line through `(t, ln y)`; returns `(slope, intercept)`.
pub(crate) fn fit_log_linear(times: &[f64], values: &[f64]) -> (f64, f64) {
    let n = times.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mt = times.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = times.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mt)
}

/// Fit over the tail half `[T/2, T]` of a norm history sampled every `dt`.
/// Returns `(rate, c_hat, t0)`.
pub(crate) fn tail_fit(norms: &[f64], dt: f64) -> (f64, f64, f64) {
    let n = norms.len() - 1;
    let start = n / 2;
    let times: Vec<f64> = (start..=n).map(|i| i as f64 * dt).collect();
    let (slope, intercept) = fit_log_linear(&times, &norms[start..]);
    (-slope, intercept.exp() / norms[0], start as f64 * dt)
}

/// Exponential decay fit for the linear flow from `v0`.
pub fn decay_rate(
    model: &LinearModel,
    v0: &SpectralField,
    t_final: f64,
    dt: f64,
    s: f64,
) -> Result<DecayFit> {
    if v0.project_mean_zero().is_zero() {
        return Err(Error::InconclusiveDecay("initial data is zero".into()));
    }
    let traj = evolve_linear(model, v0, None, t_final, dt)?;
    let norms = traj.norms(s);
    if norms.len() < 3 {
        return Err(Error::InconclusiveDecay("trajectory too short to fit".into()));
    }
    let final_ratio = norms[norms.len() - 1] / norms[0];
    if !(final_ratio < 0.5) {
        return Err(Error::InconclusiveDecay(format!(
            "norm ratio {final_ratio:.3e} over [0, {t_final}] is not below 0.5"
        )));
    }
    let (rate, c_hat, t0) = tail_fit(&norms, dt);
    let spectral_abscissa = assemble_generator(model)?.spectral_abscissa();
    Ok(DecayFit {
        rate,
        c_hat,
        spectral_abscissa,
        final_ratio,
        window: (t0, traj.t_final()),
    })
}

/// `‖v‖_{Z_{s,T}} / (‖v₀‖_s + ‖F‖_{L²H^{s−l+1/2}})` for the forced linear flow.
pub fn uniform_estimate_ratio(
    model: &LinearModel,
    v0: &SpectralField,
    forcing: Option<&[SpectralField]>,
    t_final: f64,
    dt: f64,
    s: f64,
) -> Result<f64> {
    let traj = evolve_linear(model, v0, forcing, t_final, dt)?;
    let z = zst_norm_order(&traj, s, model.order_l);
    let f_norm = match forcing {
        Some(f) => {
            let sq: Vec<f64> = f
                .iter()
                .map(|x| sobolev_norm_sq(&x.project_mean_zero(), s - model.gain()))
                .collect();
            trapezoid(&sq, dt).sqrt()
        }
        None => 0.0,
    };
    let data = sobolev_norm(v0, s) + f_norm;
    if data == 0.0 {
        return Ok(0.0);
    }
    Ok(z / data)
}

/// `Z_{s,T}` distances between the flow from mollified data `v₀^ε` and the flow
/// from `v₀`, one per `ε`.
pub fn bona_smith_distances(
    model: &LinearModel,
    v0: &SpectralField,
    epsilons: &[f64],
    t_final: f64,
    dt: f64,
    s: f64,
) -> Result<Vec<f64>> {
    let reference = evolve_linear(model, v0, None, t_final, dt)?;
    epsilons
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::domain(format!("mollifier parameter must be positive, got {eps}")));
            }
            let traj = evolve_linear(model, &mollify(v0, eps), None, t_final, dt)?;
            Ok(zst_norm_order(&traj.difference(&reference)?, s, model.order_l))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_linear_fit_recovers_exponential() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let vals: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let (slope, intercept) = fit_log_linear(&times, &vals);
        assert!((slope + 0.7).abs() < 1e-12);
        assert!((intercept.exp() - 3.0).abs() < 1e-12);
        let (rate, c, _) = tail_fit(&vals, 0.1);
        assert!((rate - 0.7).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }
}
