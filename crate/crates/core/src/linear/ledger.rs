use serde::{Deserialize, Serialize};

use super::{assemble_generator, LinearModel};
use crate::control::{apply_g_op, remainder_e};
use crate::error::{Error, Result};
use crate::spectral::{deriv, dr, trapezoid, SpectralField, Trajectory};

/// Terms of `½‖v(T)‖² + ε∫‖D^{l+1/2}v‖² + ∫‖D^{l−1/2}Gv‖² = ½‖v₀‖² + ∫(v, F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub kinetic: f64,
    pub dissipation_eps: f64,
    #[serde(rename = "dissipation_G")]
    pub dissipation_g: f64,
    pub forcing_work: f64,
    pub residual: f64,
    #[serde(skip)]
    pub initial_energy: f64,
}

impl LedgerReport {
    /// `|residual| / ½‖v₀‖²`, or the absolute residual when `v₀ = 0`.
    pub fn relative_residual(&self) -> f64 {
        if self.initial_energy > 0.0 {
            self.residual.abs() / self.initial_energy
        } else {
            self.residual.abs()
        }
    }
}

/// `∫ (D^a u)² dx` over the mean-zero modes.
pub(crate) fn d_norm_sq(u: &SpectralField, a: f64) -> f64 {
    let mz = u.project_mean_zero();
    let d = dr(&mz, a);
    d.dot(&d)
}

fn forcing_slice<'a>(
    traj: &Trajectory,
    forcing: Option<&'a [SpectralField]>,
) -> Result<Option<&'a [SpectralField]>> {
    if let Some(f) = forcing {
        if f.len() != traj.len() {
            return Err(Error::dim(format!(
                "forcing has {} samples, trajectory has {}",
                f.len(),
                traj.len()
            )));
        }
    }
    Ok(forcing)
}

pub fn energy_ledger(
    model: &LinearModel,
    traj: &Trajectory,
    forcing: Option<&[SpectralField]>,
) -> Result<LedgerReport> {
    let forcing = forcing_slice(traj, forcing)?;
    let p = &model.profile;
    let eps_gain = model.order_l as f64 + 0.5;
    let mut eps_terms = Vec::with_capacity(traj.len());
    let mut g_terms = Vec::with_capacity(traj.len());
    let mut f_terms = Vec::with_capacity(traj.len());
    for (n, v) in traj.states().iter().enumerate() {
        eps_terms.push(model.epsilon * d_norm_sq(v, eps_gain));
        g_terms.push(if model.feedback_on {
            d_norm_sq(&apply_g_op(v, p)?, model.gain())
        } else {
            0.0
        });
        f_terms.push(match forcing {
            Some(f) => v.dot(&f[n].project_mean_zero()),
            None => 0.0,
        });
    }
    let dt = traj.dt();
    let kinetic = 0.5 * traj.last().dot(traj.last());
    let initial_energy = 0.5 * traj.first().dot(traj.first());
    let dissipation_eps = trapezoid(&eps_terms, dt);
    let dissipation_g = trapezoid(&g_terms, dt);
    let forcing_work = trapezoid(&f_terms, dt);
    let residual = kinetic + dissipation_eps + dissipation_g - forcing_work - initial_energy;
    Ok(LedgerReport {
        kinetic,
        dissipation_eps,
        dissipation_g,
        forcing_work,
        residual,
        initial_energy,
    })
}

/// Time-integrated terms of the weighted identity for `w = D^s v`:
///
/// `½[∫w²ψ]₀ᵀ + ∫∫{ 5/2 (∂²w)²ψ' + D^{3/2}(Gw)·D^{3/2}G(ψw) + wEw·ψ + ε D^{5/2}w·D^{5/2}(ψw) }
///  = ∫∫{ 5/2 (∂w)²ψ''' − ½ w²ψ⁽⁵⁾ + w·D^sF·ψ }`.
///
/// Products are evaluated exactly on the padded grid, so `residual` only
/// carries the time-quadrature error. `pointwise_residual` checks the identity
/// before time integration, with `d/dt ½∫w²ψ` taken from the generator, relative
/// to the largest term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLedgerReport {
    pub weighted_change: f64,
    pub dispersion_weight: f64,
    pub feedback: f64,
    pub remainder: f64,
    pub dissipation_eps: f64,
    pub dispersion_third: f64,
    pub dispersion_fifth: f64,
    pub forcing_work: f64,
    pub residual: f64,
    pub pointwise_residual: f64,
    #[serde(skip)]
    pub initial_weighted: f64,
}

impl WeightedLedgerReport {
    pub fn relative_residual(&self) -> f64 {
        if self.initial_weighted.abs() > 0.0 {
            self.residual.abs() / self.initial_weighted.abs()
        } else {
            self.residual.abs()
        }
    }
}

pub fn weighted_ledger(
    model: &LinearModel,
    traj: &Trajectory,
    forcing: Option<&[SpectralField]>,
    psi: &SpectralField,
    s: f64,
) -> Result<WeightedLedgerReport> {
    if model.order_l != 2 || model.beta0 != 0.0 || model.beta1 != 0.0 || model.beta_high != 0.0 {
        return Err(Error::domain(
            "the weighted ledger is implemented for the fifth-order model with zero beta terms",
        ));
    }
    if psi.grid() != traj.grid() {
        return Err(Error::dim("weight and trajectory live on different grids"));
    }
    let forcing = forcing_slice(traj, forcing)?;
    let p = &model.profile;
    let psi = psi.real_part();
    let psi1 = deriv(&psi, 1);
    let psi3 = deriv(&psi, 3);
    let psi5 = deriv(&psi, 5);
    let e = if model.feedback_on && s != 0.0 {
        Some(remainder_e(s, p))
    } else {
        None
    };
    let generator = assemble_generator(model)?;
    let tri = SpectralField::triple_integral;
    let n = traj.len();
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    let (mut lhs, mut rhs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut parts = [vec![], vec![], vec![], vec![], vec![], vec![], vec![]];
    let mut weighted = Vec::with_capacity(n);
    for (i, v) in traj.states().iter().enumerate() {
        let w = dr(&v.project_mean_zero(), s);
        let w1 = deriv(&w, 1);
        let w2 = deriv(&w, 2);
        let psi_w = psi.product(&w)?;
        let a1 = 2.5 * tri(&w2, &w2, &psi1)?;
        let (fb, rem) = if model.feedback_on {
            let gw = dr(&apply_g_op(&w, p)?, 1.5);
            let gpw = dr(&apply_g_op(&psi_w, p)?, 1.5);
            let rem = match &e {
                Some(e) => tri(&w, &e.apply(&w)?, &psi)?,
                None => 0.0,
            };
            (gw.dot(&gpw), rem)
        } else {
            (0.0, 0.0)
        };
        let eps = if model.epsilon > 0.0 {
            model.epsilon * dr(&w, 2.5).dot(&dr(&psi_w.project_mean_zero(), 2.5))
        } else {
            0.0
        };
        let r3 = 2.5 * tri(&w1, &w1, &psi3)?;
        let r5 = -0.5 * tri(&w, &w, &psi5)?;
        let rf = match forcing {
            Some(f) => tri(&w, &dr(&f[i].project_mean_zero(), s), &psi)?,
            None => 0.0,
        };
        let mut vt = -&generator.apply(v)?;
        if let Some(f) = forcing {
            vt += &f[i].project_mean_zero();
        }
        let rate = tri(&w, &dr(&vt, s), &psi)?;
        let (l, r) = (a1 + fb + rem + eps, r3 + r5 + rf);
        worst = worst.max((rate + l - r).abs());
        scale = scale.max(rate.abs()).max(l.abs()).max(r.abs());
        weighted.push(0.5 * tri(&w, &w, &psi)?);
        for (slot, val) in parts.iter_mut().zip([a1, fb, rem, eps, r3, r5, rf]) {
            slot.push(val);
        }
        lhs.push(a1 + fb + rem + eps);
        rhs.push(r3 + r5 + rf);
    }
    let dt = traj.dt();
    let t = |v: &Vec<f64>| trapezoid(v, dt);
    let weighted_change = weighted[n - 1] - weighted[0];
    Ok(WeightedLedgerReport {
        weighted_change,
        dispersion_weight: t(&parts[0]),
        feedback: t(&parts[1]),
        remainder: t(&parts[2]),
        dissipation_eps: t(&parts[3]),
        dispersion_third: t(&parts[4]),
        dispersion_fifth: t(&parts[5]),
        forcing_work: t(&parts[6]),
        residual: weighted_change + t(&lhs) - t(&rhs),
        pointwise_residual: if scale > 0.0 { worst / scale } else { 0.0 },
        initial_weighted: weighted[0],
    })
}
