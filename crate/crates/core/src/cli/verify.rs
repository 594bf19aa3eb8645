use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::output::Artifacts;
use super::Scenario;
use crate::control::apply_g_op;
use crate::error::Result;
use crate::hum::{gramian, solve_linear_control};
use crate::linear::{assemble_generator, energy_ledger, evolve_linear};
use crate::nonlinear::{evolve_nonlinear, SolverOptions};
use crate::spectral::{deriv, dr, hilbert, to_physical, PeriodicGrid, SpectralField};

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    /// `value ≤ tolerance`, except for positivity checks where `value > tolerance`.
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn at_most(name: &'static str, r: Result<f64>, tolerance: f64) -> Check {
    finish(name, r, tolerance, |v| v <= tolerance)
}

fn above(name: &'static str, r: Result<f64>, tolerance: f64) -> Check {
    finish(name, r, tolerance, |v| v > tolerance)
}

fn finish(name: &'static str, r: Result<f64>, tolerance: f64, ok: impl Fn(f64) -> bool) -> Check {
    match r {
        Ok(value) => Check {
            name,
            value,
            tolerance,
            pass: ok(value),
            error: None,
        },
        Err(e) => Check {
            name,
            value: f64::NAN,
            tolerance,
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

fn random_field(grid: &PeriodicGrid, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut u = SpectralField::zeros(grid);
    for k in 1..=grid.n_modes() as i64 {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let c = num_complex::Complex64::new(re, im) / (1.0 + k as f64).powi(2);
        u.set_coeff(k, c);
        u.set_coeff(-k, c.conj());
    }
    u
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    (a - b).l2_norm() / a.l2_norm().max(b.l2_norm()).max(f64::MIN_POSITIVE)
}

#[derive(Serialize)]
struct VerifyReport {
    n_modes: usize,
    t_final: f64,
    dt: f64,
    passed: bool,
    checks: Vec<Check>,
}

/// The invariant suite at the configured grid, profile and time step.
pub(super) fn run(sc: &Scenario, art: &mut Artifacts) -> Result<bool> {
    let grid = &sc.grid;
    let r = &sc.config.run;
    let linear = &sc.model.linear;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let u = random_field(grid, &mut rng);
    let mut checks = Vec::new();

    checks.push(at_most(
        "multiplier_composition",
        Ok(rel(&dr(&dr(&u, 1.5), 2.0), &dr(&u, 3.5))),
        1e-10,
    ));
    checks.push(at_most("hilbert_squared", Ok(rel(&hilbert(&hilbert(&u)), &-&u)), 1e-10));
    checks.push(at_most("d_equals_h_dx", Ok(rel(&dr(&u, 1.0), &hilbert(&deriv(&u, 1)))), 1e-10));
    let samples = to_physical(&u);
    let quad = 2.0 * PI * samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    checks.push(at_most("parseval", Ok((quad - u.dot(&u)).abs() / u.dot(&u)), 1e-10));

    let p = &linear.profile;
    checks.push(at_most("g_self_adjoint", Ok(p.g_matrix().hermitian_defect()), 1e-12));
    let v = random_field(grid, &mut rng);
    checks.push(at_most(
        "g_mean_zero_and_constants",
        (|| {
            let gu = apply_g_op(&u, p)?;
            let sym = (gu.dot(&v) - apply_g_op(&v, p)?.dot(&u)).abs();
            let c = apply_g_op(&SpectralField::constant(grid, 1.0), p)?;
            Ok(gu.mean().abs().max(c.max_abs()).max(sym / (u.l2_norm() * v.l2_norm())))
        })(),
        1e-12,
    ));

    let cos = SpectralField::from_fn(grid, |x| x.cos()).project_mean_zero();
    checks.push(at_most(
        "energy_ledger_relative_residual",
        evolve_linear(linear, &cos, None, r.t_final, r.dt)
            .and_then(|t| energy_ledger(linear, &t, None))
            .map(|l| l.relative_residual()),
        1e-6,
    ));
    if linear.feedback_on {
        checks.push(above(
            "generator_spectral_abscissa",
            assemble_generator(linear).map(|g| g.spectral_abscissa()),
            0.0,
        ));
    }
    let g = gramian(linear, r.t_final, r.dt);
    checks.push(at_most(
        "gramian_symmetry",
        g.as_ref().map(|g| g.symmetry_defect()).map_err(Clone::clone),
        1e-10,
    ));
    checks.push(above("gramian_lambda_min", g.map(|g| g.lambda_min()), 0.0));
    let target = random_field(grid, &mut rng).scale(1e-3);
    checks.push(at_most(
        "linear_control_endpoint",
        solve_linear_control(linear, &SpectralField::zeros(grid), &target, r.t_final, r.dt, r.s)
            .map(|c| c.endpoint_error),
        1e-8,
    ));
    let small = &SpectralField::constant(grid, 0.1) + &random_field(grid, &mut rng).scale(1e-4);
    checks.push(at_most(
        "volume_conservation",
        evolve_nonlinear(&sc.model, &small, None, r.t_final, r.dt, &SolverOptions::default()).map(|t| {
            t.states()
                .iter()
                .map(|x| {
                    let s = to_physical(x);
                    (s.iter().sum::<f64>() / s.len() as f64 - 0.1).abs()
                })
                .fold(0.0, f64::max)
        }),
        1e-10,
    ));

    let passed = checks.iter().all(|c| c.pass);
    for c in &checks {
        log::info!("{} {}: {:.3e} (tol {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    art.write_json(
        "verify.json",
        &VerifyReport {
            n_modes: grid.n_modes(),
            t_final: r.t_final,
            dt: r.dt,
            passed,
            checks,
        },
    )?;
    Ok(passed)
}
