use std::f64::consts::PI;

use kdv5_core::control::ControlProfile;
use kdv5_core::hum::{
    control_from_adjoint, gramian, observability_report, physical_control, solve_linear_control,
    solve_linear_control_with, solve_nonlinear_control, solve_weighted_control, steer_linear,
    ControlSignal, GramianMethod, HumOptions, NonlinearControlOptions,
};
use kdv5_core::linear::LinearModel;
use kdv5_core::nonlinear::NonlinearModel;
use kdv5_core::spectral::{dr, sobolev_norm, to_physical, PeriodicGrid, SpectralField};
use kdv5_core::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump(k: usize, radius: f64) -> LinearModel {
    let grid = PeriodicGrid::new(k).unwrap();
    LinearModel::new(ControlProfile::bump(&grid, PI, radius).unwrap())
}

fn random_target(grid: &PeriodicGrid, rng: &mut ChaCha8Rng, amp: f64) -> SpectralField {
    let mut modes = Vec::new();
    for k in 1..=grid.n_modes() as i64 {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        modes.push((k, c));
        modes.push((-k, c.conj()));
    }
    SpectralField::from_modes(grid, &modes).unwrap()
}

fn random_signal(grid: &PeriodicGrid, rng: &mut ChaCha8Rng, dt: f64, steps: usize) -> ControlSignal {
    let values = (0..=steps).map(|_| random_target(grid, rng, 1.0)).collect();
    ControlSignal::new(dt, values).unwrap()
}

fn trap_pairing(a: &ControlSignal, b: &ControlSignal) -> f64 {
    let n = a.steps();
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(i, (x, y))| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * a.dt() * x.dot(y)
        })
        .sum()
}

#[test]
fn duality_pairing_is_exact() {
    let model = bump(8, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (t, dt) = (0.5, 5e-3);
    for _ in 0..4 {
        let phi = random_target(&grid, &mut rng, 1.0);
        let k = random_signal(&grid, &mut rng, dt, 100);
        let obs = control_from_adjoint(&phi, &model, t, dt).unwrap();
        let zero = SpectralField::zeros(&grid);
        let w = steer_linear(&model, &zero, &k).unwrap();
        let lhs = phi.dot(w.last());
        let rhs = trap_pairing(&k, &obs);
        let scale = phi.l2_norm() * k.energy().sqrt() * obs.energy().sqrt();
        assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
    }
}

#[test]
fn quadratic_form_equals_observation_energy() {
    let model = bump(16, 3.0 * PI / 4.0);
    let (t, dt) = (1.0, 1e-2);
    let g = gramian(&model, t, dt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let phi = random_target(model.grid(), &mut rng, 1.0);
        let k = control_from_adjoint(&phi, &model, t, dt).unwrap();
        let q = g.quadratic_form(&phi).unwrap();
        assert!((q - k.energy()).abs() <= 1e-8 * q.abs().max(1.0), "{q} vs {}", k.energy());
    }
}

#[test]
fn uniform_profile_reduces_to_closed_form() {
    // G = (2π)⁻¹ on mean-zero modes and the undamped adjoint flow is unitary,
    // so Λ = T (2π)⁻² D³ exactly.
    let grid = PeriodicGrid::new(8).unwrap();
    let model = LinearModel::new(ControlProfile::uniform(&grid)).with_feedback(false);
    let (t, dt) = (1.0, 1e-2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_target(&grid, &mut rng, 1.0);
    let k = control_from_adjoint(&phi, &model, t, dt).unwrap();
    let closed = t * dr(&phi, 1.5).dot(&dr(&phi, 1.5)) / (4.0 * PI * PI);
    assert!((k.energy() - closed).abs() <= 1e-6 * closed);

    let report = observability_report(&model, t, dt).unwrap();
    let expected = t / (4.0 * PI * PI);
    assert!((report.lambda_min - expected).abs() <= 1e-6 * expected);
    assert_eq!(report.worst_mode, 1);
    let top = t * 8f64.powi(3) / (4.0 * PI * PI);
    assert!((report.lambda_max - top).abs() <= 1e-6 * top);
}

#[test]
fn gramian_is_symmetric_and_positive() {
    for k in [8, 16, 32] {
        for t in [0.5, 1.0] {
            let model = bump(k, 3.0 * PI / 4.0);
            let g = gramian(&model, t, 1e-2).unwrap();
            assert!(g.symmetry_defect() < 1e-10, "K={k} T={t}: {}", g.symmetry_defect());
            let lmin = g.lambda_min();
            assert!(lmin > 0.0 && (1.0 / lmin).is_finite(), "K={k} T={t}: {lmin}");
        }
    }
}

#[test]
fn observability_constant_grows_as_support_shrinks() {
    let radii = [PI / 2.0, PI / 3.0, PI / 4.0, PI / 6.0, PI / 8.0];
    let c: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let grid = PeriodicGrid::new(16).unwrap();
            let model = LinearModel::new(ControlProfile::bump(&grid, PI, r).unwrap());
            observability_report(&model, 1.0, 1e-2).unwrap().observability_constant
        })
        .collect();
    for w in c.windows(2) {
        assert!(w[1] > w[0], "{c:?}");
    }
}

#[test]
fn longer_horizon_observes_more() {
    for k in [8, 16, 32] {
        let model = bump(k, 3.0 * PI / 4.0).with_feedback(false);
        let a = observability_report(&model, 0.5, 1e-2).unwrap().lambda_min;
        let b = observability_report(&model, 1.0, 1e-2).unwrap().lambda_min;
        assert!(b >= 1.5 * a, "K={k}: {a} -> {b}");
    }
}

#[test]
fn damped_horizon_is_monotone() {
    // Extending the horizon adds positive semidefinite terms to the trapezoid sum.
    let model = bump(16, 3.0 * PI / 4.0);
    let mut prev = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let r = observability_report(&model, t, 1e-2).unwrap();
        assert!(r.lambda_min >= prev * (1.0 - 1e-10), "{} after {prev}", r.lambda_min);
        prev = r.lambda_min;
    }
}

#[test]
fn steers_random_targets() {
    let model = bump(16, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let zero = SpectralField::zeros(&grid);
    for _ in 0..5 {
        let vt = random_target(&grid, &mut rng, 1e-2);
        let c = solve_linear_control(&model, &zero, &vt, 1.0, 1e-2, 2.5).unwrap();
        assert!(c.endpoint_error < 1e-8, "{}", c.endpoint_error);
        assert_eq!(c.method, "cholesky");
    }
}

#[test]
fn steers_cosine_pair() {
    let model = bump(16, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let vt = SpectralField::from_fn(&grid, |x| 1e-3 * (x.cos() - (2.0 * x).cos()));
    let zero = SpectralField::zeros(&grid);
    let c = solve_linear_control(&model, &zero, &vt, 1.0, 1e-3, 2.5).unwrap();
    assert!(c.endpoint_error < 1e-8, "{}", c.endpoint_error);
    assert!(c.signal.values().iter().all(|k| k.mean().abs() < 1e-15 && k.is_real(1e-15)));
    let h = physical_control(&model, &c.trajectory, &c.signal).unwrap();
    assert_eq!(h.len(), c.signal.values().len());
}

#[test]
fn steering_is_reversible() {
    let model = bump(16, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let a = SpectralField::from_fn(&grid, |x| 1e-3 * x.sin());
    let b = SpectralField::from_fn(&grid, |x| 1e-3 * (2.0 * x).cos());
    let fwd = solve_linear_control(&model, &a, &b, 1.0, 1e-2, 2.5).unwrap();
    let back = solve_linear_control(&model, &b, &a, 1.0, 1e-2, 2.5).unwrap();
    assert!(fwd.endpoint_error < 1e-8 && back.endpoint_error < 1e-8);
    let ratio = fwd.signal.energy() / back.signal.energy();
    assert!((0.1..10.0).contains(&ratio), "energies {} {}", fwd.signal.energy(), back.signal.energy());
}

#[test]
fn conjugate_gradient_matches_cholesky() {
    let model = bump(16, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vt = random_target(&grid, &mut rng, 1e-2);
    let zero = SpectralField::zeros(&grid);
    let direct = solve_linear_control(&model, &zero, &vt, 1.0, 1e-2, 2.5).unwrap();
    let opts = HumOptions {
        method: GramianMethod::ConjugateGradient,
        ..Default::default()
    };
    let cg = solve_linear_control_with(&model, &zero, &vt, 1.0, 1e-2, 2.5, None, &opts).unwrap();
    assert_eq!(cg.method, "pcg");
    assert!(cg.cg_iterations > 0);
    assert!(cg.endpoint_error < 1e-8, "{}", cg.endpoint_error);
    let d = (&cg.phi - &direct.phi).l2_norm() / direct.phi.l2_norm();
    assert!(d < 1e-6, "{d}");
}

#[test]
fn cg_budget_exhaustion_is_ill_conditioned() {
    let model = bump(16, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let vt = SpectralField::from_fn(&grid, |x| 1e-3 * (3.0 * x).sin());
    let opts = HumOptions {
        method: GramianMethod::ConjugateGradient,
        cg_tol: 1e-15,
        cg_max_iterations: 2,
    };
    let zero = SpectralField::zeros(&grid);
    let e = solve_linear_control_with(&model, &zero, &vt, 1.0, 1e-2, 2.5, None, &opts);
    assert!(matches!(e, Err(Error::IllConditioned { lambda_min, .. }) if lambda_min > 0.0));
}

#[test]
fn linear_control_rejects_mean() {
    let model = bump(8, 3.0 * PI / 4.0);
    let zero = SpectralField::zeros(model.grid());
    let c = SpectralField::constant(model.grid(), 0.5);
    assert!(matches!(
        solve_linear_control(&model, &zero, &c, 1.0, 1e-2, 2.5),
        Err(Error::Domain(_))
    ));
}

#[test]
fn weighted_control_matches_direct_riesz_map() {
    let model = bump(16, 3.0 * PI / 4.0);
    let grid = model.grid().clone();
    let s = 2.5;
    let vt = SpectralField::from_fn(&grid, |x| 1e-3 * (x.sin() + (3.0 * x).cos()));
    let zero = SpectralField::zeros(&grid);
    let w = solve_weighted_control(&model, &zero, &vt, 1.0, 1e-2, s).unwrap();
    assert!(w.endpoint_error < 1e-8, "{}", w.endpoint_error);

    // Adjoint through w = D^{-s}u with the remainder correction against the plain
    // adjoint followed by D^{-2s}.
    let plain = control_from_adjoint(&w.phi, &model, 1.0, 1e-2).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in w.signal.values().iter().zip(plain.values()) {
        let d = dr(b, -2.0 * s);
        worst = worst.max((a - &d).l2_norm() / d.l2_norm().max(1e-300));
    }
    assert!(worst < 1e-8, "{worst}");

    let u = solve_linear_control(&model, &zero, &vt, 1.0, 1e-2, s).unwrap();
    let (ew, eu) = (w.signal.dr_energy(s), u.signal.dr_energy(s));
    assert!(ew.is_finite() && ew <= eu * (1.0 + 1e-9), "{ew} vs {eu}");
    assert!(u.signal.energy() <= w.signal.energy() * (1.0 + 1e-9));
}

fn nonlinear_model() -> NonlinearModel {
    NonlinearModel::kdv5(bump(16, 3.0 * PI / 4.0))
}

#[test]
fn nonlinear_control_sine_to_double_sine() {
    let model = nonlinear_model();
    let grid = model.grid().clone();
    let u0 = SpectralField::from_fn(&grid, |x| 1e-3 * x.sin());
    let ut = SpectralField::from_fn(&grid, |x| 1e-3 * (2.0 * x).sin());
    let opts = NonlinearControlOptions::default();
    let c = solve_nonlinear_control(&model, &u0, &ut, 1.0, 1e-3, &opts).unwrap();
    assert!(c.endpoint_error < 1e-6, "{}", c.endpoint_error);
    assert!(c.iterations <= 8, "{}", c.iterations);
    for w in c.distances.windows(2).skip(1) {
        assert!(w[1] < w[0], "{:?}", c.distances);
    }
    for u in c.trajectory.states() {
        let samples = to_physical(u);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 1e-10);
    }
}

#[test]
fn nonlinear_control_with_volume() {
    let model = nonlinear_model();
    let grid = model.grid().clone();
    let u0 = SpectralField::from_fn(&grid, |x| 0.1 + 1e-3 * x.sin());
    let ut = SpectralField::from_fn(&grid, |x| 0.1 + 1e-3 * x.cos());
    let c = solve_nonlinear_control(&model, &u0, &ut, 1.0, 1e-2, &Default::default()).unwrap();
    assert!(c.endpoint_error < 1e-6, "{}", c.endpoint_error);
    for u in c.trajectory.states() {
        assert!((u.mean() - 0.1).abs() < 1e-10);
    }
    let other = SpectralField::from_fn(&grid, |x| 0.2 + 1e-3 * x.cos());
    assert!(matches!(
        solve_nonlinear_control(&model, &u0, &other, 1.0, 1e-2, &Default::default()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn halving_data_never_costs_more_than_one_iteration() {
    let model = nonlinear_model();
    let grid = model.grid().clone();
    let mut last = None;
    for amp in [4e-3, 2e-3, 1e-3, 5e-4] {
        let u0 = SpectralField::from_fn(&grid, |x| amp * x.sin());
        let ut = SpectralField::from_fn(&grid, |x| amp * (2.0 * x).sin());
        let c = solve_nonlinear_control(&model, &u0, &ut, 1.0, 1e-2, &Default::default()).unwrap();
        if let Some(prev) = last {
            assert!(c.iterations <= prev + 1, "{amp}: {} after {prev}", c.iterations);
        }
        last = Some(c.iterations);
    }
}

#[test]
fn nonlinear_zero_data_is_one_iterate() {
    let model = nonlinear_model();
    let z = SpectralField::zeros(model.grid());
    let c = solve_nonlinear_control(&model, &z, &z, 1.0, 1e-2, &Default::default()).unwrap();
    assert_eq!(c.iterations, 1);
    assert!(c.signal.is_zero());
    assert_eq!(c.endpoint_error, 0.0);
}

#[test]
fn large_data_breaks_contraction() {
    let model = nonlinear_model();
    let grid = model.grid().clone();
    let u0 = SpectralField::from_fn(&grid, |x| 2.0 * x.sin());
    let ut = SpectralField::from_fn(&grid, |x| 2.0 * (2.0 * x).sin());
    let e = solve_nonlinear_control(&model, &u0, &ut, 1.0, 1e-2, &Default::default());
    assert!(
        matches!(e, Err(Error::SmallDataViolation(_)) | Err(Error::Convergence { .. })),
        "{e:?}"
    );
}

#[test]
fn control_signal_energy_is_trapezoid() {
    let grid = PeriodicGrid::new(4).unwrap();
    let s = SpectralField::from_fn(&grid, |x| x.sin());
    let e = s.dot(&s);
    let sig = ControlSignal::new(0.1, vec![s.clone(), s.clone(), s]).unwrap();
    assert!((sig.energy() - 0.2 * e).abs() < 1e-15);
    assert!((sobolev_norm(&sig.values()[0], 0.0).powi(2) - e).abs() < 1e-12);
}
