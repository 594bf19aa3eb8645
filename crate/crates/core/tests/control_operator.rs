use std::f64::consts::PI;

use kdv5_core::control::{
    apply_g_op, commutator_constant, dr_operator, feedback, remainder_adjoint, remainder_e,
    ControlProfile,
};
use kdv5_core::operator::assemble_matrix;
use kdv5_core::spectral::{dr, PeriodicGrid, SpectralField};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_field(grid: &PeriodicGrid, seed: u64, with_mean: bool) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    for k in 1..=grid.n_modes() as i64 {
        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        f.set_coeff(k, z);
        f.set_coeff(-k, z.conj());
    }
    if with_mean {
        f.set_coeff(0, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
    }
    f
}

fn profiles(k: usize) -> Vec<ControlProfile> {
    let grid = PeriodicGrid::new(k).unwrap();
    vec![
        ControlProfile::bump(&grid, PI, PI / 4.0).unwrap(),
        ControlProfile::bump(&grid, 1.0, 2.0).unwrap(),
        ControlProfile::uniform(&grid),
    ]
}

/// Full-band (mean included) matrix of a real-linear map, built from images of
/// 1, cos kx and sin kx.
fn full_band_matrix(
    grid: &PeriodicGrid,
    op: impl Fn(&SpectralField) -> SpectralField,
) -> DMatrix<Complex64> {
    let k_max = grid.n_modes() as i64;
    let n = grid.n_coeffs();
    let mut m = DMatrix::zeros(n, n);
    let col = |f: &SpectralField| {
        nalgebra::DVector::from_iterator(n, grid.wavenumbers().map(|k| f.coeff(k)))
    };
    m.set_column(grid.index(0), &col(&op(&SpectralField::constant(grid, 1.0))));
    let i = Complex64::new(0.0, 1.0);
    for k in 1..=k_max {
        let half = Complex64::new(0.5, 0.0);
        let c = SpectralField::from_modes(grid, &[(k, half), (-k, half)]).unwrap();
        let s = SpectralField::from_modes(grid, &[(k, -half * i), (-k, half * i)]).unwrap();
        let (c, s) = (col(&op(&c)), col(&op(&s)));
        m.set_column(grid.index(k), &(&c + &s * i));
        m.set_column(grid.index(-k), &(&c - &s * i));
    }
    m
}

fn d_full(grid: &PeriodicGrid, r: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        grid.n_coeffs(),
        grid.wavenumbers().map(|k| {
            Complex64::new(if k == 0 { 1.0 } else { (k.unsigned_abs() as f64).powf(r) }, 0.0)
        }),
    ))
}

fn rel(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / b.norm().max(a.norm()).max(1.0)
}

#[test]
fn self_adjoint_mean_free_and_constant_killing() {
    for p in profiles(16) {
        let grid = p.grid().clone();
        for seed in 0..10 {
            let u = random_field(&grid, seed, true);
            let v = random_field(&grid, seed + 100, true);
            let gu = apply_g_op(&u, &p).unwrap();
            let gv = apply_g_op(&v, &p).unwrap();
            let a = gu.dot(&v);
            let b = u.dot(&gv);
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} {b}");
            assert!(gu.mean().abs() < 1e-12);
        }
        let c = SpectralField::constant(&grid, -4.5);
        assert!(apply_g_op(&c, &p).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn g_matrix_matches_physical_application() {
    for p in profiles(16) {
        let a = assemble_matrix(p.grid(), |h| apply_g_op(h, &p)).unwrap();
        assert!(a.hermitian_defect() < 1e-13);
        assert!(rel(a.matrix(), p.g_matrix().matrix()) < 1e-13);
        for seed in 0..10 {
            let u = random_field(p.grid(), seed, false);
            let direct = apply_g_op(&u, &p).unwrap();
            let via = a.apply(&u).unwrap();
            assert!((&direct - &via).max_abs() < 1e-12);
        }
    }
}

#[test]
fn feedback_is_positive_semidefinite() {
    for p in profiles(32) {
        for seed in 0..5 {
            let u = random_field(p.grid(), seed, true);
            let lhs = u.dot(&feedback(&u, 3.0, &p).unwrap());
            let gu = apply_g_op(&u, &p).unwrap();
            let d = dr(&gu, 1.5);
            let rhs = d.dot(&d);
            assert!(rhs >= 0.0);
            assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1e-300), "{lhs} {rhs}");
        }
    }
}

#[test]
fn uniform_feedback_is_scaled_d3() {
    let grid = PeriodicGrid::new(16).unwrap();
    let p = ControlProfile::uniform(&grid);
    let a = assemble_matrix(&grid, |u| feedback(u, 3.0, &p)).unwrap();
    let expect = dr_operator(&grid, 3.0).scale((2.0 * PI).powi(-2));
    assert!(rel(a.matrix(), expect.matrix()) < 1e-12);
    for seed in 0..10 {
        let u = random_field(&grid, seed, true);
        let direct = feedback(&u, 3.0, &p).unwrap();
        let via = a.apply(&u).unwrap();
        assert!((&direct - &via).max_abs() < 1e-12);
    }
}

#[test]
fn ctrl1_product_rule_in_nodal_form() {
    let grid = PeriodicGrid::new(16).unwrap();
    for p in profiles(16) {
        let psi: Vec<f64> = grid.points().iter().map(|x| 2.0 + (x - 0.5).sin()).collect();
        let g = p.samples();
        let n = grid.n_points();
        let w = 2.0 * PI / n as f64;
        // Left: h ↦ G(ψh). Right: h ↦ ψ·Gh + g(ψ∫gh − ∫ψgh).
        let mut lhs = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let psi_e: Vec<f64> = e.iter().zip(&psi).map(|(a, b)| a * b).collect();
            let left = p.apply_g_nodal(&psi_e).unwrap();
            let ge = p.apply_g_nodal(&e).unwrap();
            let int_gh: f64 = g.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() * w;
            let int_psigh: f64 = (0..n).map(|i| psi[i] * g[i] * e[i]).sum::<f64>() * w;
            for i in 0..n {
                lhs[(i, j)] = left[i];
                rhs[(i, j)] = psi[i] * ge[i] + g[i] * (psi[i] * int_gh - int_psigh);
            }
        }
        assert!((&lhs - &rhs).abs().max() < 1e-12 * lhs.abs().max().max(1.0));
    }
}

#[test]
fn ctrl2_commutator_identity_as_matrices() {
    for p in profiles(16) {
        let grid = p.grid().clone();
        let g_full = full_band_matrix(&grid, |h| apply_g_op(h, &p).unwrap());
        let mg = p.multiplication_matrix();
        let n = grid.n_coeffs();
        let ghat = |m: i64| p.coefficient(m);
        let absp = |k: i64, r: f64| if k == 0 { 1.0 } else { (k.unsigned_abs() as f64).powf(r) };
        for (s, r) in [(1.0, 0.0), (1.5, 3.0), (-0.5, 3.0)] {
            let ds = d_full(&grid, s);
            let drm = d_full(&grid, r);
            let lhs = (&ds * &g_full - &g_full * &ds) * &drm;
            let comm_g = (&ds * &mg - &mg * &ds) * &drm;
            let rank = DMatrix::from_fn(n, n, |i, j| {
                let k = i as i64 - grid.n_modes() as i64;
                let m = j as i64 - grid.n_modes() as i64;
                // −D^s g ∫f D^r g + g ∫f D^{r+s} g, in coefficients.
                let a = -ghat(k) * absp(k, s) * ghat(-m) * absp(m, r);
                let b = ghat(k) * ghat(-m) * absp(m, r + s);
                (a + b) * (2.0 * PI)
            });
            let rhs = comm_g + rank;
            assert!(rel(&lhs, &rhs) < 1e-10, "s={s} r={r}: {}", rel(&lhs, &rhs));
        }
    }
}

#[test]
fn bump_normalization_matches_adaptive_quadrature() {
    fn f(y: f64) -> f64 {
        if y.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - y * y)).exp()
        }
    }
    #[allow(clippy::too_many_arguments)]
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let whole = 2.0 / 6.0 * (f(-1.0) + 4.0 * f(0.0) + f(1.0));
    let integral = simpson(-1.0, 1.0, f(-1.0), f(0.0), f(1.0), whole, 1e-14, 50);
    let grid = PeriodicGrid::new(32).unwrap();
    for radius in [PI / 8.0, PI / 4.0, 3.0 * PI / 4.0] {
        let p = ControlProfile::bump(&grid, PI, radius).unwrap();
        let c = 1.0 / (radius * integral);
        assert!((p.normalization() - c).abs() < 1e-8 * c);
    }
}

#[test]
fn bump_lives_on_its_support() {
    let grid = PeriodicGrid::new(32).unwrap();
    let p = ControlProfile::bump(&grid, PI, PI / 4.0).unwrap();
    let (a, b) = p.support().unwrap();
    assert!((a - 3.0 * PI / 4.0).abs() < 1e-15 && (b - 5.0 * PI / 4.0).abs() < 1e-15);
    let m = 1 << 16;
    let sum: f64 = (0..m).map(|j| p.value(2.0 * PI * j as f64 / m as f64)).sum::<f64>() * 2.0 * PI / m as f64;
    assert!((sum - 1.0).abs() < 1e-10);
    assert!((2.0 * PI * p.coefficient(0).re - 1.0).abs() < 1e-14);
    assert!(p.value(3.0 * PI / 4.0 - 1e-9) == 0.0 && p.value(5.0 * PI / 4.0 + 1e-9) == 0.0);
    assert!((p.g_field().mean() - 1.0 / (2.0 * PI)).abs() < 1e-16);
    assert!(p.samples().iter().all(|&v| v >= 0.0));
}

#[test]
fn remainder_vanishes_at_s_zero_and_for_uniform_g() {
    let grid = PeriodicGrid::new(16).unwrap();
    let bump = ControlProfile::bump(&grid, PI, PI / 4.0).unwrap();
    assert_eq!(remainder_e(0.0, &bump).frobenius_norm(), 0.0);
    assert_eq!(remainder_adjoint(0.0, &bump).frobenius_norm(), 0.0);
    let uniform = ControlProfile::uniform(&grid);
    for s in [0.5, 2.0, 2.5] {
        let ds = dr_operator(&grid, s);
        let c = ds.commutator(uniform.g_matrix()).unwrap();
        assert!(c.frobenius_norm() < 1e-14);
        assert!(remainder_e(s, &uniform).frobenius_norm() < 1e-12);
        assert!(remainder_e(s, &bump).frobenius_norm() > 1e-3);
    }
}

/// `‖P_K E P_K Λ^{−2}‖` with `E` assembled on a band wide enough to resolve the
/// bump, so the compressions are nested in `K`.
fn order_two_bounds(ks: &[usize], s: f64) -> Vec<f64> {
    let fine = 256;
    let grid = PeriodicGrid::new(fine).unwrap();
    let p = ControlProfile::bump(&grid, PI, 3.0 * PI / 4.0).unwrap();
    let e = remainder_e(s, &p);
    let m = e.matrix();
    ks.iter()
        .map(|&k| {
            let slots: Vec<usize> = (0..grid.mean_zero_dim())
                .filter(|&i| grid.mean_zero_wavenumber(i).unsigned_abs() as usize <= k)
                .collect();
            let sub = DMatrix::from_fn(slots.len(), slots.len(), |i, j| {
                let kk = grid.mean_zero_wavenumber(slots[j]) as f64;
                m[(slots[i], slots[j])] / (1.0 + kk * kk)
            });
            sub.singular_values().max()
        })
        .collect()
}

#[test]
fn remainder_has_order_two() {
    let c = order_two_bounds(&[16, 32, 64], 2.0);
    println!("E order-two bounds {c:?}");
    assert!(c[0] <= c[1] && c[1] <= c[2]);
    assert!(c[2] - c[1] < 0.05 * c[2]);
}

#[test]
fn commutator_constant_diagnostics() {
    let grid = PeriodicGrid::new(16).unwrap();
    let constant = SpectralField::constant(&grid, 2.0);
    assert!(commutator_constant(0.0, 1.5, &constant, 5, 1).unwrap() < 1e-12);
    let psi = ControlProfile::bump(&grid, PI, PI / 4.0).unwrap().g_field().clone();
    assert_eq!(commutator_constant(1.0, 0.0, &psi, 5, 1).unwrap(), 0.0);
    assert!(commutator_constant(0.0, 1.5, &psi, 0, 1).is_err());
    let estimate = |k: usize| {
        let grid = PeriodicGrid::new(k).unwrap();
        let psi = ControlProfile::bump(&grid, PI, 3.0 * PI / 4.0).unwrap().g_field().clone();
        commutator_constant(0.0, 1.5, &psi, 20, 7).unwrap()
    };
    let (a, b) = (estimate(16), estimate(32));
    println!("commutator constants {a} {b}");
    assert!((b - a).abs() < 0.2 * a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn g_is_self_adjoint_and_volume_preserving(
        center in 0.0f64..6.25,
        radius in 0.3f64..3.0,
        seed in 0u64..1000,
    ) {
        let grid = PeriodicGrid::new(12).unwrap();
        let p = ControlProfile::bump(&grid, center, radius).unwrap();
        let u = random_field(&grid, seed, true);
        let v = random_field(&grid, seed ^ 0x5555, true);
        let gu = apply_g_op(&u, &p).unwrap();
        let gv = apply_g_op(&v, &p).unwrap();
        let (a, b) = (gu.dot(&v), u.dot(&gv));
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        prop_assert!(gu.mean().abs() < 1e-12);
        prop_assert!(u.dot(&feedback(&u, 3.0, &p).unwrap()) >= -1e-12);
    }
}
