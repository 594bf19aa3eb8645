use std::f64::consts::{E, PI};

use kdv5_core::spectral::{
    apply_multiplier, deriv, dr, hilbert, mollify, sobolev_norm, to_physical, to_spectral,
    MultiplierSymbol, PeriodicGrid, SpectralField,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn field_from(grid: &PeriodicGrid, coeffs: &[(f64, f64)], mean: f64) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    for (i, &(re, im)) in coeffs.iter().enumerate().take(grid.n_modes()) {
        let k = i as i64 + 1;
        f.set_coeff(k, Complex64::new(re, im));
        f.set_coeff(-k, Complex64::new(re, -im));
    }
    f.set_coeff(0, Complex64::new(mean, 0.0));
    f
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dr_composes(c in coeffs(), a in -2.0f64..3.0, b in -2.0f64..3.0) {
        let grid = PeriodicGrid::new(16).unwrap();
        let u = field_from(&grid, &c, 0.0);
        let lhs = dr(&dr(&u, b), a);
        let rhs = dr(&u, a + b);
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn hilbert_squared_is_minus_identity(c in coeffs()) {
        let grid = PeriodicGrid::new(16).unwrap();
        let u = field_from(&grid, &c, 0.0);
        let hh = hilbert(&hilbert(&u));
        prop_assert!((&hh + &u).max_abs() <= 1e-15);
        let n0 = sobolev_norm(&u, 0.0);
        prop_assert!((sobolev_norm(&hilbert(&u), 0.0) - n0).abs() <= 1e-14 * n0.max(1.0));
        prop_assert!(hilbert(&u).is_real(1e-15));
    }

    #[test]
    fn d_equals_hilbert_of_derivative(c in coeffs()) {
        let grid = PeriodicGrid::new(16).unwrap();
        let u = field_from(&grid, &c, 0.0);
        let lhs = dr(&u, 1.0);
        let rhs = hilbert(&deriv(&u, 1));
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn parseval_against_physical_quadrature(c in coeffs(), mean in -1.0f64..1.0) {
        let grid = PeriodicGrid::new(16).unwrap();
        let u = field_from(&grid, &c, mean);
        let samples = to_physical(&u);
        let quad: f64 = samples.iter().map(|x| x * x).sum::<f64>() * 2.0 * PI / samples.len() as f64;
        let n2 = sobolev_norm(&u, 0.0).powi(2);
        prop_assert!((quad - n2).abs() <= 1e-10 * n2.max(1e-300));
    }

    #[test]
    fn physical_round_trip(c in coeffs(), mean in -1.0f64..1.0) {
        let grid = PeriodicGrid::new(16).unwrap();
        let u = field_from(&grid, &c, mean);
        let s = to_physical(&u);
        let back = to_physical(&to_spectral(&s, &grid).unwrap());
        let scale = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in s.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn realness_is_preserved(c in coeffs(), r in -1.0f64..4.0, j in 0u32..7, eps in 1e-6f64..0.1) {
        let grid = PeriodicGrid::new(16).unwrap();
        let u = field_from(&grid, &c, 0.3);
        for m in [
            MultiplierSymbol::Dr(r),
            MultiplierSymbol::Derivative(j),
            MultiplierSymbol::Hilbert,
            MultiplierSymbol::Mollifier(eps),
        ] {
            let v = apply_multiplier(&u, &m).unwrap();
            prop_assert!(v.realness_defect() <= 1e-12 * v.max_abs().max(1.0));
        }
    }
}

/// Analytic supremum of `a^γ (1+k²)^{γ/2} e^{−a k²}` over `k`, `a = ε^{1/10} ≤ 1`.
fn mollifier_bound(gamma: f64) -> f64 {
    (E * (gamma / (2.0 * E)).powf(gamma / 2.0)).max(1.0)
}

#[test]
fn mollifier_constants_stay_bounded() {
    let grid = PeriodicGrid::new(64).unwrap();
    let mut u = SpectralField::zeros(&grid);
    for k in 1..=64i64 {
        let z = Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos()) / (k as f64).powi(2);
        u.set_coeff(k, z);
        u.set_coeff(-k, z.conj());
    }
    for gamma in [1.0, 3.5] {
        for s in [0.0, 2.5] {
            let mut ratios = vec![];
            for e in 1..=6 {
                let eps = 10f64.powi(-e);
                let m = mollify(&u, eps);
                let lhs = eps.powf(gamma / 10.0) * sobolev_norm(&m, s + gamma);
                ratios.push(lhs / sobolev_norm(&u, s));
            }
            let worst = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= mollifier_bound(gamma), "gamma={gamma} s={s} {ratios:?}");
        }
    }
}

#[test]
fn mean_of_profile_and_simple_fields() {
    let grid = PeriodicGrid::new(8).unwrap();
    let c = SpectralField::constant(&grid, 5.0);
    assert!((c.mean() - 5.0).abs() < 1e-15);
    assert!(c.project_mean_zero().is_zero());
    let s = SpectralField::from_fn(&grid, |x| x.sin());
    assert!(s.mean().abs() < 1e-16);
    assert!((&s.project_mean_zero() - &s).max_abs() < 1e-16);
}
