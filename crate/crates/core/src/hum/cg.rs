use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Jacobi-preconditioned conjugate gradients for a Hermitian positive definite
/// operator given only through `apply`. Stops when `‖r‖ ≤ tol·‖b‖`.
///
/// Failure reports the smallest Rayleigh quotient seen along the search
/// directions as the `λ_min` estimate.
pub fn pcg(
    apply: impl Fn(&DVector<Complex64>) -> DVector<Complex64>,
    diag: &DVector<f64>,
    b: &DVector<Complex64>,
    tol: f64,
    max_iterations: usize,
) -> Result<(DVector<Complex64>, usize)> {
    if diag.len() != b.len() {
        return Err(Error::dim("preconditioner and right-hand side differ in length"));
    }
    let precondition = |r: &DVector<Complex64>| {
        DVector::from_iterator(r.len(), r.iter().zip(diag.iter()).map(|(z, d)| z / *d))
    };
    let b_norm = b.norm();
    let mut x = DVector::zeros(b.len());
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = r.dotc(&z).re;
    let mut rayleigh = f64::INFINITY;
    for it in 1..=max_iterations {
        let ap = apply(&p);
        let pap = p.dotc(&ap).re;
        rayleigh = rayleigh.min(pap / p.norm_squared());
        if !(pap > 0.0) {
            return Err(Error::IllConditioned {
                lambda_min: rayleigh,
                reason: format!("nonpositive curvature at CG iteration {it}"),
            });
        }
        let alpha = Complex64::new(rz / pap, 0.0);
        x += &p * alpha;
        r -= &ap * alpha;
        if r.norm() <= tol * b_norm {
            return Ok((x, it));
        }
        z = precondition(&r);
        let rz_next = r.dotc(&z).re;
        p = &z + &p * Complex64::new(rz_next / rz, 0.0);
        rz = rz_next;
    }
    Err(Error::IllConditioned {
        lambda_min: rayleigh,
        reason: format!(
            "CG residual {:.3e} above {:.3e} after {max_iterations} iterations",
            r.norm() / b_norm,
            tol
        ),
    })
}
