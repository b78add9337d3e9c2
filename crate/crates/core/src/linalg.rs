//! Small complex-analysis and dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Square root on the closed upper half plane: Im ≥ 0, and Re > 0 when the
/// result is real. Starts from the principal branch and flips the sign
/// explicitly.
pub fn upper_sqrt(z: C64) -> C64 {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// sin(z)/z, with the removable singularity filled in.
pub fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        C64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// sinh(z)/z.
fn shc(z: C64) -> C64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        C64::new(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        // sinh(a+ib) = sinh a cos b + i cosh a sin b keeps both parts
        // accurate for small arguments.
        let s = C64::new(z.re.sinh() * z.im.cos(), z.re.cosh() * z.im.sin());
        s / z
    }
}

/// (e^z − 1)/z without cancellation for small |z|.
pub fn exprel(z: C64) -> C64 {
    let h = z * 0.5;
    h.exp() * shc(h)
}

/// ∫₀^len e^{iβu} du. `len` may be infinite when Im β > 0.
pub fn exp_integral(beta: C64, len: f64) -> C64 {
    if len.is_infinite() {
        debug_assert!(beta.im > 0.0);
        return I / beta;
    }
    if len == 0.0 {
        return C64::new(0.0, 0.0);
    }
    exprel(I * beta * len) * len
}

/// Solve a dense complex system, rejecting numerically singular matrices.
/// The returned ratio is min/max |U_ii| of the LU factorisation.
pub fn solve_dense(a: DMatrix<C64>, b: DVector<C64>, min_pivot_ratio: f64) -> Result<(DVector<C64>, f64)> {
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio > min_pivot_ratio) {
        return Err(Error::SingularMatching(ratio));
    }
    let x = lu.solve(&b).ok_or(Error::SingularMatching(ratio))?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularMatching(ratio));
    }
    Ok((x, ratio))
}

pub type Mat2 = [[C64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn mat2_vec(a: &Mat2, v: &[C64; 2]) -> [C64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn mat2_inv(a: &Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

pub fn mat2_scale(a: &Mat2, s: C64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn mat2_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

pub fn mat2_identity() -> Mat2 {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    [[one, zero], [zero, one]]
}
