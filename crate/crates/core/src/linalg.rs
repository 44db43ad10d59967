//! Dense eigenvalue routines (general real matrices, `f64`).

use nalgebra::{Matrix3, SMatrix};
use num_complex::Complex;

/// Eigenvalues of a general real 3x3 matrix, sorted by (real, imag).
pub fn eigenvalues3(m: &[[f64; 3]; 3]) -> [Complex<f64>; 3] {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let ev = mat.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    sort_complex(&mut out);
    out
}

/// Eigenvalues of a general real 5x5 matrix, sorted by (real, imag).
pub fn eigenvalues5(m: &[[f64; 5]; 5]) -> [Complex<f64>; 5] {
    let mat = SMatrix::<f64, 5, 5>::from_fn(|i, j| m[i][j]);
    let ev = mat.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2], ev[3], ev[4]];
    sort_complex(&mut out);
    out
}

pub fn sort_complex(z: &mut [Complex<f64>]) {
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
