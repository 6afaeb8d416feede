//! Small dense complex matrices (channel-count sized), row-major in flat slices.

use nalgebra::{DMatrix, SymmetricEigen};
use realfft::num_complex::Complex64;

/// `out = a * b` for `n x n` matrices.
pub(crate) fn matmul(a: &[Complex64], b: &[Complex64], n: usize, out: &mut [Complex64]) {
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += a[r * n + k] * b[k * n + c];
            }
            out[r * n + c] = acc;
        }
    }
}

pub(crate) fn trace(a: &[Complex64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i].re).sum()
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
/// Returns `false` (leaving `out` unspecified) if a pivot is not positive.
pub(crate) fn hpd_inverse(a: &[Complex64], n: usize, out: &mut [Complex64]) -> bool {
    if n == 1 {
        let d = a[0].re;
        if !(d > 0.0) {
            return false;
        }
        out[0] = Complex64::new(1.0 / d, 0.0);
        return true;
    }
    if n == 2 {
        let (p, q, r) = (a[0].re, a[1], a[3].re);
        let det = p * r - q.norm_sqr();
        if !(p > 0.0) || !(det > 0.0) {
            return false;
        }
        let inv = 1.0 / det;
        out[0] = Complex64::new(r * inv, 0.0);
        out[1] = -q * inv;
        out[2] = -q.conj() * inv;
        out[3] = Complex64::new(p * inv, 0.0);
        return true;
    }
    // Lower factor L with a = L L^H.
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / d;
        }
    }
    // Solve L L^H X = I column by column.
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * out[k * n + col];
            }
            out[i * n + col] = s / l[i * n + i].re;
        }
    }
    true
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix. Eigenvalues below
/// `1e-12` of the largest are treated as zero.
pub(crate) fn hermitian_pinv(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = DMatrix::from_row_slice(n, n, a);
    // Symmetrize to guard the eigen solver against rounding asymmetry.
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(m);
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = max * 1e-12;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] += v[r] * v[c].conj() / lambda;
            }
        }
    }
    out
}

/// Real part of `y^H a y`.
pub(crate) fn quadratic_form(a: &[Complex64], y: &[Complex64]) -> f64 {
    let n = y.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            acc += y[r].conj() * a[r * n + c] * y[c];
        }
    }
    acc.re
}
