//! Small dense linear algebra: determinants and the symmetric tridiagonal
//! eigenproblem.

use alloc::vec;
use alloc::vec::Vec;

use crate::cumulants::Scalar;
use crate::{Error, Result};

/// Determinant of the row-major `n×n` matrix `a` by Gaussian elimination
/// with partial pivoting on absolute value (any nonzero pivot is exact for
/// rationals; the largest is the stable choice for floats).
pub fn determinant<S: Scalar>(mut a: Vec<S>, n: usize) -> S {
    let mut det = S::one();
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs_val();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs_val();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best.is_zero() {
            return S::zero();
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col].clone();
        det = det * p.clone();
        for r in (col + 1)..n {
            let f = a[r * n + col].clone() / p.clone();
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let v = a[r * n + c].clone() - f.clone() * a[col * n + c].clone();
                a[r * n + c] = v;
            }
        }
    }
    det
}

/// Eigenvalues and first eigenvector components of the symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off.len() = diag.len() − 1`), by the implicit QL algorithm.
///
/// Returns `(λ_i, v_{0i})` sorted by eigenvalue.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidArgument("tridiagonal matrix has inconsistent sizes".into()));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    // Only the first row of the eigenvector matrix is needed.
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = libm::fabs(d[m]) + libm::fabs(d[m + 1]);
                if libm::fabs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NumericalBreakdown { order: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + libm::copysign(r, g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let t = z[i + 1];
                z[i + 1] = s * z[i] + c * t;
                z[i] = c * z[i] - s * t;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut out: Vec<(f64, f64)> = d.into_iter().zip(z).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}
