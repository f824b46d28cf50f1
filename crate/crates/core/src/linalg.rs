//! Thin wrappers around the dense and tridiagonal eigensolvers.

use std::sync::Once;

use faer::{Mat, Side};

use crate::{c64, Error, Result};

static SEQUENTIAL: Once = Once::new();

/// Pins faer to sequential kernels. Replica-level parallelism is handled by
/// [`crate::runner`], and sequential kernels keep results independent of
/// the thread pool.
pub fn ensure_sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Ascending eigenvalues of a real symmetric matrix (lower triangle read).
pub fn symmetric_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    ensure_sequential();
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))
}

/// Ascending eigenvalues of a complex Hermitian matrix (lower triangle read).
pub fn hermitian_eigenvalues(m: &Mat<c64>) -> Result<Vec<f64>> {
    ensure_sequential();
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples rows `i` and `i + 1`), by implicit
/// QL iteration with Wilkinson-type shifts. Returned in ascending order.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} off-diagonal entries", n - 1),
            found: off.len().to_string(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigensolveFailure(format!(
                    "tridiagonal QL did not converge for index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigensolveFailure("non-finite eigenvalue".into()));
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [1.0, -0.5, 2.0, 0.25, 0.0, 3.0];
        let off = [0.3, 1.1, -0.7, 0.05, 2.0];
        let n = diag.len();
        let dense = Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if j == i + 1 {
                off[i]
            } else if i == j + 1 {
                off[j]
            } else {
                0.0
            }
        });
        let a = tridiagonal_eigenvalues(&diag, &off).unwrap();
        let b = symmetric_eigenvalues(&dense).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn tridiagonal_handles_split_blocks() {
        let v = tridiagonal_eigenvalues(&[2.0, 1.0, 5.0], &[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 5.0]);
        assert_eq!(tridiagonal_eigenvalues(&[4.0], &[]).unwrap(), vec![4.0]);
    }

    #[test]
    fn tridiagonal_rejects_bad_shape() {
        assert!(matches!(
            tridiagonal_eigenvalues(&[1.0, 2.0], &[]),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
