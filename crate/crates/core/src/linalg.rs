//! Small dense helpers: Cholesky factorization and symmetric solves.

use crate::scalar::Real;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Returns `None` when a non-positive pivot appears.
pub fn cholesky<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Squared ratio of the extreme Cholesky pivots; a cheap lower bound on the
/// 2-norm condition number.
pub fn pivot_condition<T: Real>(l: &[Vec<T>]) -> f64 {
    let diag = l.iter().enumerate().map(|(i, r)| r[i].to_f64_lossy());
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    (hi / lo).powi(2)
}

/// Solves `L Lᵀ x = b` for every column of `b` (`b` is n×m, row-major).
pub fn cholesky_solve<T: Real>(l: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = l.len();
    let m = b.first().map_or(0, |r| r.len());
    let mut x = b.to_vec();
    for c in 0..m {
        for i in 0..n {
            let mut s = x[i][c];
            for k in 0..i {
                s -= l[i][k] * x[k][c];
            }
            x[i][c] = s / l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = x[i][c];
            for k in i + 1..n {
                s -= l[k][i] * x[k][c];
            }
            x[i][c] = s / l[i][i];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let x = cholesky_solve(&l, &[vec![2.0], vec![1.0]]);
        assert!((4.0 * x[0][0] + 2.0 * x[1][0] - 2.0f64).abs() < 1e-12);
        assert!((2.0 * x[0][0] + 3.0 * x[1][0] - 1.0f64).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
    }
}
