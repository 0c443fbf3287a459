//! Cyclic Jacobi eigendecomposition for dense symmetric matrices.

use std::cmp::Ordering;

use nalgebra::DMatrix;

/// Off-diagonal Frobenius norm target relative to the full norm.
pub const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Sorted in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

fn off_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Diagonalizes the symmetric part of `a`.
///
/// Eigenvectors are signed so their largest-magnitude entry is positive.
/// Eigenvalues within a relative `1e-10` of each other are ordered by their
/// eigenvectors, compared entry by entry, larger first.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> SymEigen {
    assert!(a.is_square(), "matrix must be square");
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_TOL * m.norm();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_norm(&m) > target {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * kp - s * kq;
                    m[(k, q)] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * pk - s * qk;
                    m[(q, k)] = s * pk + c * qk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let (kp, kq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * kp - s * kq;
                    v[(k, q)] = s * kp + c * kq;
                }
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut col: Vec<f64> = v.column(j).iter().copied().collect();
            let lead = col
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, x)| {
                    if x.abs() > best.1 {
                        (i, x.abs())
                    } else {
                        best
                    }
                })
                .0;
            if col[lead] < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            (m[(j, j)], col)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    // reorder runs of tied eigenvalues by their vectors
    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() <= 1e-10 * scale {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| {
            for (x, y) in a.1.iter().zip(&b.1) {
                if x != y {
                    return y.partial_cmp(x).unwrap_or(Ordering::Equal);
                }
            }
            Ordering::Equal
        });
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    SymEigen {
        values,
        vectors,
        sweeps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymEigen) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        &e.vectors * d * e.vectors.transpose()
    }

    #[test]
    fn rank_one_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[0.4, 0.8, 0.8, 1.6]);
        let e = jacobi_eigen(&a);
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!(e.values[1].abs() < 1e-14);
        let s = 1.0 / 5f64.sqrt();
        assert!((e.vectors[(0, 0)] - s).abs() < 1e-14);
        assert!((e.vectors[(1, 0)] - 2.0 * s).abs() < 1e-14);
        assert!((reconstruct(&e) - a).amax() < 1e-14);
    }

    #[test]
    fn diagonal_input_needs_no_sweeps() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let e = jacobi_eigen(&a);
        assert_eq!(e.sweeps, 0);
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
    }

    #[test]
    fn ties_are_ordered_deterministically() {
        let e = jacobi_eigen(&DMatrix::identity(3, 3));
        assert_eq!(e.vectors, DMatrix::identity(3, 3));
        let zero = jacobi_eigen(&DMatrix::zeros(2, 2));
        assert_eq!(zero.values, vec![0.0, 0.0]);
    }

    #[test]
    fn dense_matrix_is_orthonormal_and_reconstructs() {
        let n = 7;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let (x, y) = (i.min(j) as f64, i.max(j) as f64);
            (1.0 + x * 0.3).sin() * (0.7 * y).cos() + if i == j { 2.0 } else { 0.0 }
        });
        let e = jacobi_eigen(&a);
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
        assert!((reconstruct(&e) - &a).amax() < 1e-12 * a.amax());
        let tr: f64 = a.diagonal().sum();
        assert!((e.values.iter().sum::<f64>() - tr).abs() < 1e-12 * tr.abs());
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }
}
