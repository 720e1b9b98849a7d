// SPDX-License-Identifier: Apache-2.0

//! Symmetric eigenproblems: cyclic Jacobi for small dense matrices and power
//! iteration for large implicit ones.

use alloc::vec::Vec;

use crate::math::{dot, norm, sqrt};
use crate::{Error, Matrix, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns the eigenvalues (unsorted) and a matrix whose column `k` is the
/// unit eigenvector for eigenvalue `k`.
pub fn symmetric_eigen(a: &Matrix<f64>) -> Result<(Vec<f64>, Matrix<f64>)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: a.cols(),
        });
    }
    if !a.all_finite() {
        return Err(Error::NonFinite("eigen input"));
    }
    let mut m = a.as_slice().to_vec();
    let mut v = alloc::vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    Ok((values, Matrix::new(n, n, v)?))
}

/// Largest eigenpair of a symmetric matrix given densely.
pub fn top_eigenpair_dense(a: &Matrix<f64>) -> Result<(f64, Vec<f64>)> {
    let (values, vectors) = symmetric_eigen(a)?;
    let (k, &lambda) = values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .ok_or(Error::Empty)?;
    let v = (0..a.rows()).map(|i| vectors.get(i, k)).collect();
    Ok((lambda, v))
}

/// Largest eigenpair of a positive semi-definite operator by power
/// iteration, starting from `start`.
pub fn top_eigenpair_power(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut v = start;
    let n0 = norm(&v);
    if !(n0 > 0.0) {
        return Err(Error::NoVariance);
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let mut w = apply(&v);
        lambda = dot(&v, &w);
        let nw = norm(&w);
        if !(nw > 0.0) {
            return Err(Error::NoVariance);
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let delta: f64 = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        v = w;
        if sqrt(delta) < tol {
            break;
        }
    }
    Ok((lambda, v))
}
