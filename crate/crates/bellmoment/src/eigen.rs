//! Hermitian eigendecomposition via cyclic complex Jacobi rotations.
//!
//! Target dimensions are small (<= 64); each sweep zeroes every
//! off-diagonal element once with a phased plane rotation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as matrix columns, ordered as `values`.
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        let n = self.vectors.dim();
        (0..n).map(|i| self.vectors[(i, k)]).collect()
    }

    /// ||M - V diag(λ) V†||_max, the decomposition's own residual oracle.
    pub fn reconstruction_error(&self, m: &ComplexMatrix) -> f64 {
        let n = m.dim();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::ZERO;
                for k in 0..n {
                    acc += self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)].conj();
                }
                err = err.max((acc - m[(i, j)]).norm());
            }
        }
        err
    }
}

fn off_norm(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Diagonalize a Hermitian matrix. `tol` bounds the accepted hermiticity
/// deviation of the input.
pub fn hermitian_eigen(m: &ComplexMatrix, tol: f64) -> Result<EigenDecomposition> {
    let deviation = m.hermitian_deviation();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation, tol });
    }
    let n = m.dim();
    // Work on the exactly-Hermitian part so rotations preserve symmetry.
    let mut a = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
    }
    let mut v = ComplexMatrix::identity(n);

    let scale = a.max_abs().max(1.0);
    let target = 1e-14 * scale * (n as f64);
    let max_sweeps = 100 * n * n;
    let mut sweeps = 0;
    while off_norm(&a) > target {
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off_norm(&a),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let abs_apq = apq.norm();
                if abs_apq <= 1e-300 {
                    continue;
                }
                let phase = apq / abs_apq;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Unitary R differs from identity only in the (p,q) plane:
                //   R[p][p] = c           R[p][q] = s
                //   R[q][p] = -s·e^{-iφ}  R[q][q] = c·e^{-iφ}
                // with φ the phase of a[p][q]; A <- R† A R, V <- V R.
                let rqp = -s * phase.conj();
                let rqq = c * phase.conj();
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c + aiq * rqp;
                    a[(i, q)] = aip * s + aiq * rqq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c + aqj * rqp.conj();
                    a[(q, j)] = apj * s + aqj * rqq.conj();
                }
                a[(p, q)] = Complex64::ZERO;
                a[(q, p)] = Complex64::ZERO;
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c + viq * rqp;
                    v[(i, q)] = vip * s + viq * rqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, k)] = v[(i, src)];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}
