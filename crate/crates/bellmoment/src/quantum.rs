//! Bipartite pure states, party-tagged observables, and exact moments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::consts::{TOL_EXACT, TOL_RECON};
use crate::eigen::hermitian_eigen;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

/// Hermitian operator tagged with the observer and choice index (1-based).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observable {
    pub party: Party,
    pub choice: usize,
    pub op: ComplexMatrix,
}

impl Observable {
    pub fn new(party: Party, choice: usize, op: ComplexMatrix) -> Result<Self> {
        if choice == 0 {
            return Err(Error::InvalidConfig("choice index must start at 1".into()));
        }
        op.check_hermitian()?;
        Ok(Self { party, choice, op })
    }
}

/// Pure bipartite state; `amplitudes[i][j]` is the coefficient of |ij>,
/// stored row-major as a dimA x dimB block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BipartiteState {
    dim_a: usize,
    dim_b: usize,
    amplitudes: Vec<Complex64>,
}

impl BipartiteState {
    pub fn new(dim_a: usize, dim_b: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 || amplitudes.len() != dim_a * dim_b {
            return Err(Error::DimensionMismatch {
                expected: dim_a * dim_b,
                got: amplitudes.len(),
            });
        }
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > TOL_EXACT {
            return Err(Error::InvalidConfig(format!(
                "state norm² = {norm_sq} deviates from 1 beyond {TOL_EXACT:e}"
            )));
        }
        Ok(Self {
            dim_a,
            dim_b,
            amplitudes,
        })
    }

    /// Maximally entangled state on the first `n` basis states of each side.
    pub fn maximally_entangled(n: usize, dim_a: usize, dim_b: usize) -> Result<Self> {
        if n == 0 || n > dim_a || n > dim_b {
            return Err(Error::BadSchmidtRank(n));
        }
        let mut amplitudes = vec![Complex64::ZERO; dim_a * dim_b];
        let c = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        for j in 0..n {
            amplitudes[j * dim_b + j] = c;
        }
        Self::new(dim_a, dim_b, amplitudes)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn amplitude(&self, i: usize, j: usize) -> Complex64 {
        self.amplitudes[i * self.dim_b + j]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
}

/// <ψ|(opA ⊗ opB)|ψ>, asserted real within 1e-10 for Hermitian inputs.
pub fn expectation(
    state: &BipartiteState,
    op_a: &ComplexMatrix,
    op_b: &ComplexMatrix,
) -> Result<f64> {
    if op_a.dim() != state.dim_a {
        return Err(Error::DimensionMismatch {
            expected: state.dim_a,
            got: op_a.dim(),
        });
    }
    if op_b.dim() != state.dim_b {
        return Err(Error::DimensionMismatch {
            expected: state.dim_b,
            got: op_b.dim(),
        });
    }
    let (da, db) = (state.dim_a, state.dim_b);
    // y[i][k] = Σ_{j,l} A[i][j] B[k][l] ψ[j][l], computed as A·ψ·Bᵀ.
    let mut tmp = vec![Complex64::ZERO; da * db];
    for i in 0..da {
        for j in 0..da {
            let aij = op_a[(i, j)];
            if aij == Complex64::ZERO {
                continue;
            }
            for l in 0..db {
                tmp[i * db + l] += aij * state.amplitude(j, l);
            }
        }
    }
    let mut val = Complex64::ZERO;
    for i in 0..da {
        for k in 0..db {
            let mut y = Complex64::ZERO;
            for l in 0..db {
                y += tmp[i * db + l] * op_b[(k, l)];
            }
            val += state.amplitude(i, k).conj() * y;
        }
    }
    debug_assert!(
        val.im.abs() <= TOL_RECON * (1.0 + val.re.abs()),
        "imaginary residual {} too large",
        val.im
    );
    if val.im.abs() > TOL_RECON * (1.0 + val.re.abs()) {
        return Err(Error::InvalidConfig(format!(
            "expectation has imaginary residual {:e}",
            val.im
        )));
    }
    Ok(val.re)
}

/// <A_x^k B_y^l> for powers k, l in {0, 1, 2}.
pub fn moment(
    state: &BipartiteState,
    a: &Observable,
    b: &Observable,
    k: usize,
    l: usize,
) -> Result<f64> {
    if a.party != Party::A || b.party != Party::B {
        return Err(Error::InvalidConfig(
            "moment() expects an A-observable and a B-observable".into(),
        ));
    }
    expectation(state, &a.op.pow(k)?, &b.op.pow(l)?)
}

#[derive(Debug, Clone)]
pub struct Schmidt {
    /// Nonnegative, descending; squares sum to 1. Coefficients below
    /// 1e-12 are trimmed together with their basis vectors.
    pub coefficients: Vec<f64>,
    pub basis_a: Vec<Vec<Complex64>>,
    pub basis_b: Vec<Vec<Complex64>>,
}

impl Schmidt {
    /// Max-norm error of Σ_k σ_k a_k[i] b_k[j] against the amplitudes.
    pub fn reconstruction_error(&self, state: &BipartiteState) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..state.dim_a() {
            for j in 0..state.dim_b() {
                let mut acc = Complex64::ZERO;
                for (k, &sigma) in self.coefficients.iter().enumerate() {
                    acc += sigma * self.basis_a[k][i] * self.basis_b[k][j];
                }
                err = err.max((acc - state.amplitude(i, j)).norm());
            }
        }
        err
    }
}

/// Schmidt (singular value) decomposition of a pure state, through the
/// eigendecomposition of ψ†ψ.
pub fn schmidt(state: &BipartiteState) -> Result<Schmidt> {
    let (da, db) = (state.dim_a, state.dim_b);
    let mut gram = ComplexMatrix::zeros(db);
    for j in 0..db {
        for l in 0..db {
            let mut acc = Complex64::ZERO;
            for i in 0..da {
                acc += state.amplitude(i, j).conj() * state.amplitude(i, l);
            }
            gram[(j, l)] = acc;
        }
    }
    let e = hermitian_eigen(&gram, 1e-10)?;
    let mut coefficients = Vec::new();
    let mut basis_a = Vec::new();
    let mut basis_b = Vec::new();
    // ascending eigenvalues -> walk backwards for descending σ
    for k in (0..db).rev() {
        let sigma = e.values[k].max(0.0).sqrt();
        if sigma <= 1e-12 {
            continue;
        }
        let v = e.vector(k);
        // basis_b = conj(v);  basis_a = ψ·v / σ
        let mut a_vec = vec![Complex64::ZERO; da];
        for (i, slot) in a_vec.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for j in 0..db {
                acc += state.amplitude(i, j) * v[j];
            }
            *slot = acc / sigma;
        }
        coefficients.push(sigma);
        basis_a.push(a_vec);
        basis_b.push(v.iter().map(|c| c.conj()).collect());
    }
    Ok(Schmidt {
        coefficients,
        basis_a,
        basis_b,
    })
}
