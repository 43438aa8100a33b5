//! Explicit local-hidden-variable model for a maximally entangled state
//! with two A-side choices and arbitrary B-side observables.
//!
//! The model is a discrete joint distribution over eigenvalue pairs of
//! the two A-observables with, per cell and per B-choice, a Gaussian (or
//! point-mass) conditional chosen so that every measurable moment
//! <A_±^k B_y^l> with k, l <= 2 matches the quantum prediction.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consts::{LHV_C_ZERO, LHV_VAR_DELTA, LHV_WEIGHT_ZERO, TOL_RECON};
use crate::eigen::hermitian_eigen;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::quantum::{BipartiteState, Observable, Party};
use crate::scenarios::BipartiteScenario;
use crate::table::MomentTable;

/// Conditional distribution of one B-outcome within a cell.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Conditional {
    Gaussian { mean: f64, variance: f64 },
    Delta { point: f64 },
}

impl Conditional {
    pub fn moment(&self, l: usize) -> f64 {
        match (self, l) {
            (_, 0) => 1.0,
            (Conditional::Gaussian { mean, .. }, 1) => *mean,
            (Conditional::Gaussian { mean, variance }, _) => mean * mean + variance,
            (Conditional::Delta { point }, _) => point.powi(l as i32),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LhvCell {
    pub weight: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    /// One conditional per B-choice; choices are independent within a
    /// cell.
    pub conditionals: Vec<Conditional>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LhvModel {
    pub schmidt_dim: usize,
    pub num_b: usize,
    pub cells: Vec<LhvCell>,
    /// How many B-choices exercised the extra-variance (off-block)
    /// branch of the construction.
    pub c_positive_branches: usize,
}

/// <v|1_N|w> where 1_N projects onto the first `n` basis states.
fn bracket(v: &[Complex64], w: &[Complex64], n: usize) -> Complex64 {
    (0..n).map(|m| v[m].conj() * w[m]).sum()
}

/// <v|X|w> for an operator supported on the first `n` basis states.
fn sandwich(v: &[Complex64], x: &ComplexMatrix, w: &[Complex64], n: usize) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for m in 0..n {
        for p in 0..n {
            acc += v[m].conj() * x[(m, p)] * w[p];
        }
    }
    acc
}

/// Block of `m` restricted to the first `n` basis states, embedded back
/// at full dimension.
fn n_block(m: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.dim());
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

/// Build the LHV model for the maximally entangled state of Schmidt
/// dimension `n`. `a_plus` / `a_minus` are the two A-side Hermitian
/// operators (dimension >= n); `bs` the B-side operators (dimension
/// >= n, possibly larger).
pub fn build_lhv(
    n: usize,
    a_plus: &ComplexMatrix,
    a_minus: &ComplexMatrix,
    bs: &[ComplexMatrix],
) -> Result<LhvModel> {
    if n == 0 || a_plus.dim() < n || a_minus.dim() < n || bs.iter().any(|b| b.dim() < n) {
        return Err(Error::BadSchmidtRank(n));
    }
    if a_plus.dim() != a_minus.dim() {
        return Err(Error::DimensionMismatch {
            expected: a_plus.dim(),
            got: a_minus.dim(),
        });
    }
    for b in bs {
        b.check_hermitian()?;
    }
    let ep = hermitian_eigen(a_plus, 1e-10)?;
    let em = hermitian_eigen(a_minus, 1e-10)?;
    let dim_a = a_plus.dim();
    let nf = n as f64;

    // Per B-choice operators in the Schmidt block: X = 1_N B* 1_N and the
    // semipositive remainder C = 1_N B*² 1_N - X².
    struct BData {
        x: ComplexMatrix,
        c: ComplexMatrix,
        c_plus: Vec<f64>,
        c_minus: Vec<f64>,
        c_total: f64,
    }
    let mut b_data = Vec::with_capacity(bs.len());
    for b in bs {
        let b_star = b.conjugate();
        let x = n_block(&b_star, n);
        let b_star_sq = b_star.mul(&b_star)?;
        let c = n_block(&b_star_sq, n).sub(&x.mul(&x)?)?;
        let c_plus: Vec<f64> = (0..dim_a)
            .map(|i| sandwich(&ep.vector(i), &c, &ep.vector(i), n).re / nf)
            .collect();
        let c_minus: Vec<f64> = (0..dim_a)
            .map(|j| sandwich(&em.vector(j), &c, &em.vector(j), n).re / nf)
            .collect();
        let c_total = c_plus.iter().sum::<f64>();
        // c does not depend on which side sums it
        debug_assert!((c_total - c_minus.iter().sum::<f64>()).abs() < 1e-9 * (1.0 + c_total.abs()));
        b_data.push(BData {
            x,
            c,
            c_plus,
            c_minus,
            c_total,
        });
    }
    let _ = &b_data.first().map(|d| &d.c); // keep C accessible for debugging

    let mut cells = Vec::new();
    let mut c_positive_branches_mask = vec![false; bs.len()];
    for i in 0..dim_a {
        let vp = ep.vector(i);
        for j in 0..dim_a {
            let vm = em.vector(j);
            let overlap = bracket(&vp, &vm, n);
            let weight = overlap.norm_sqr() / nf;
            if weight <= LHV_WEIGHT_ZERO {
                continue;
            }
            let mut conditionals = Vec::with_capacity(bs.len());
            for (y, d) in b_data.iter().enumerate() {
                let q = sandwich(&vm, &d.x, &vp, n);
                // 2N <b>_cell = <a+|1_N|a-><a-|X|a+> + c.c.
                let first = (overlap * q).re / nf;
                let mut second = q.norm_sqr() / nf;
                if d.c_total > LHV_C_ZERO {
                    second += d.c_plus[i] * d.c_minus[j] / d.c_total;
                    c_positive_branches_mask[y] = true;
                }
                let mean = first / weight;
                let variance = (second * weight - first * first) / (weight * weight);
                if variance < -1e-12 {
                    return Err(Error::NegativeVariance(variance));
                }
                let variance = variance.max(0.0);
                conditionals.push(if variance <= LHV_VAR_DELTA {
                    Conditional::Delta { point: mean }
                } else {
                    Conditional::Gaussian { mean, variance }
                });
            }
            cells.push(LhvCell {
                weight,
                a_plus: ep.values[i],
                a_minus: em.values[j],
                conditionals,
            });
        }
    }
    let total: f64 = cells.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > TOL_RECON {
        return Err(Error::InvalidConfig(format!(
            "LHV weights sum to {total}, expected 1"
        )));
    }
    Ok(LhvModel {
        schmidt_dim: n,
        num_b: bs.len(),
        cells,
        c_positive_branches: c_positive_branches_mask.iter().filter(|&&b| b).count(),
    })
}

/// Closed-form moment table of the model: choice 1 is A₊, choice 2 is
/// A₋; B-choices in list order.
pub fn lhv_moments(model: &LhvModel) -> Result<MomentTable> {
    let m_b = model.num_b.max(1);
    let mut entries = vec![0.0; 2 * m_b * 9];
    for cell in &model.cells {
        for (x, a_val) in [(1usize, cell.a_plus), (2usize, cell.a_minus)] {
            let apow = [1.0, a_val, a_val * a_val];
            for y in 1..=model.num_b {
                let cond = &cell.conditionals[y - 1];
                for (k, ap) in apow.iter().enumerate() {
                    for l in 0..3 {
                        let i = (((x - 1) * m_b + (y - 1)) * 3 + k) * 3 + l;
                        entries[i] += cell.weight * ap * cond.moment(l);
                    }
                }
            }
        }
    }
    MomentTable::new(2, m_b, entries, 1e-9)
}

/// Monte-Carlo draws from the model: cell by weight, then one
/// independent conditional draw per B-choice.
pub fn sample_lhv(model: &LhvModel, n: usize, seed: u64) -> Vec<(f64, f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = model.cells.iter().map(|c| c.weight).sum();
    let mut cumulative = Vec::with_capacity(model.cells.len());
    let mut acc = 0.0;
    for c in &model.cells {
        acc += c.weight / total;
        cumulative.push(acc);
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let idx = cumulative
                .partition_point(|&c| c < u)
                .min(model.cells.len() - 1);
            let cell = &model.cells[idx];
            let b_vals = cell
                .conditionals
                .iter()
                .map(|cond| match cond {
                    Conditional::Delta { point } => *point,
                    Conditional::Gaussian { mean, variance } => {
                        Normal::new(*mean, variance.sqrt()).unwrap().sample(&mut rng)
                    }
                })
                .collect();
            (cell.a_plus, cell.a_minus, b_vals)
        })
        .collect()
}

/// The quantum moment table the LHV model is meant to reproduce: the
/// maximally entangled state of Schmidt dimension `n` with A-choices
/// (A₊, A₋) and the given B-observables.
pub fn quantum_reference_table(
    n: usize,
    a_plus: &ComplexMatrix,
    a_minus: &ComplexMatrix,
    bs: &[ComplexMatrix],
) -> Result<MomentTable> {
    let dim_a = a_plus.dim();
    let dim_b = bs.first().map_or(n, ComplexMatrix::dim);
    let state = BipartiteState::maximally_entangled(n, dim_a, dim_b)?;
    let scenario = BipartiteScenario::new(
        state,
        vec![
            Observable::new(Party::A, 1, a_plus.clone())?,
            Observable::new(Party::A, 2, a_minus.clone())?,
        ],
        bs.iter()
            .enumerate()
            .map(|(y, b)| Observable::new(Party::B, y + 1, b.clone()))
            .collect::<Result<Vec<_>>>()?,
    )?;
    MomentTable::from_scenario(&scenario)
}

/// Largest discrepancy between the model table and the quantum table
/// over all measurable moments with k, l <= 2.
pub fn max_moment_discrepancy(model: &MomentTable, quantum: &MomentTable) -> f64 {
    let mut worst: f64 = 0.0;
    for x in 1..=model.choices_a() {
        for y in 1..=model.choices_b() {
            for k in 0..3 {
                for l in 0..3 {
                    worst = worst.max((model.get(x, y, k, l) - quantum.get(x, y, k, l)).abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;

    pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(rng.random_range(-1.5..1.5), 0.0);
            for j in (i + 1)..dim {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    pub fn random_projector(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::projector(&v)
    }

    #[test]
    fn identity_b_gives_delta_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 3;
        let ap = random_hermitian(&mut rng, n);
        let am = random_hermitian(&mut rng, n);
        let model = build_lhv(n, &ap, &am, &[ComplexMatrix::identity(n)]).unwrap();
        for cell in &model.cells {
            match cell.conditionals[0] {
                Conditional::Delta { point } => assert!((point - 1.0).abs() < 1e-9),
                Conditional::Gaussian { .. } => panic!("expected point mass"),
            }
        }
        let t = lhv_moments(&model).unwrap();
        for l in 1..3 {
            assert!((t.get(1, 1, 0, l) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qubit_model_matches_quantum_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..25 {
            let ap = random_projector(&mut rng, 2);
            let am = random_projector(&mut rng, 2);
            let b = random_hermitian(&mut rng, 2);
            let model = build_lhv(2, &ap, &am, &[b.clone()]).unwrap();
            let lhv_t = lhv_moments(&model).unwrap();
            let q_t = quantum_reference_table(2, &ap, &am, &[b]).unwrap();
            assert!(max_moment_discrepancy(&lhv_t, &q_t) < 1e-10);
        }
    }

    #[test]
    fn padded_b_dimension_exercises_c_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2;
        let ap = random_hermitian(&mut rng, n);
        let am = random_hermitian(&mut rng, n);
        let b = random_hermitian(&mut rng, 3); // off-block part nonzero generically
        let model = build_lhv(n, &ap, &am, &[b.clone()]).unwrap();
        assert!(model.c_positive_branches > 0);
        let lhv_t = lhv_moments(&model).unwrap();
        let q_t = quantum_reference_table(n, &ap, &am, &[b]).unwrap();
        assert!(max_moment_discrepancy(&lhv_t, &q_t) < 1e-10);
    }

    #[test]
    fn cbs_holds_per_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ap = random_hermitian(&mut rng, 3);
        let am = random_hermitian(&mut rng, 3);
        let bset = [random_hermitian(&mut rng, 4), random_hermitian(&mut rng, 4)];
        let model = build_lhv(3, &ap, &am, &bset).unwrap();
        for cell in &model.cells {
            assert!(cell.weight >= 0.0);
            for cond in &cell.conditionals {
                // <b>² <= <b²>·p̃ in unnormalized form means variance >= 0
                if let Conditional::Gaussian { variance, .. } = cond {
                    assert!(*variance >= 0.0);
                }
            }
        }
    }

    #[test]
    fn dropping_negligible_cells_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ap = random_projector(&mut rng, 3);
        let am = random_projector(&mut rng, 3);
        let b = random_hermitian(&mut rng, 3);
        let model = build_lhv(3, &ap, &am, &[b]).unwrap();
        let t = lhv_moments(&model).unwrap();
        let mut pruned = model.clone();
        pruned.cells.retain(|c| c.weight >= 1e-15);
        let t2 = lhv_moments(&pruned).unwrap();
        assert!(max_moment_discrepancy(&t, &t2) < 1e-12);
    }

    #[test]
    fn sampling_converges_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ap = random_projector(&mut rng, 2);
        let am = random_projector(&mut rng, 2);
        let b = random_hermitian(&mut rng, 2);
        let model = build_lhv(2, &ap, &am, &[b]).unwrap();
        let analytic = lhv_moments(&model).unwrap();
        let n = 200_000;
        let draws = sample_lhv(&model, n, 42);
        let emp: f64 = draws.iter().map(|(a, _, bv)| a * bv[0]).sum::<f64>() / n as f64;
        let spread: f64 = {
            let m2: f64 =
                draws.iter().map(|(a, _, bv)| (a * bv[0]).powi(2)).sum::<f64>() / n as f64;
            ((m2 - emp * emp).max(0.0) / n as f64).sqrt()
        };
        let exact = analytic.get(1, 1, 1, 1);
        assert!((emp - exact).abs() < 5.0 * spread.max(1e-6), "{emp} vs {exact}");
        assert_eq!(draws, sample_lhv(&model, n, 42));
    }

    #[test]
    fn degenerate_a_is_basis_independent() {
        // A₊ with a degenerate eigenvalue: different eigenbases must give
        // the same moment table. Rotate the input by a unitary that fixes
        // the operator but perturbs the solver's path.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let ap = ComplexMatrix::diagonal(&[1.0, 1.0, -1.0]); // degenerate pair
        let am = random_hermitian(&mut rng, n);
        let b = random_hermitian(&mut rng, n);
        let t1 = lhv_moments(&build_lhv(n, &ap, &am, &[b.clone()]).unwrap()).unwrap();
        // same operator written with explicit off-diagonal dust
        let mut ap2 = ap.clone();
        ap2[(0, 1)] = Complex64::new(1e-13, 0.0);
        ap2[(1, 0)] = Complex64::new(1e-13, 0.0);
        let t2 = lhv_moments(&build_lhv(n, &ap2, &am, &[b]).unwrap()).unwrap();
        assert!(max_moment_discrepancy(&t1, &t2) < 1e-9);
    }
}
