//! Derivative-free search for inequality violations over parameterized
//! two-qubit scenarios: Schmidt angle plus one Hermitian qubit operator
//! per choice, minimized with multi-start Nelder-Mead.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consts::SQRT_CLAMP;
use crate::error::{Error, Result};
use crate::inequalities::{eval_cfrd, eval_in33_clamped, eval_ine22_clamped, InequalityReport};
use crate::matrix::ComplexMatrix;
use crate::quantum::{BipartiteState, Observable, Party};
use crate::scenarios::{BipartiteScenario, tilted_coefficients};
use crate::table::MomentTable;

/// Parameter layout: [theta, (offset, nx, ny, nz) per A-choice, same per
/// B-choice]. The state is cosθ|00> + sinθ|11>; each operator is
/// offset·I + n·σ. In projectors-only mode n is normalized to 1/2 and
/// the offset is pinned to 1/2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchSpace {
    pub m_a: usize,
    pub m_b: usize,
    pub projectors_only: bool,
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        1 + 4 * (self.m_a + self.m_b)
    }

    fn op_from(&self, p: &[f64]) -> ComplexMatrix {
        let (offset, nx, ny, nz) = if self.projectors_only {
            let norm = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
            if norm < 1e-12 {
                (0.5, 0.0, 0.0, 0.5)
            } else {
                (0.5, 0.5 * p[1] / norm, 0.5 * p[2] / norm, 0.5 * p[3] / norm)
            }
        } else {
            (p[0], p[1], p[2], p[3])
        };
        ComplexMatrix::new(
            2,
            vec![
                Complex64::new(offset + nz, 0.0),
                Complex64::new(nx, -ny),
                Complex64::new(nx, ny),
                Complex64::new(offset - nz, 0.0),
            ],
        )
        .unwrap()
    }

    pub fn decode(&self, params: &[f64]) -> Result<BipartiteScenario> {
        if params.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: params.len(),
            });
        }
        let theta = params[0];
        let state = BipartiteState::new(
            2,
            2,
            vec![
                Complex64::new(theta.cos(), 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::new(theta.sin(), 0.0),
            ],
        )?;
        let mut obs_a = Vec::with_capacity(self.m_a);
        let mut obs_b = Vec::with_capacity(self.m_b);
        for x in 0..self.m_a {
            let p = &params[1 + 4 * x..1 + 4 * (x + 1)];
            obs_a.push(Observable::new(Party::A, x + 1, self.op_from(p))?);
        }
        for y in 0..self.m_b {
            let p = &params[1 + 4 * (self.m_a + y)..1 + 4 * (self.m_a + y + 1)];
            obs_b.push(Observable::new(Party::B, y + 1, self.op_from(p))?);
        }
        BipartiteScenario::new(state, obs_a, obs_b)
    }
}

fn check_name(ineq: &str) -> Result<()> {
    match ineq {
        "in33" | "ine22" | "cfrd" => Ok(()),
        other => Err(Error::UnknownInequality(other.to_string())),
    }
}

fn eval_named(t: &MomentTable, ineq: &str) -> Result<InequalityReport> {
    match ineq {
        "in33" => eval_in33_clamped(t, SQRT_CLAMP),
        "ine22" => eval_ine22_clamped(t, SQRT_CLAMP),
        "cfrd" => eval_cfrd(t),
        other => Err(Error::UnknownInequality(other.to_string())),
    }
}

/// Margin of the named inequality at the decoded parameter point.
/// Negative means violation. Decode or evaluation failures surface as a
/// large penalty so the simplex walks away from them.
pub fn objective(space: &SearchSpace, params: &[f64], ineq: &str) -> f64 {
    let scenario = match space.decode(params) {
        Ok(s) => s,
        Err(_) => return f64::MAX / 4.0,
    };
    match scenario.table().and_then(|t| eval_named(&t, ineq)) {
        Ok(report) => report.margin,
        Err(_) => f64::MAX / 4.0,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NmOptions {
    pub initial_step: f64,
    pub max_evals: usize,
    pub diameter_tol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.25,
            max_evals: 4000,
            diameter_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NmResult {
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    /// Best-so-far after each accepted iteration; nonincreasing.
    pub trace: Vec<f64>,
}

/// Standard Nelder-Mead simplex descent: reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5. Deterministic given x0 and options.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NmOptions) -> NmResult {
    let n = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
    let mut trace = Vec::new();
    let centroid = |simplex: &[Vec<f64>]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for p in &simplex[..n] {
            for i in 0..n {
                c[i] += p[i] / n as f64;
            }
        }
        c
    };
    let mut converged = false;
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;
        trace.push(values[0]);
        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        let c = centroid(&simplex);
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n).map(|i| c[i] + (c[i] - worst[i])).collect();
        let fr = eval(&reflect, &mut evals);
        if fr < values[0] {
            let expand: Vec<f64> = (0..n).map(|i| c[i] + 2.0 * (c[i] - worst[i])).collect();
            let fe = eval(&expand, &mut evals);
            if fe < fr {
                simplex[n] = expand;
                values[n] = fe;
            } else {
                simplex[n] = reflect;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflect;
            values[n] = fr;
        } else {
            let base = if fr < values[n] { &reflect } else { &worst };
            let fbase = fr.min(values[n]);
            let contract: Vec<f64> = (0..n).map(|i| c[i] + 0.5 * (base[i] - c[i])).collect();
            let fc = eval(&contract, &mut evals);
            if fc < fbase {
                simplex[n] = contract;
                values[n] = fc;
            } else {
                for j in 1..=n {
                    for i in 0..n {
                        simplex[j][i] = simplex[0][i] + 0.5 * (simplex[j][i] - simplex[0][i]);
                    }
                    values[j] = eval(&simplex[j].clone(), &mut evals);
                }
            }
        }
    }
    let (bi, bv) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    trace.push(bv.min(*trace.last().unwrap_or(&f64::INFINITY)));
    NmResult {
        best_value: bv,
        best_point: simplex[bi].clone(),
        evaluations: evals,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub inequality: String,
    pub best_margin: f64,
    pub best_params: Vec<f64>,
    pub evaluations: usize,
    pub seed: u64,
    pub start_index: usize,
    /// Per-start final margins in start order.
    pub start_margins: Vec<f64>,
}

fn random_start(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p = Vec::with_capacity(space.dim());
    p.push(rng.random_range(0.0..(2.0 * std::f64::consts::PI)));
    for _ in 0..(space.m_a + space.m_b) {
        p.push(rng.random_range(-2.0..2.0));
        for _ in 0..3 {
            p.push(rng.random_range(-1.0..1.0));
        }
    }
    p
}

/// Parameters reproducing the three-choice Bell violation inside the
/// search space: Φ⁺ state with equatorial projectors on A and their
/// spin-flip conjugates on B.
pub fn bell_three_params() -> Vec<f64> {
    let mut p = vec![std::f64::consts::FRAC_PI_4];
    let pi = std::f64::consts::PI;
    for x in 1..=3 {
        let th = 2.0 * pi * x as f64 / 3.0;
        p.extend_from_slice(&[0.5, 0.5 * th.cos(), -0.5 * th.sin(), 0.0]);
    }
    for y in 1..=3 {
        let th = pi - 2.0 * pi * y as f64 / 3.0;
        p.extend_from_slice(&[0.5, 0.5 * th.cos(), -0.5 * th.sin(), 0.0]);
    }
    p
}

fn bloch_of(m: &ComplexMatrix) -> [f64; 4] {
    [
        0.5 * (m[(0, 0)].re + m[(1, 1)].re),
        m[(0, 1)].re,
        -m[(0, 1)].im,
        0.5 * (m[(0, 0)].re - m[(1, 1)].re),
    ]
}

/// Parameters reproducing the tilted two-choice scenario at angle `phi`.
pub fn tilted_params(phi: f64) -> Result<Vec<f64>> {
    let scenario = crate::scenarios::tilted_two_choices(phi)?;
    let (alpha, beta) = tilted_coefficients(phi);
    let mut p = vec![beta.atan2(alpha)];
    for o in scenario.obs_a.iter().chain(scenario.obs_b.iter()) {
        p.extend_from_slice(&bloch_of(&o.op));
    }
    Ok(p)
}

/// Multi-start search: `n_starts` seeded random starts plus any
/// `extra_starts`, each descended independently; the global best wins
/// with ties broken by lowest start index.
pub fn multi_start(
    space: &SearchSpace,
    ineq: &str,
    n_starts: usize,
    seed: u64,
    opts: &NmOptions,
    extra_starts: &[Vec<f64>],
) -> Result<SearchResult> {
    if n_starts == 0 {
        return Err(Error::InvalidConfig("n_starts must be >= 1".into()));
    }
    check_name(ineq)?;
    let mut starts: Vec<Vec<f64>> = extra_starts.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_starts {
        starts.push(random_start(space, &mut rng));
    }
    let results: Vec<NmResult> = starts
        .par_iter()
        .map(|x0| nelder_mead(|p| objective(space, p, ineq), x0, opts))
        .collect();
    let best_index = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_value.total_cmp(&b.1.best_value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(SearchResult {
        inequality: ineq.to_string(),
        best_margin: results[best_index].best_value,
        best_params: results[best_index].best_point.clone(),
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        seed,
        start_index: best_index,
        start_margins: results.iter().map(|r| r.best_value).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let r = nelder_mead(f, &[1.0, 1.0, 1.0], &NmOptions::default());
        assert!(r.best_value <= 1e-8, "{}", r.best_value);
        assert!(r.converged);
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn bell_params_reproduce_violation() {
        let space = SearchSpace { m_a: 3, m_b: 3, projectors_only: false };
        let m = objective(&space, &bell_three_params(), "in33");
        // sqrt of the exactly-zero diagonal moments leaves O(sqrt(eps)) dust
        assert!((m + 0.125).abs() < 1e-6, "margin {m}");
    }

    #[test]
    fn tilted_params_reproduce_violation() {
        let space = SearchSpace { m_a: 2, m_b: 2, projectors_only: false };
        let phi = std::f64::consts::FRAC_PI_6;
        let m = objective(&space, &tilted_params(phi).unwrap(), "ine22");
        assert!((m + 0.05).abs() < 1e-10, "margin {m}");
    }

    #[test]
    fn projector_mode_matches_general_on_bell_point() {
        // same canonical point expressed in the constrained space
        let space = SearchSpace { m_a: 3, m_b: 3, projectors_only: true };
        let mut p = bell_three_params();
        // projector mode reads only the direction of n
        for chunk in p[1..].chunks_mut(4) {
            chunk[0] = 0.0;
        }
        let m = objective(&space, &p, "in33");
        assert!((m + 0.125).abs() < 1e-6, "margin {m}");
    }

    #[test]
    fn search_is_deterministic() {
        let space = SearchSpace { m_a: 2, m_b: 2, projectors_only: false };
        let opts = NmOptions { max_evals: 400, ..Default::default() };
        let a = multi_start(&space, "ine22", 4, 7, &opts, &[]).unwrap();
        let b = multi_start(&space, "ine22", 4, 7, &opts, &[]).unwrap();
        assert_eq!(a.best_margin, b.best_margin);
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.start_index, b.start_index);
    }

    #[test]
    fn known_points_are_never_lost() {
        let space = SearchSpace { m_a: 3, m_b: 3, projectors_only: false };
        let opts = NmOptions { max_evals: 600, ..Default::default() };
        let r = multi_start(&space, "in33", 2, 1, &opts, &[bell_three_params()]).unwrap();
        assert!(r.best_margin <= -0.125 + 1e-6, "{}", r.best_margin);
    }

    #[test]
    fn unknown_inequality_is_rejected() {
        let space = SearchSpace { m_a: 2, m_b: 2, projectors_only: false };
        assert!(multi_start(&space, "nope", 1, 0, &NmOptions::default(), &[]).is_err());
    }

    #[test]
    fn cfrd_search_finds_no_violation() {
        let space = SearchSpace { m_a: 2, m_b: 2, projectors_only: false };
        let opts = NmOptions { max_evals: 300, ..Default::default() };
        let r = multi_start(&space, "cfrd", 20, 5, &opts, &[]).unwrap();
        assert!(r.best_margin >= -1e-6, "{}", r.best_margin);
    }
}
