//! The quartic witness polynomial in four real variables: nonnegative
//! everywhere but not a sum of polynomial squares. Provides evaluation,
//! a numeric positivity check, the infeasibility certificate for an SOS
//! decomposition, and quantum averaging over a two-choice scenario.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::BipartiteScenario;
use crate::table::MomentTable;

/// Coefficient of the odd cross terms.
const K: f64 = 3.0 * 1.732_050_807_568_877_2 / 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyPoint {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

/// W = A₁²+A₂²+B₁²+B₂² + (A₁²+A₂²)(B₁²+B₂²)
///     − (3√3/4)·((A₁²−A₂²)(B₁+B₂) + (B₁²−B₂²)(A₁+A₂))
pub fn eval_w(p: PolyPoint) -> f64 {
    let sa = p.a1 * p.a1 + p.a2 * p.a2;
    let sb = p.b1 * p.b1 + p.b2 * p.b2;
    let da = p.a1 * p.a1 - p.a2 * p.a2;
    let db = p.b1 * p.b1 - p.b2 * p.b2;
    sa + sb + sa * sb - K * (da * (p.b1 + p.b2) + db * (p.a1 + p.a2))
}

/// Same polynomial in the rotated variables √2·A± = A₁ ± A₂:
/// A₊²+A₋²+B₊²+B₋² + (A₊²+A₋²)(B₊²+B₋²) − 3√(3/2)·A₊B₊(A₋+B₋).
pub fn eval_w_rotated(ap: f64, am: f64, bp: f64, bm: f64) -> f64 {
    let sa = ap * ap + am * am;
    let sb = bp * bp + bm * bm;
    sa + sb + sa * sb - 3.0 * (1.5f64).sqrt() * ap * bp * (am + bm)
}

pub fn grad_w(p: PolyPoint) -> [f64; 4] {
    let sa = p.a1 * p.a1 + p.a2 * p.a2;
    let sb = p.b1 * p.b1 + p.b2 * p.b2;
    let da = p.a1 * p.a1 - p.a2 * p.a2;
    let db = p.b1 * p.b1 - p.b2 * p.b2;
    let bs = p.b1 + p.b2;
    let as_ = p.a1 + p.a2;
    [
        2.0 * p.a1 * (1.0 + sb) - K * (2.0 * p.a1 * bs + db),
        2.0 * p.a2 * (1.0 + sb) - K * (-2.0 * p.a2 * bs + db),
        2.0 * p.b1 * (1.0 + sa) - K * (da + 2.0 * p.b1 * as_),
        2.0 * p.b2 * (1.0 + sa) - K * (da - 2.0 * p.b2 * as_),
    ]
}

fn descend(mut x: [f64; 4]) -> (f64, [f64; 4]) {
    let eval = |x: &[f64; 4]| {
        eval_w(PolyPoint {
            a1: x[0],
            a2: x[1],
            b1: x[2],
            b2: x[3],
        })
    };
    let mut f = eval(&x);
    let mut step = 0.1;
    for _ in 0..5000 {
        let g = grad_w(PolyPoint {
            a1: x[0],
            a2: x[1],
            b1: x[2],
            b2: x[3],
        });
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-12 || step < 1e-14 {
            break;
        }
        let trial: [f64; 4] = std::array::from_fn(|i| x[i] - step * g[i]);
        let ft = eval(&trial);
        if ft < f {
            x = trial;
            f = ft;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    (f, x)
}

/// Multi-start minimization of W: coarse grid over [−3,3]⁴ plus seeded
/// random restarts, each refined by gradient descent.
pub fn min_w(restarts: usize, seed: u64) -> (f64, PolyPoint) {
    let mut starts: Vec<[f64; 4]> = Vec::new();
    let grid = [-3.0, -1.5, 0.0, 1.5, 3.0];
    for &a1 in &grid {
        for &a2 in &grid {
            for &b1 in &grid {
                for &b2 in &grid {
                    starts.push([a1, a2, b1, b2]);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        starts.push(std::array::from_fn(|_| rng.random_range(-3.0..3.0)));
    }
    let (f, x) = starts
        .par_iter()
        .map(|&s| descend(s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    (
        f,
        PolyPoint {
            a1: x[0],
            a2: x[1],
            b1: x[2],
            b2: x[3],
        },
    )
}

/// Numerical form of the SOS infeasibility argument. Any square
/// decomposition forces coefficients with α+γ = δ+ξ = s = (3/2)^{3/2}
/// while α² ≤ 1, δ² ≤ 1, γ²+ξ² ≤ 1. The equality constraints force
/// α²+γ²+δ²+ξ² ≥ s² = 27/8, the inequalities cap it at 3.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonSosCertificate {
    pub s: f64,
    pub forced_lower_bound: f64,
    pub allowed_upper_bound: f64,
    pub infeasible: bool,
    pub min_constraint_violation: f64,
    pub violation_argmin: (f64, f64),
    pub t_star: f64,
    pub t_max_value: f64,
}

/// Minimize max(α²−1, δ²−1, γ²+ξ²−1) with γ = s−α, ξ = s−δ. Positive
/// minimum means the constraint set is empty.
pub fn min_constraint_violation(s: f64) -> (f64, (f64, f64)) {
    let viol = |a: f64, d: f64| -> f64 {
        let g = s - a;
        let xi = s - d;
        (a * a - 1.0).max(d * d - 1.0).max(g * g + xi * xi - 1.0)
    };
    let mut best = (f64::INFINITY, (0.0, 0.0));
    let steps = 240;
    for i in 0..=steps {
        let a = -3.0 + 6.0 * i as f64 / steps as f64;
        for j in 0..=steps {
            let d = -3.0 + 6.0 * j as f64 / steps as f64;
            let v = viol(a, d);
            if v < best.0 {
                best = (v, (a, d));
            }
        }
    }
    // local refinement by shrinking pattern search
    let (mut a, mut d) = best.1;
    let mut h = 0.05;
    while h > 1e-12 {
        let mut improved = false;
        for (da, dd) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (-h, -h)] {
            let v = viol(a + da, d + dd);
            if v < best.0 {
                best.0 = v;
                a += da;
                d += dd;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best.0, (a, d))
}

/// Maximize t²(2−t) over t ≥ 0 by bisecting its derivative 4t − 3t²,
/// which is accurate in the argument where the flat maximum defeats
/// value comparisons.
fn max_t_cubic() -> (f64, f64) {
    let f = |t: f64| t * t * (2.0 - t);
    let df = |t: f64| 4.0 * t - 3.0 * t * t;
    let (mut lo, mut hi) = (1.0f64, 2.0f64); // df(1) > 0 > df(2)
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if df(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

pub fn non_sos_certificate() -> NonSosCertificate {
    let s = (1.5f64).powf(1.5);
    let forced = s * s; // (α+γ)²/2 + (δ+ξ)²/2 = s²
    let allowed = 3.0;
    let (violation, argmin) = min_constraint_violation(s);
    let (t_star, t_max_value) = max_t_cubic();
    NonSosCertificate {
        s,
        forced_lower_bound: forced,
        allowed_upper_bound: allowed,
        infeasible: forced > allowed && violation > 0.0,
        min_constraint_violation: violation,
        violation_argmin: argmin,
        t_star,
        t_max_value,
    }
}

/// ⟨W⟩ from a two-choice moment table by monomial expansion.
pub fn quantum_avg_w_table(t: &MomentTable) -> Result<f64> {
    if t.choices_a() != 2 || t.choices_b() != 2 {
        return Err(Error::InvalidTable(
            "witness polynomial needs two choices per party".into(),
        ));
    }
    let m = |x, y, k, l| t.get(x, y, k, l);
    let quad = m(1, 1, 2, 0) + m(2, 1, 2, 0) + m(1, 1, 0, 2) + m(1, 2, 0, 2);
    let quart = m(1, 1, 2, 2) + m(1, 2, 2, 2) + m(2, 1, 2, 2) + m(2, 2, 2, 2);
    let cross_a = m(1, 1, 2, 1) + m(1, 2, 2, 1) - m(2, 1, 2, 1) - m(2, 2, 2, 1);
    let cross_b = m(1, 1, 1, 2) + m(2, 1, 1, 2) - m(1, 2, 1, 2) - m(2, 2, 1, 2);
    Ok(quad + quart - K * (cross_a + cross_b))
}

/// ⟨W⟩ for a scenario with two choices per party.
pub fn quantum_avg_w(s: &BipartiteScenario) -> Result<f64> {
    quantum_avg_w_table(&s.table()?)
}
