//! Canonical states and projector geometries used throughout: the
//! maximally entangled three-choice construction and the tilted
//! two-choice family, plus the violation sweep over the tilt angle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{eval_ine22, InequalityReport};
use crate::matrix::ComplexMatrix;
use crate::quantum::{BipartiteState, Observable, Party};
use crate::table::MomentTable;

/// Pure bipartite state plus one observable list per party. Choice
/// indices are contiguous from 1 in list order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BipartiteScenario {
    pub state: BipartiteState,
    pub obs_a: Vec<Observable>,
    pub obs_b: Vec<Observable>,
}

impl BipartiteScenario {
    pub fn new(state: BipartiteState, obs_a: Vec<Observable>, obs_b: Vec<Observable>) -> Result<Self> {
        for (list, party, dim) in [
            (&obs_a, Party::A, state.dim_a()),
            (&obs_b, Party::B, state.dim_b()),
        ] {
            for (i, o) in list.iter().enumerate() {
                if o.party != party {
                    return Err(Error::InvalidConfig("observable tagged with wrong party".into()));
                }
                if o.choice != i + 1 {
                    return Err(Error::InvalidConfig(
                        "choice indices must be contiguous from 1".into(),
                    ));
                }
                if o.op.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: o.op.dim(),
                    });
                }
            }
        }
        Ok(Self { state, obs_a, obs_b })
    }

    pub fn table(&self) -> Result<MomentTable> {
        MomentTable::from_scenario(self)
    }
}

/// Equatorial projector (1/2)·[[1, e^{iθ}], [e^{-iθ}, 1]].
pub fn equatorial_projector(theta: f64) -> ComplexMatrix {
    let half = Complex64::new(0.5, 0.0);
    let off = Complex64::from_polar(0.5, theta);
    ComplexMatrix::new(2, vec![half, off, off.conj(), half]).unwrap()
}

/// Singlet-type maximally entangled state (|+-> - |-+>)/sqrt(2) with
/// three equatorial projectors per party at angles 2πx/3.
pub fn bell_three_choices() -> BipartiteScenario {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let state = BipartiteState::new(
        2,
        2,
        vec![
            Complex64::ZERO,
            Complex64::new(s, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::ZERO,
        ],
    )
    .unwrap();
    let angle = |x: usize| 2.0 * std::f64::consts::PI * (x as f64) / 3.0;
    let obs = |party| {
        (1..=3)
            .map(|x| Observable::new(party, x, equatorial_projector(angle(x))).unwrap())
            .collect::<Vec<_>>()
    };
    BipartiteScenario::new(state, obs(Party::A), obs(Party::B)).unwrap()
}

/// Tilt-angle family: A₁ = B₁ = |+><+|, A₂/B₂ projectors onto
/// cos φ|+> ± sin φ|->, on the state α|++> + β|--> with
/// α = sin²φ / sqrt(sin⁴φ + cos⁴φ), β = cos²φ / sqrt(sin⁴φ + cos⁴φ).
pub fn tilted_two_choices(phi: f64) -> Result<BipartiteScenario> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&phi) {
        return Err(Error::PhiOutOfRange(phi));
    }
    let (alpha, beta) = tilted_coefficients(phi);
    let state = BipartiteState::new(
        2,
        2,
        vec![
            Complex64::new(alpha, 0.0),
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::new(beta, 0.0),
        ],
    )?;
    let plus = ComplexMatrix::diagonal(&[1.0, 0.0]);
    let n_proj = |sign: f64| {
        ComplexMatrix::projector(&[
            Complex64::new(phi.cos(), 0.0),
            Complex64::new(sign * phi.sin(), 0.0),
        ])
    };
    BipartiteScenario::new(
        state,
        vec![
            Observable::new(Party::A, 1, plus.clone())?,
            Observable::new(Party::A, 2, n_proj(1.0))?,
        ],
        vec![
            Observable::new(Party::B, 1, plus)?,
            Observable::new(Party::B, 2, n_proj(-1.0))?,
        ],
    )
}

/// Schmidt coefficients (α, β) of the tilted family.
pub fn tilted_coefficients(phi: f64) -> (f64, f64) {
    let s2 = phi.sin() * phi.sin();
    let c2 = phi.cos() * phi.cos();
    let norm = (s2 * s2 + c2 * c2).sqrt();
    (s2 / norm, c2 / norm)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub phi: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Evaluate the two-choice inequality across a grid of tilt angles.
pub fn sweep_ine22(phi_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    phi_grid
        .iter()
        .map(|&phi| {
            let scenario = tilted_two_choices(phi)?;
            let report: InequalityReport = eval_ine22(&scenario.table()?)?;
            Ok(SweepPoint {
                phi,
                lhs: report.lhs,
                rhs: report.rhs,
                margin: report.margin,
            })
        })
        .collect()
}
