//! Evaluators for the moment-based local-realism inequalities, including
//! the null-event-robust variant.

use serde::{Deserialize, Serialize};

use crate::consts::SQRT_CLAMP;
use crate::eigen::hermitian_eigen;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::table::MomentTable;

/// Evaluation outcome; `margin = lhs - rhs`, negative margin beyond
/// -1e-12 certifies violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            satisfied: margin >= -1e-12,
        }
    }
}

fn sqrt_clamped(v: f64, clamp: f64, context: &'static str) -> Result<f64> {
    if v < -clamp {
        return Err(Error::NegativeSecondMoment { value: v, context });
    }
    // magnitudes at or below the clamp are zeros plus dust; taking the
    // root would amplify them to sqrt scale
    if v <= clamp {
        return Ok(0.0);
    }
    Ok(v.sqrt())
}

fn require_choices(t: &MomentTable, needed: usize) -> Result<()> {
    if t.choices_a() < needed || t.choices_b() < needed {
        return Err(Error::NotEnoughChoices {
            needed,
            m_a: t.choices_a(),
            m_b: t.choices_b(),
        });
    }
    Ok(())
}

/// Fourth-moment inequality on choices {1, 2}:
///   Σ <A_x²B_y²>  >=  (<A₁B₁> - <A₂B₂>)² + (<A₁B₂> + <A₂B₁>)².
/// Holds classically and quantumly.
pub fn eval_cfrd(t: &MomentTable) -> Result<InequalityReport> {
    require_choices(t, 2)?;
    let lhs = t.get(1, 1, 2, 2) + t.get(1, 2, 2, 2) + t.get(2, 1, 2, 2) + t.get(2, 2, 2, 2);
    let d = t.get(1, 1, 1, 1) - t.get(2, 2, 1, 1);
    let s = t.get(1, 2, 1, 1) + t.get(2, 1, 1, 1);
    Ok(InequalityReport::new("cfrd", lhs, d * d + s * s))
}

/// Generic linear-form family:
///   Σ_i (Σ_xy t_ixy <A_xB_y>)²  <=  Σ_xy <A_x²B_y²>.
/// `coeffs[i][x-1][y-1]` are the linear-form coefficients.
pub fn eval_salles_class(t: &MomentTable, coeffs: &[Vec<Vec<f64>>]) -> Result<InequalityReport> {
    let (m_a, m_b) = (t.choices_a(), t.choices_b());
    for form in coeffs {
        if form.len() != m_a || form.iter().any(|row| row.len() != m_b) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient forms must be {m_a}x{m_b}"
            )));
        }
        if form
            .iter()
            .flatten()
            .any(|c| !c.is_finite())
        {
            return Err(Error::ShapeMismatch("non-finite coefficient".into()));
        }
    }
    let mut lhs = 0.0;
    for x in 1..=m_a {
        for y in 1..=m_b {
            lhs += t.get(x, y, 2, 2);
        }
    }
    let mut rhs = 0.0;
    for form in coeffs {
        let mut linear = 0.0;
        for x in 1..=m_a {
            for y in 1..=m_b {
                linear += form[x - 1][y - 1] * t.get(x, y, 1, 1);
            }
        }
        rhs += linear * linear;
    }
    Ok(InequalityReport::new("salles", lhs, rhs))
}

/// The coefficient pair that reproduces `eval_cfrd` through
/// `eval_salles_class` on a 2x2 table.
pub fn cfrd_coeffs() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![1.0, 0.0], vec![0.0, -1.0]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
    ]
}

/// Scale linear-form coefficients so the quadratic form they induce is
/// bounded by Σ (A_xB_y)² pointwise, making the family inequality valid
/// classically (and hence, for quantum moment tables, quantumly).
pub fn normalize_salles_coeffs(coeffs: &mut [Vec<Vec<f64>>]) -> Result<()> {
    if coeffs.is_empty() {
        return Ok(());
    }
    let m_a = coeffs[0].len();
    let m_b = coeffs[0][0].len();
    let n = m_a * m_b;
    // Gram matrix over (x,y) pairs, largest eigenvalue sets the scale.
    let mut gram = ComplexMatrix::zeros(n);
    for p in 0..n {
        for q in 0..n {
            let mut acc = 0.0;
            for form in coeffs.iter() {
                acc += form[p / m_b][p % m_b] * form[q / m_b][q % m_b];
            }
            gram[(p, q)] = num_complex::Complex64::new(acc, 0.0);
        }
    }
    let e = hermitian_eigen(&gram, 1e-9)?;
    let lambda_max = e.values.last().copied().unwrap_or(0.0);
    if lambda_max > 1.0 {
        let scale = 1.0 / lambda_max.sqrt();
        for form in coeffs.iter_mut() {
            for row in form.iter_mut() {
                for c in row.iter_mut() {
                    *c *= scale;
                }
            }
        }
    }
    Ok(())
}

fn in33_terms(t: &MomentTable, clamp: f64) -> Result<(f64, f64)> {
    require_choices(t, 3)?;
    let sq = |x: usize, y: usize| t.get(x, y, 2, 2);
    let lin = |x: usize, y: usize| t.get(x, y, 1, 1);
    let second_sum = sq(1, 2)
        + sq(2, 3)
        + sq(3, 1)
        + 2.0 * sqrt_clamped(sq(1, 3) * sq(2, 2), clamp, "in33 sqrt(13*22)")?
        + 2.0 * sqrt_clamped(sq(2, 1) * sq(3, 3), clamp, "in33 sqrt(21*33)")?
        + 2.0 * sqrt_clamped(sq(3, 2) * sq(1, 1), clamp, "in33 sqrt(32*11)")?;
    let linear_sum = lin(1, 2) + lin(2, 3) + lin(3, 1);
    Ok((second_sum, linear_sum))
}

/// Three-choice inequality for measurable second-second moments:
///   Σ cyclic <A²B²> + 2Σ cyclic sqrt products  >=  2 Σ cyclic <AB> - 1.
pub fn eval_in33(t: &MomentTable) -> Result<InequalityReport> {
    eval_in33_clamped(t, SQRT_CLAMP)
}

/// Same with a caller-chosen clamp for statistically noisy tables.
pub fn eval_in33_clamped(t: &MomentTable, clamp: f64) -> Result<InequalityReport> {
    let (second_sum, linear_sum) = in33_terms(t, clamp)?;
    Ok(InequalityReport::new(
        "in33",
        second_sum,
        2.0 * linear_sum - 1.0,
    ))
}

/// Null-event-robust form of `eval_in33`, written in the complementary
/// variables A'₁ = 1 - A₁ and B'₂ = 1 - B₂ so that free numeric terms
/// cancel and every side scales linearly with the non-null rate.
///
/// The table holds original-variable moments after `null_mix(r)` with the
/// same `null_rate`; the null event zeroes the measured (complemented)
/// outcomes, which contributes the (1 - r) offsets below. At r = 1 this
/// reduces exactly to `eval_in33`.
pub fn eval_in33r(t: &MomentTable, null_rate: f64) -> Result<InequalityReport> {
    eval_in33r_clamped(t, null_rate, SQRT_CLAMP)
}

pub fn eval_in33r_clamped(t: &MomentTable, null_rate: f64, clamp: f64) -> Result<InequalityReport> {
    if !(null_rate > 0.0 && null_rate <= 1.0) {
        return Err(Error::RateOutOfRange(null_rate));
    }
    let (second_sum, linear_sum) = in33_terms(t, clamp)?;
    let offset = 1.0 - null_rate;
    Ok(InequalityReport::new(
        "in33r",
        offset + second_sum,
        2.0 * (offset + linear_sum) - 1.0,
    ))
}

/// Two-choice inequality needing a non-maximally entangled state:
///   <A₁²B₂²> + <B₁²A₂²> + <(A₁+B₁)²>/4
///     + sqrt<(A₁-B₁)²>·(sqrt<A₁²B₂²> + sqrt<A₂²B₁²>)
///     + 2 sqrt(<A₁²B₁²><A₂²B₂²>)  >=  2(<A₁²B₂> + <B₁²A₂>).
pub fn eval_ine22(t: &MomentTable) -> Result<InequalityReport> {
    eval_ine22_clamped(t, SQRT_CLAMP)
}

pub fn eval_ine22_clamped(t: &MomentTable, clamp: f64) -> Result<InequalityReport> {
    require_choices(t, 2)?;
    let a1_sq = t.get(1, 1, 2, 0);
    let b1_sq = t.get(1, 1, 0, 2);
    let a1b1 = t.get(1, 1, 1, 1);
    let plus_sq = a1_sq + 2.0 * a1b1 + b1_sq;
    let minus_sq = a1_sq - 2.0 * a1b1 + b1_sq;
    let lhs = t.get(1, 2, 2, 2)
        + t.get(2, 1, 2, 2)
        + plus_sq / 4.0
        + sqrt_clamped(minus_sq, clamp, "ine22 <(A1-B1)^2>")?
            * (sqrt_clamped(t.get(1, 2, 2, 2), clamp, "ine22 <A1^2B2^2>")?
                + sqrt_clamped(t.get(2, 1, 2, 2), clamp, "ine22 <A2^2B1^2>")?)
        + 2.0 * sqrt_clamped(
            t.get(1, 1, 2, 2) * t.get(2, 2, 2, 2),
            clamp,
            "ine22 sqrt(11*22)",
        )?;
    let rhs = 2.0 * (t.get(1, 2, 2, 1) + t.get(2, 1, 1, 2));
    Ok(InequalityReport::new("ine22", lhs, rhs))
}
