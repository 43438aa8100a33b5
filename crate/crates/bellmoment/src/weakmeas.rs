//! Monte-Carlo weak measurement with Gaussian detection noise.
//!
//! Sampling happens in the joint eigenbasis of the two commuting (tensor
//! factor) observables: draw exact projective eigenvalue pairs, then add
//! detector noise of variance 1/4g per outcome. This reproduces the
//! Gaussian-POVM outcome distribution — the measured density is the
//! convolution of the projective distribution with the detector kernel
//! D(a) = sqrt(2g/π)·exp(-2g a²) — at a fraction of the cost of
//! integrating Kraus densities directly.
//!
//! Intrinsic moments are recovered either by subtracting the known noise
//! contributions order by order, or by splitting each observable across
//! twin detectors whose cross-correlations are noise-free.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::hermitian_eigen;
use crate::error::{Error, Result};
use crate::inequalities::InequalityReport;
use crate::quantum::{BipartiteState, Observable};
use crate::scenarios::BipartiteScenario;
use crate::table::MomentTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// One detector per party; noise moments subtracted analytically.
    Subtract,
    /// Two independent detectors per party; cross-correlations carry no
    /// noise bias.
    Twin,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeakConfig {
    /// Measurement strength; detector noise variance is 1/4g.
    pub g: f64,
    pub scheme: Scheme,
    pub samples: usize,
    pub seed: u64,
}

impl WeakConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(Error::InvalidConfig(format!("g must be > 0, got {}", self.g)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        Ok(())
    }

    pub fn noise_variance(&self) -> f64 {
        1.0 / (4.0 * self.g)
    }
}

/// One detection round. Primed outcomes are present only for the twin
/// scheme.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub a: f64,
    pub a_prime: Option<f64>,
    pub b: f64,
    pub b_prime: Option<f64>,
}

/// Recovered moments for one (x, y) choice pair. `errors[k][l]` is the
/// standard error of the mean, or `None` when a single sample makes the
/// spread undefined.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatedMoments {
    pub values: [[f64; 3]; 3],
    pub errors: [[Option<f64>; 3]; 3],
    pub samples: usize,
}

fn pair_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_projective_with(
    state: &BipartiteState,
    a: &Observable,
    b: &Observable,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, f64)>> {
    let ea = hermitian_eigen(&a.op, 1e-10)?;
    let eb = hermitian_eigen(&b.op, 1e-10)?;
    let (da, db) = (state.dim_a(), state.dim_b());
    // amplitude in the joint eigenbasis: C = Ua† ψ conj(Ub)
    let mut probs = Vec::with_capacity(da * db);
    let mut outcomes = Vec::with_capacity(da * db);
    for i in 0..da {
        for j in 0..db {
            let mut amp = num_complex::Complex64::ZERO;
            for p in 0..da {
                for q in 0..db {
                    amp += ea.vectors[(p, i)].conj() * eb.vectors[(q, j)].conj()
                        * state.amplitude(p, q);
                }
            }
            probs.push(amp.norm_sqr());
            outcomes.push((ea.values[i], eb.values[j]));
        }
    }
    let total: f64 = probs.iter().sum();
    debug_assert!((total - 1.0).abs() < 1e-9);
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p / total;
        cumulative.push(acc);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let idx = cumulative.partition_point(|&c| c < u).min(outcomes.len() - 1);
        out.push(outcomes[idx]);
    }
    Ok(out)
}

/// Draw `n` i.i.d. eigenvalue pairs from the joint projective
/// distribution of the two observables on `state`.
pub fn sample_projective(
    state: &BipartiteState,
    a: &Observable,
    b: &Observable,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    sample_projective_with(state, a, b, n, &mut pair_rng(seed, 0))
}

fn add_noise_with(
    pairs: &[(f64, f64)],
    cfg: &WeakConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<OutcomeRecord> {
    let sigma = cfg.noise_variance().sqrt();
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    pairs
        .iter()
        .map(|&(va, vb)| match cfg.scheme {
            Scheme::Subtract => OutcomeRecord {
                a: va + normal.sample(rng),
                a_prime: None,
                b: vb + normal.sample(rng),
                b_prime: None,
            },
            Scheme::Twin => OutcomeRecord {
                a: va + normal.sample(rng),
                a_prime: Some(va + normal.sample(rng)),
                b: vb + normal.sample(rng),
                b_prime: Some(vb + normal.sample(rng)),
            },
        })
        .collect()
}

/// Add independent zero-mean Gaussian detector noise of variance 1/4g to
/// each intrinsic outcome (four independent noises in the twin scheme).
pub fn add_detection_noise(pairs: &[(f64, f64)], cfg: &WeakConfig) -> Vec<OutcomeRecord> {
    add_noise_with(pairs, cfg, &mut pair_rng(cfg.seed, 1))
}

/// Per-record unbiased estimators of <A^k B^l> for one record.
fn record_estimators(r: &OutcomeRecord, cfg: &WeakConfig) -> Result<[[f64; 3]; 3]> {
    let inv4g = cfg.noise_variance();
    let mut est = [[0.0; 3]; 3];
    est[0][0] = 1.0;
    match cfg.scheme {
        Scheme::Subtract => {
            if r.a_prime.is_some() || r.b_prime.is_some() {
                return Err(Error::SchemeMismatch("subtract"));
            }
            let (a, b) = (r.a, r.b);
            est[1][0] = a;
            est[0][1] = b;
            est[1][1] = a * b;
            est[2][0] = a * a - inv4g;
            est[0][2] = b * b - inv4g;
            est[2][1] = a * a * b - b * inv4g;
            est[1][2] = a * b * b - a * inv4g;
            est[2][2] = a * a * b * b - (a * a + b * b) * inv4g + inv4g * inv4g;
        }
        Scheme::Twin => {
            let ap = r.a_prime.ok_or(Error::SchemeMismatch("twin"))?;
            let bp = r.b_prime.ok_or(Error::SchemeMismatch("twin"))?;
            let (a, b) = (r.a, r.b);
            est[1][0] = 0.5 * (a + ap);
            est[0][1] = 0.5 * (b + bp);
            est[1][1] = 0.25 * (a * b + a * bp + ap * b + ap * bp);
            est[2][0] = a * ap;
            est[0][2] = b * bp;
            est[2][1] = a * ap * 0.5 * (b + bp);
            est[1][2] = 0.5 * (a + ap) * b * bp;
            est[2][2] = a * ap * b * bp;
        }
    }
    Ok(est)
}

/// Invert the noise relations and report moments with standard errors.
pub fn estimate_moments(records: &[OutcomeRecord], cfg: &WeakConfig) -> Result<EstimatedMoments> {
    if records.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = records.len();
    let mut sum = [[0.0; 3]; 3];
    let mut sum_sq = [[0.0; 3]; 3];
    for r in records {
        let est = record_estimators(r, cfg)?;
        for k in 0..3 {
            for l in 0..3 {
                sum[k][l] += est[k][l];
                sum_sq[k][l] += est[k][l] * est[k][l];
            }
        }
    }
    let mut values = [[0.0; 3]; 3];
    let mut errors = [[None; 3]; 3];
    let nf = n as f64;
    for k in 0..3 {
        for l in 0..3 {
            let mean = sum[k][l] / nf;
            values[k][l] = mean;
            if n >= 2 {
                let var = (sum_sq[k][l] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
                errors[k][l] = Some((var / nf).sqrt());
            }
        }
    }
    errors[0][0] = Some(0.0);
    Ok(EstimatedMoments {
        values,
        errors,
        samples: n,
    })
}

/// Estimated moment table with per-entry standard errors and per-batch
/// sub-tables for propagating uncertainty through nonlinear inequality
/// margins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakTable {
    pub table: MomentTable,
    /// Standard errors laid out like the table entries; `None` marks an
    /// undefined spread (single sample).
    pub errors: Vec<Option<f64>>,
    pub batches: Vec<MomentTable>,
    pub config: WeakConfig,
}

const BATCHES: usize = 10;

/// Run the weak-measurement pipeline for every (x, y) choice pair. Each
/// pair owns two RNG substreams, so results are reproducible and the
/// pairs can run in parallel.
pub fn table_from_weak(s: &BipartiteScenario, cfg: &WeakConfig) -> Result<WeakTable> {
    cfg.validate()?;
    let m_a = s.obs_a.len();
    let m_b = s.obs_b.len();
    let pairs: Vec<(usize, usize)> = (0..m_a)
        .flat_map(|x| (0..m_b).map(move |y| (x, y)))
        .collect();
    let per_pair: Vec<(EstimatedMoments, Vec<EstimatedMoments>)> = pairs
        .par_iter()
        .map(|&(x, y)| -> Result<_> {
            let stream = 2 * (x * m_b + y) as u64;
            let mut sample_rng = pair_rng(cfg.seed, stream);
            let mut noise_rng = pair_rng(cfg.seed, stream + 1);
            let raw = sample_projective_with(
                &s.state,
                &s.obs_a[x],
                &s.obs_b[y],
                cfg.samples,
                &mut sample_rng,
            )?;
            let records = add_noise_with(&raw, cfg, &mut noise_rng);
            let full = estimate_moments(&records, cfg)?;
            let n_batches = if cfg.samples >= 2 * BATCHES { BATCHES } else { 1 };
            let chunk = cfg.samples.div_ceil(n_batches);
            let batch_est = records
                .chunks(chunk)
                .map(|c| estimate_moments(c, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok((full, batch_est))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_batches = per_pair.iter().map(|(_, b)| b.len()).min().unwrap_or(1);
    let mut entries = vec![0.0; m_a * m_b * 9];
    let mut errors = vec![None; m_a * m_b * 9];
    let mut batch_entries = vec![vec![0.0; m_a * m_b * 9]; n_batches];
    for (pair_idx, (full, batch_est)) in per_pair.iter().enumerate() {
        for k in 0..3 {
            for l in 0..3 {
                let i = (pair_idx * 3 + k) * 3 + l;
                entries[i] = full.values[k][l];
                errors[i] = full.errors[k][l];
                for (bi, row) in batch_entries.iter_mut().enumerate() {
                    row[i] = batch_est[bi].values[k][l];
                }
            }
        }
    }
    Ok(WeakTable {
        table: MomentTable::new_unchecked(m_a, m_b, entries)?,
        errors,
        batches: batch_entries
            .into_iter()
            .map(|e| MomentTable::new_unchecked(m_a, m_b, e))
            .collect::<Result<Vec<_>>>()?,
        config: *cfg,
    })
}

impl WeakTable {
    pub fn error(&self, x: usize, y: usize, k: usize, l: usize) -> Option<f64> {
        let m_b = self.table.choices_b();
        self.errors[(((x - 1) * m_b + (y - 1)) * 3 + k) * 3 + l]
    }

    /// Margin of an inequality on the full table plus a batch-means
    /// standard error of that margin.
    pub fn margin_with_sigma<F>(&self, eval: F) -> Result<(f64, f64)>
    where
        F: Fn(&MomentTable) -> Result<InequalityReport>,
    {
        let full = eval(&self.table)?.margin;
        if self.batches.len() < 2 {
            return Ok((full, f64::NAN));
        }
        let margins: Vec<f64> = self
            .batches
            .iter()
            .map(|b| eval(b).map(|r| r.margin))
            .collect::<Result<Vec<_>>>()?;
        let n = margins.len() as f64;
        let mean = margins.iter().sum::<f64>() / n;
        let var = margins.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
        Ok((full, (var / n).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequalities::eval_in33_clamped;
    use crate::quantum::moment;
    use crate::scenarios::{bell_three_choices, tilted_two_choices};

    #[test]
    fn joint_one_one_never_happens_on_bell_diagonal() {
        // <A1²B1²> = 0 forces A1·B1 = 0 on every draw
        let s = bell_three_choices();
        let draws = sample_projective(&s.state, &s.obs_a[0], &s.obs_b[0], 5000, 11).unwrap();
        for (a, b) in draws {
            assert!(a.abs() * b.abs() < 1e-9);
        }
    }

    #[test]
    fn product_state_projectors_always_one() {
        let mut amps = vec![num_complex::Complex64::ZERO; 4];
        amps[0] = num_complex::Complex64::ONE;
        let state = BipartiteState::new(2, 2, amps).unwrap();
        let p = crate::matrix::ComplexMatrix::diagonal(&[1.0, 0.0]);
        let a = Observable::new(crate::quantum::Party::A, 1, p.clone()).unwrap();
        let b = Observable::new(crate::quantum::Party::B, 1, p).unwrap();
        for (va, vb) in sample_projective(&state, &a, &b, 200, 3).unwrap() {
            assert!((va - 1.0).abs() < 1e-12 && (vb - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn off_diagonal_correlator_statistics() {
        let s = bell_three_choices();
        let n = 200_000;
        let draws = sample_projective(&s.state, &s.obs_a[0], &s.obs_b[1], n, 17).unwrap();
        let mean: f64 = draws.iter().map(|(a, b)| a * b).sum::<f64>() / n as f64;
        // Bernoulli with p = 3/8: 5σ band
        let sigma = (0.375 * 0.625 / n as f64).sqrt();
        assert!((mean - 0.375).abs() < 5.0 * sigma, "mean {mean}");
    }

    #[test]
    fn noise_variance_matches_config() {
        let cfg = WeakConfig {
            g: 0.25,
            scheme: Scheme::Twin,
            samples: 100_000,
            seed: 5,
        };
        assert_eq!(cfg.noise_variance(), 1.0);
        let pairs = vec![(0.0, 0.0); cfg.samples];
        let recs = add_detection_noise(&pairs, &cfg);
        let var_a: f64 =
            recs.iter().map(|r| r.a * r.a).sum::<f64>() / cfg.samples as f64;
        assert!((var_a - 1.0).abs() < 0.03);
        // twin difference a - a' has variance 2/4g, mean 0
        let diffs: Vec<f64> = recs.iter().map(|r| r.a - r.a_prime.unwrap()).collect();
        let mean: f64 = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (diffs.len() - 1) as f64;
        assert!(mean.abs() < 0.03);
        assert!((var - 2.0).abs() < 0.05);
    }

    #[test]
    fn strong_limit_outcomes_are_nearly_exact() {
        let cfg = WeakConfig {
            g: 1e8,
            scheme: Scheme::Subtract,
            samples: 1000,
            seed: 9,
        };
        let s = bell_three_choices();
        let raw = sample_projective(&s.state, &s.obs_a[0], &s.obs_b[1], cfg.samples, 9).unwrap();
        let recs = add_detection_noise(&raw, &cfg);
        for (r, (va, vb)) in recs.iter().zip(&raw) {
            assert!((r.a - va).abs() < 1e-3);
            assert!((r.b - vb).abs() < 1e-3);
        }
        let est = estimate_moments(&recs, &cfg).unwrap();
        // at this strength the estimate must match the noiseless
        // empirical mean of the same draws, not just the population value
        let empirical =
            raw.iter().map(|(a, b)| a * a * b * b).sum::<f64>() / cfg.samples as f64;
        assert!((est.values[2][2] - empirical).abs() < 1e-3);
        let exact = moment(&s.state, &s.obs_a[0], &s.obs_b[1], 2, 2).unwrap();
        assert!((empirical - exact).abs() < 0.1);
    }

    #[test]
    fn pure_noise_second_moment_recovers_zero() {
        let cfg = WeakConfig {
            g: 0.5,
            scheme: Scheme::Subtract,
            samples: 100_000,
            seed: 21,
        };
        let pairs = vec![(0.0, 0.0); cfg.samples];
        let recs = add_detection_noise(&pairs, &cfg);
        let est = estimate_moments(&recs, &cfg).unwrap();
        let err = est.errors[2][0].unwrap();
        assert!(est.values[2][0].abs() < 5.0 * err);
    }

    #[test]
    fn both_schemes_recover_cross_moment() {
        let s = bell_three_choices();
        for scheme in [Scheme::Subtract, Scheme::Twin] {
            let cfg = WeakConfig {
                g: 0.5,
                scheme,
                samples: 200_000,
                seed: 33,
            };
            let wt = table_from_weak(&s, &cfg).unwrap();
            let err = wt.error(1, 2, 2, 2).unwrap();
            assert!(
                (wt.table.get(1, 2, 2, 2) - 0.375).abs() < 5.0 * err,
                "{scheme:?}: {} ± {err}",
                wt.table.get(1, 2, 2, 2)
            );
        }
    }

    #[test]
    fn twin_second_moment_strength_independent() {
        let s = tilted_two_choices(std::f64::consts::FRAC_PI_6).unwrap();
        let estimate = |g: f64| {
            let cfg = WeakConfig {
                g,
                scheme: Scheme::Twin,
                samples: 100_000,
                seed: 44,
            };
            let wt = table_from_weak(&s, &cfg).unwrap();
            (wt.table.get(1, 1, 2, 0), wt.error(1, 1, 2, 0).unwrap())
        };
        let (low, e_low) = estimate(0.1);
        let (high, e_high) = estimate(10.0);
        let combined = (e_low * e_low + e_high * e_high).sqrt();
        assert!((low - high).abs() < 5.0 * combined);
    }

    #[test]
    fn single_sample_has_no_error_bars_but_no_crash() {
        let s = bell_three_choices();
        let cfg = WeakConfig {
            g: 0.5,
            scheme: Scheme::Subtract,
            samples: 1,
            seed: 2,
        };
        let wt = table_from_weak(&s, &cfg).unwrap();
        assert!(wt.error(1, 1, 2, 2).is_none());
    }

    #[test]
    fn seed_determinism() {
        let s = bell_three_choices();
        let cfg = WeakConfig {
            g: 0.5,
            scheme: Scheme::Twin,
            samples: 500,
            seed: 77,
        };
        let a = table_from_weak(&s, &cfg).unwrap();
        let b = table_from_weak(&s, &cfg).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn error_bars_shrink_like_inverse_sqrt_n() {
        let s = bell_three_choices();
        let run = |n: usize| {
            let cfg = WeakConfig {
                g: 0.5,
                scheme: Scheme::Subtract,
                samples: n,
                seed: 55,
            };
            table_from_weak(&s, &cfg).unwrap().error(1, 2, 2, 2).unwrap()
        };
        let e1 = run(50_000);
        let e4 = run(200_000);
        let ratio = e1 / e4;
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn measured_density_matches_convolved_kernel() {
        // Kraus-form ground truth at one parameter point: the outcome
        // density for A1 on the Bell state is the two-point projective
        // distribution convolved with D(a) = sqrt(2g/π) e^{-2ga²}.
        let s = bell_three_choices();
        let g = 0.8;
        let cfg = WeakConfig {
            g,
            scheme: Scheme::Subtract,
            samples: 400_000,
            seed: 101,
        };
        let raw = sample_projective(&s.state, &s.obs_a[0], &s.obs_b[0], cfg.samples, 101).unwrap();
        let recs = add_detection_noise(&raw, &cfg);
        // projective marginal of A1 on the singlet: P(0) = P(1) = 1/2
        let density = |a: f64| {
            let d = |x: f64| (2.0 * g / std::f64::consts::PI).sqrt() * (-2.0 * g * x * x).exp();
            0.5 * d(a) + 0.5 * d(a - 1.0)
        };
        let (lo, hi, bins) = (-2.0, 3.0, 25);
        let width = (hi - lo) / bins as f64;
        let mut hist = vec![0usize; bins];
        for r in &recs {
            if r.a >= lo && r.a < hi {
                hist[((r.a - lo) / width) as usize] += 1;
            }
        }
        for (i, &count) in hist.iter().enumerate() {
            let center = lo + (i as f64 + 0.5) * width;
            let expected = density(center) * width * cfg.samples as f64;
            let sigma = expected.sqrt().max(3.0);
            assert!(
                ((count as f64) - expected).abs() < 6.0 * sigma,
                "bin {i}: {count} vs {expected}"
            );
        }
    }

    #[test]
    fn weak_in33_margin_near_exact_value() {
        let s = bell_three_choices();
        let cfg = WeakConfig {
            g: 0.5,
            scheme: Scheme::Twin,
            samples: 200_000,
            seed: 88,
        };
        let wt = table_from_weak(&s, &cfg).unwrap();
        let (margin, sigma) = wt
            .margin_with_sigma(|t| eval_in33_clamped(t, crate::consts::NOISE_CLAMP))
            .unwrap();
        assert!(
            (margin + 0.125).abs() < 5.0 * sigma.max(0.02),
            "margin {margin} sigma {sigma}"
        );
    }
}
