//! Moment tables: all measurable <A_x^k B_y^l> for k, l in {0, 1, 2}.

use serde::{Deserialize, Serialize};

use crate::consts::{TOL_RECON, TOL_SAMPLED_MARGINAL};
use crate::error::{Error, Result};
use crate::quantum::moment;
use crate::scenarios::BipartiteScenario;

/// Entries indexed by 1-based choices x in 1..=mA, y in 1..=mB and
/// powers k, l in 0..=2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    m_a: usize,
    m_b: usize,
    entries: Vec<f64>,
}

impl MomentTable {
    /// Validated constructor; `marginal_tol` bounds the allowed
    /// no-signaling inconsistency of the marginals.
    pub fn new(m_a: usize, m_b: usize, entries: Vec<f64>, marginal_tol: f64) -> Result<Self> {
        let t = Self::new_unchecked(m_a, m_b, entries)?;
        t.validate(marginal_tol)?;
        Ok(t)
    }

    /// No invariant checks; for statistically estimated tables whose
    /// marginals only agree up to sampling noise.
    pub fn new_unchecked(m_a: usize, m_b: usize, entries: Vec<f64>) -> Result<Self> {
        if m_a == 0 || m_b == 0 || entries.len() != m_a * m_b * 9 {
            return Err(Error::InvalidTable(format!(
                "need {} entries for a {}x{} table, got {}",
                m_a * m_b * 9,
                m_a,
                m_b,
                entries.len()
            )));
        }
        Ok(Self { m_a, m_b, entries })
    }

    pub fn validate(&self, marginal_tol: f64) -> Result<()> {
        for x in 1..=self.m_a {
            for y in 1..=self.m_b {
                if (self.get(x, y, 0, 0) - 1.0).abs() > TOL_RECON {
                    return Err(Error::InvalidTable(format!(
                        "entry [{x}][{y}][0][0] = {} must be 1",
                        self.get(x, y, 0, 0)
                    )));
                }
                for k in [2] {
                    if self.get(x, y, k, 0) < -TOL_RECON || self.get(x, y, 0, k) < -TOL_RECON {
                        return Err(Error::InvalidTable(format!(
                            "negative second moment at choices ({x},{y})"
                        )));
                    }
                }
                for k in 0..3 {
                    if (self.get(x, y, k, 0) - self.get(x, 1, k, 0)).abs() > marginal_tol {
                        return Err(Error::InvalidTable(format!(
                            "A-marginal <A_{x}^{k}> depends on y (y={y})"
                        )));
                    }
                    if (self.get(x, y, 0, k) - self.get(1, y, 0, k)).abs() > marginal_tol {
                        return Err(Error::InvalidTable(format!(
                            "B-marginal <B_{y}^{k}> depends on x (x={x})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn choices_a(&self) -> usize {
        self.m_a
    }

    pub fn choices_b(&self) -> usize {
        self.m_b
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, k: usize, l: usize) -> usize {
        debug_assert!(x >= 1 && x <= self.m_a && y >= 1 && y <= self.m_b && k < 3 && l < 3);
        (((x - 1) * self.m_b + (y - 1)) * 3 + k) * 3 + l
    }

    pub fn get(&self, x: usize, y: usize, k: usize, l: usize) -> f64 {
        self.entries[self.idx(x, y, k, l)]
    }

    pub fn set(&mut self, x: usize, y: usize, k: usize, l: usize, value: f64) {
        let i = self.idx(x, y, k, l);
        self.entries[i] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Exact quantum table of a scenario.
    pub fn from_scenario(s: &BipartiteScenario) -> Result<Self> {
        let m_a = s.obs_a.len();
        let m_b = s.obs_b.len();
        let mut entries = vec![0.0; m_a * m_b * 9];
        let mut i = 0;
        for a in &s.obs_a {
            for b in &s.obs_b {
                for k in 0..3 {
                    for l in 0..3 {
                        entries[i] = moment(&s.state, a, b, k, l)?;
                        i += 1;
                    }
                }
            }
        }
        Self::new(m_a, m_b, entries, TOL_RECON)
    }

    /// Empirical table from joint hidden-variable assignments. Each sample
    /// carries one value per choice for both parties; optional nonnegative
    /// weights.
    pub fn from_lhv_samples(samples: &[(Vec<f64>, Vec<f64>)], weights: Option<&[f64]>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let m_a = samples[0].0.len();
        let m_b = samples[0].1.len();
        if m_a == 0 || m_b == 0 {
            return Err(Error::EmptySample);
        }
        if let Some(w) = weights {
            if w.len() != samples.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} weights for {} samples",
                    w.len(),
                    samples.len()
                )));
            }
            if w.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidConfig("negative sample weight".into()));
            }
        }
        let total: f64 = match weights {
            Some(w) => w.iter().sum(),
            None => samples.len() as f64,
        };
        if total <= 0.0 {
            return Err(Error::EmptySample);
        }
        let mut entries = vec![0.0; m_a * m_b * 9];
        for (s_idx, (a_vals, b_vals)) in samples.iter().enumerate() {
            if a_vals.len() != m_a || b_vals.len() != m_b {
                return Err(Error::ShapeMismatch(format!(
                    "sample {s_idx} has inconsistent arity"
                )));
            }
            let w = weights.map_or(1.0, |w| w[s_idx]) / total;
            let mut i = 0;
            for &a in a_vals {
                let apow = [1.0, a, a * a];
                for &b in b_vals {
                    let bpow = [1.0, b, b * b];
                    for ap in apow {
                        for bp in bpow {
                            entries[i] += w * ap * bp;
                            i += 1;
                        }
                    }
                }
            }
        }
        let t = Self::new_unchecked(m_a, m_b, entries)?;
        t.validate(TOL_SAMPLED_MARGINAL.max(1e-9 * t.max_abs()))?;
        Ok(t)
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Mix in a null event (all outcomes 0) with probability 1 - r: every
    /// nontrivial moment is scaled by r.
    pub fn null_mix(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::RateOutOfRange(r));
        }
        let mut out = self.clone();
        for x in 1..=self.m_a {
            for y in 1..=self.m_b {
                for k in 0..3 {
                    for l in 0..3 {
                        if k + l >= 1 {
                            out.set(x, y, k, l, r * self.get(x, y, k, l));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Flat CSV with header `x,y,k,l,value`; floats carry 17 significant
    /// digits so the round trip is bit exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,k,l,value\n");
        for x in 1..=self.m_a {
            for y in 1..=self.m_b {
                for k in 0..3 {
                    for l in 0..3 {
                        out.push_str(&format!("{x},{y},{k},{l},{:.16e}\n", self.get(x, y, k, l)));
                    }
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::InvalidTable(format!(
                    "line {}: expected 5 fields",
                    lineno + 1
                )));
            }
            let parse_idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::InvalidTable(format!("line {}: {e}", lineno + 1)))
            };
            let x = parse_idx(fields[0])?;
            let y = parse_idx(fields[1])?;
            let k = parse_idx(fields[2])?;
            let l = parse_idx(fields[3])?;
            let value: f64 = fields[4]
                .parse()
                .map_err(|e| Error::InvalidTable(format!("line {}: {e}", lineno + 1)))?;
            rows.push((x, y, k, l, value));
        }
        let m_a = rows.iter().map(|r| r.0).max().ok_or(Error::EmptySample)?;
        let m_b = rows.iter().map(|r| r.1).max().unwrap();
        let mut t = Self::new_unchecked(m_a, m_b, vec![0.0; m_a * m_b * 9])?;
        for (x, y, k, l, v) in rows {
            if x == 0 || y == 0 || x > m_a || y > m_b || k > 2 || l > 2 {
                return Err(Error::InvalidTable(format!(
                    "index ({x},{y},{k},{l}) out of range"
                )));
            }
            t.set(x, y, k, l, v);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_all_ones_sample() {
        let t =
            MomentTable::from_lhv_samples(&[(vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0])], None)
                .unwrap();
        for e in t.entries() {
            assert!((e - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_sample_entry() {
        let t = MomentTable::from_lhv_samples(&[(vec![2.0, 0.0], vec![0.0, 3.0])], None).unwrap();
        assert_eq!(t.get(1, 2, 2, 2), 36.0);
        assert_eq!(t.get(1, 1, 1, 1), 0.0);
        assert_eq!(t.get(1, 2, 0, 0), 1.0);
    }

    #[test]
    fn null_mix_scales_nontrivial_entries() {
        let t = MomentTable::from_lhv_samples(&[(vec![2.0, 0.0], vec![0.0, 3.0])], None).unwrap();
        let m = t.null_mix(0.5).unwrap();
        assert_eq!(m.get(1, 2, 2, 2), 18.0);
        assert_eq!(m.get(1, 2, 0, 0), 1.0);
        let id = t.null_mix(1.0).unwrap();
        assert_eq!(id, t);
        assert!(t.null_mix(0.0).is_err());
        assert!(t.null_mix(1.5).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = MomentTable::from_lhv_samples(
            &[
                (vec![0.3191, -1.77], vec![2.5e-11, 0.77]),
                (vec![1.0 / 3.0, 7.11], vec![-0.2, 1e8]),
            ],
            Some(&[0.3, 0.7]),
        )
        .unwrap();
        let back = MomentTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(t, back);
        let json = serde_json::to_string(&t).unwrap();
        let back2: MomentTable = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back2);
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(matches!(
            MomentTable::from_lhv_samples(&[], None),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn marginal_violation_rejected() {
        // hand-build a table whose A-marginal depends on y
        let mut entries = vec![0.0; 2 * 2 * 9];
        for xy in 0..4 {
            entries[xy * 9] = 1.0; // [0][0]
        }
        entries[1 * 9 + 3] = 0.5; // <A_1> at y=2 differs from y=1 (0.0)
        assert!(MomentTable::new(2, 2, entries, 1e-10).is_err());
    }
}
