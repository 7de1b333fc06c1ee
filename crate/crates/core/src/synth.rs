//! Synthetic prediction sets and brute-force oracles.
//!
//! Each generated prediction vector is a Dirichlet draw with
//! `base_concentration` on every coordinate plus a boost on the true-label
//! coordinate. Members get `member_boost`, non-members `nonmember_boost`,
//! both scaled by an optional per-class multiplier. The gap between the two
//! boosts dials how far members and non-members separate.
//!
//! Record `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! parallel and serial generation produce the same set.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::metrics::{Direction, Membership, PredictionRecord, PredictionSet};
use crate::thresholds::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub k: usize,
    pub n_member: usize,
    pub n_nonmember: usize,
    pub member_boost: f64,
    pub nonmember_boost: f64,
    pub base_concentration: f64,
    /// Per-class multiplier on the label boost; length `k` when present.
    #[serde(default)]
    pub heterogeneity: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            k: 10,
            n_member: 5000,
            n_nonmember: 5000,
            member_boost: 8.0,
            nonmember_boost: 3.0,
            base_concentration: 1.0,
            heterogeneity: None,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AuditError::InvalidConfig(msg));
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        for (name, v) in [
            ("member_boost", self.member_boost),
            ("nonmember_boost", self.nonmember_boost),
            ("base_concentration", self.base_concentration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if let Some(h) = &self.heterogeneity {
            if h.len() != self.k {
                return bad(format!(
                    "heterogeneity has {} entries, expected {}",
                    h.len(),
                    self.k
                ));
            }
            if let Some(v) = h.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return bad(format!(
                    "heterogeneity multipliers must be positive, got {v}"
                ));
            }
        }
        Ok(())
    }

    fn multiplier(&self, class: usize) -> f64 {
        self.heterogeneity.as_ref().map_or(1.0, |h| h[class])
    }
}

/// Members first (`n_member` records), then non-members.
pub fn generate(spec: &GeneratorSpec) -> Result<PredictionSet> {
    spec.validate()?;
    let total = spec.n_member + spec.n_nonmember;
    let records: Vec<PredictionRecord> = (0..total)
        .into_par_iter()
        .map(|i| {
            let membership = if i < spec.n_member {
                Membership::Member
            } else {
                Membership::NonMember
            };
            draw_record(spec, i as u64, membership)
        })
        .collect();
    PredictionSet::new(spec.k, records)
}

fn draw_record(spec: &GeneratorSpec, index: u64, membership: Membership) -> PredictionRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let label = rng.random_range(0..spec.k);
    let boost = match membership {
        Membership::Member => spec.member_boost,
        _ => spec.nonmember_boost,
    } * spec.multiplier(label);

    let mut probs: Vec<f64> = (0..spec.k)
        .map(|i| {
            let alpha = spec.base_concentration + if i == label { boost } else { 0.0 };
            Gamma::new(alpha, 1.0)
                .expect("positive shape")
                .sample(&mut rng)
        })
        .collect();
    let sum: f64 = probs.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        probs.iter_mut().for_each(|p| *p /= sum);
    } else {
        probs.iter_mut().for_each(|p| *p = 0.0);
        probs[label] = 1.0;
    }
    PredictionRecord {
        id: None,
        membership,
        label,
        probs,
    }
}

/// Brute-force threshold search: every candidate cut is scored by a full pass.
///
/// Candidates are `-inf`, all midpoints between consecutive distinct values,
/// and `+inf`; the first (smallest) maximizer wins.
pub fn oracle_best_threshold(
    values: &[f64],
    is_member: &[bool],
    direction: Direction,
    objective: Objective,
) -> (f64, f64) {
    assert_eq!(values.len(), is_member.len());
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(f64::INFINITY);

    let n_member = is_member.iter().filter(|&&m| m).count();
    let n_nonmember = is_member.len() - n_member;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &t in &candidates {
        let mut tp = 0;
        let mut tn = 0;
        for (&v, &m) in values.iter().zip(is_member) {
            let predicted = match direction {
                Direction::AtLeast => v >= t,
                Direction::AtMost => v <= t,
            };
            if predicted && m {
                tp += 1;
            }
            if !predicted && !m {
                tn += 1;
            }
        }
        let score = match objective {
            Objective::Accuracy => (tp + tn) as f64 / values.len() as f64,
            Objective::BalancedAccuracy => {
                0.5 * (tp as f64 / n_member as f64 + tn as f64 / n_nonmember as f64)
            }
        };
        if score > best.1 {
            best = (t, score);
        }
    }
    best
}

/// Exact Bayes posterior from raw bin counts, in rational arithmetic.
pub fn oracle_exact_risk(
    member_counts: &[u64],
    nonmember_counts: &[u64],
    pseudo_count: f64,
    p_train: f64,
    bin: usize,
) -> f64 {
    let q = |x: f64| BigRational::from_float(x).expect("finite");
    let int = |n: u64| BigRational::from_integer(BigInt::from(n));
    let pc = q(pseudo_count);
    let density = |counts: &[u64]| {
        let total: u64 = counts.iter().sum();
        let norm = int(total) + &pc * int(counts.len() as u64);
        if norm.is_zero() {
            BigRational::zero()
        } else {
            (int(counts[bin]) + &pc) / norm
        }
    };
    let d_tr = density(member_counts);
    let d_te = density(nonmember_counts);
    let p = q(p_train);
    let one = BigRational::from_integer(BigInt::from(1));
    let num = &p * d_tr;
    let den = &num + (one - &p) * d_te;
    if den.is_zero() {
        return p_train;
    }
    (num / den).to_f64().expect("representable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn oracle_threshold_examples() {
        let (t, acc) = oracle_best_threshold(
            &[0.9, 0.8, 0.6, 0.4],
            &[true, true, false, false],
            Direction::AtLeast,
            Objective::Accuracy,
        );
        assert_abs_diff_eq!(t, 0.7, epsilon = 1e-15);
        assert_eq!(acc, 1.0);
        let (_, acc) = oracle_best_threshold(
            &[0.3; 4],
            &[true, false, true, false],
            Direction::AtLeast,
            Objective::Accuracy,
        );
        assert_eq!(acc, 0.5);
        let (t, acc) = oracle_best_threshold(
            &[3.0, 4.0, 1.0, 2.0],
            &[true, true, false, false],
            Direction::AtMost,
            Objective::Accuracy,
        );
        assert_eq!((t, acc), (f64::NEG_INFINITY, 0.5));
    }

    #[test]
    fn oracle_risk_examples() {
        assert_abs_diff_eq!(
            oracle_exact_risk(&[8, 2], &[2, 8], 0.0, 0.5, 0),
            0.8,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            oracle_exact_risk(&[8, 2], &[2, 8], 0.0, 0.1, 0),
            0.08 / 0.26,
            epsilon = 1e-15
        );
        assert_eq!(oracle_exact_risk(&[3, 7], &[3, 7], 1.0, 0.5, 1), 0.5);
    }

    #[test]
    fn generation_is_deterministic_and_simplex_valued() {
        let spec = GeneratorSpec {
            n_member: 300,
            n_nonmember: 200,
            seed: 7,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert_eq!(a.count_membership(Membership::Member), 300);
        for r in &a {
            let s: f64 = r.probs.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let other = generate(&GeneratorSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn serial_draws_match_parallel_generation() {
        let spec = GeneratorSpec {
            n_member: 50,
            n_nonmember: 50,
            seed: 3,
            ..Default::default()
        };
        let set = generate(&spec).unwrap();
        for (i, r) in set.iter().enumerate() {
            assert_eq!(&draw_record(&spec, i as u64, r.membership), r);
        }
    }

    #[test]
    fn invalid_specs() {
        let base = GeneratorSpec::default();
        assert!(GeneratorSpec {
            k: 1,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(GeneratorSpec {
            member_boost: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(GeneratorSpec {
            heterogeneity: Some(vec![1.0; 3]),
            ..base
        }
        .validate()
        .is_err());
    }
}
