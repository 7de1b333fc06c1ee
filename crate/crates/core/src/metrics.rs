//! Prediction records and the four per-sample membership signals.
//!
//! All signals are computed from a probability vector and the ground-truth
//! label. Logarithms are natural; every log argument is clamped to
//! `[CLAMP_EPS, 1]` so that confident-wrong predictions yield large finite
//! values instead of infinities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Lower clamp applied to every logarithm argument.
pub const CLAMP_EPS: f64 = 1e-12;

/// Default tolerance on `|sum(probs) - 1|` at ingestion.
pub const DEFAULT_PROB_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Membership {
    #[serde(rename = "m")]
    Member,
    #[serde(rename = "n")]
    NonMember,
    #[serde(rename = "u")]
    Unknown,
}

impl Membership {
    pub fn code(self) -> &'static str {
        match self {
            Membership::Member => "m",
            Membership::NonMember => "n",
            Membership::Unknown => "u",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "m" => Some(Membership::Member),
            "n" => Some(Membership::NonMember),
            "u" => Some(Membership::Unknown),
            _ => None,
        }
    }

    /// `Some(true)` for members, `Some(false)` for non-members.
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Membership::Member => Some(true),
            Membership::NonMember => Some(false),
            Membership::Unknown => None,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Membership::Member => Membership::NonMember,
            Membership::NonMember => Membership::Member,
            Membership::Unknown => Membership::Unknown,
        }
    }
}

/// One sample's prediction vector, its true label and its membership tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub membership: Membership,
    pub label: usize,
    pub probs: Vec<f64>,
}

impl PredictionRecord {
    /// Builds a record and checks it against [`DEFAULT_PROB_TOLERANCE`].
    pub fn new(probs: Vec<f64>, label: usize, membership: Membership) -> Result<Self> {
        let record = PredictionRecord {
            id: None,
            membership,
            label,
            probs,
        };
        record
            .validate(DEFAULT_PROB_TOLERANCE)
            .map_err(|reason| AuditError::InvariantViolation { row: 0, reason })?;
        Ok(record)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Checks the simplex and label invariants, returning a human-readable reason on failure.
    pub fn validate(&self, tolerance: f64) -> std::result::Result<(), String> {
        let k = self.probs.len();
        if k < 2 {
            return Err(format!(
                "prediction vector has {k} entries, need at least 2"
            ));
        }
        if self.label >= k {
            return Err(format!("label {} out of range for {k} classes", self.label));
        }
        if let Some((i, p)) = self
            .probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(format!("probability p_{i} = {p} outside [0, 1]"));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(format!(
                "probabilities sum to {sum}, outside tolerance {tolerance} of 1"
            ));
        }
        Ok(())
    }
}

/// An ordered collection of records sharing one class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    num_classes: usize,
    records: Vec<PredictionRecord>,
}

impl PredictionSet {
    /// Validates every record with [`DEFAULT_PROB_TOLERANCE`].
    pub fn new(num_classes: usize, records: Vec<PredictionRecord>) -> Result<Self> {
        Self::with_tolerance(num_classes, records, DEFAULT_PROB_TOLERANCE)
    }

    pub fn with_tolerance(
        num_classes: usize,
        records: Vec<PredictionRecord>,
        tolerance: f64,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(AuditError::InvalidConfig(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        for (row, record) in records.iter().enumerate() {
            if record.probs.len() != num_classes {
                return Err(AuditError::InvariantViolation {
                    row,
                    reason: format!(
                        "record has {} probabilities, set has {num_classes} classes",
                        record.probs.len()
                    ),
                });
            }
            record
                .validate(tolerance)
                .map_err(|reason| AuditError::InvariantViolation { row, reason })?;
        }
        Ok(PredictionSet {
            num_classes,
            records,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PredictionRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PredictionRecord> {
        self.records.iter()
    }

    /// Number of records per label, for labels that occur.
    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn count_membership(&self, membership: Membership) -> usize {
        self.records
            .iter()
            .filter(|r| r.membership == membership)
            .count()
    }

    /// Records with the given membership tag, as a new set.
    pub fn filter_membership(&self, membership: Membership) -> PredictionSet {
        PredictionSet {
            num_classes: self.num_classes,
            records: self
                .records
                .iter()
                .filter(|r| r.membership == membership)
                .cloned()
                .collect(),
        }
    }

    /// Same records with Member and NonMember swapped.
    pub fn swapped_membership(&self) -> PredictionSet {
        PredictionSet {
            num_classes: self.num_classes,
            records: self
                .records
                .iter()
                .map(|r| PredictionRecord {
                    membership: r.membership.swapped(),
                    ..r.clone()
                })
                .collect(),
        }
    }

    /// Concatenates two sets with equal class counts.
    pub fn concat(&self, other: &PredictionSet) -> Result<PredictionSet> {
        if self.num_classes != other.num_classes {
            return Err(AuditError::ClassCountMismatch {
                expected: self.num_classes,
                found: other.num_classes,
            });
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Ok(PredictionSet {
            num_classes: self.num_classes,
            records,
        })
    }
}

impl<'a> IntoIterator for &'a PredictionSet {
    type Item = &'a PredictionRecord;
    type IntoIter = std::slice::Iter<'a, PredictionRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Which comparison makes a sample a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Member iff value >= threshold.
    AtLeast,
    /// Member iff value <= threshold.
    AtMost,
}

impl Direction {
    pub fn is_member(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::AtLeast => value >= threshold,
            Direction::AtMost => value <= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Correctness,
    Confidence,
    Entropy,
    ModifiedEntropy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Correctness,
        MetricKind::Confidence,
        MetricKind::Entropy,
        MetricKind::ModifiedEntropy,
    ];

    pub const THRESHOLDED: [MetricKind; 3] = [
        MetricKind::Confidence,
        MetricKind::Entropy,
        MetricKind::ModifiedEntropy,
    ];

    /// `None` for correctness, which is threshold-free.
    pub fn direction(self) -> Option<Direction> {
        match self {
            MetricKind::Correctness => None,
            MetricKind::Confidence => Some(Direction::AtLeast),
            MetricKind::Entropy | MetricKind::ModifiedEntropy => Some(Direction::AtMost),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MetricKind::Correctness => "corr",
            MetricKind::Confidence => "conf",
            MetricKind::Entropy => "entr",
            MetricKind::ModifiedEntropy => "mentr",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MetricKind {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "corr" | "correctness" => Ok(MetricKind::Correctness),
            "conf" | "confidence" => Ok(MetricKind::Confidence),
            "entr" | "entropy" => Ok(MetricKind::Entropy),
            "mentr" | "modified_entropy" | "modified-entropy" => Ok(MetricKind::ModifiedEntropy),
            other => Err(AuditError::InvalidConfig(format!(
                "unknown metric '{other}'"
            ))),
        }
    }
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

pub fn correctness(record: &PredictionRecord) -> bool {
    argmax(&record.probs) == record.label
}

pub fn confidence(record: &PredictionRecord) -> f64 {
    record.probs[record.label]
}

#[inline]
fn clamped_ln(x: f64) -> f64 {
    x.clamp(CLAMP_EPS, 1.0).ln()
}

/// Shannon entropy of the prediction vector, in nats.
pub fn entropy(record: &PredictionRecord) -> f64 {
    -record.probs.iter().map(|&p| p * clamped_ln(p)).sum::<f64>()
}

/// Label-aware uncertainty: zero for a confident correct prediction and
/// large for a confident wrong one.
///
/// `-(1 - p_y) ln p_y - sum_{i != y} p_i ln(1 - p_i)`
pub fn modified_entropy(record: &PredictionRecord) -> f64 {
    let y = record.label;
    let p_y = record.probs[y];
    let mut value = -(1.0 - p_y) * clamped_ln(p_y);
    for (i, &p) in record.probs.iter().enumerate() {
        if i != y {
            value -= p * clamped_ln(1.0 - p);
        }
    }
    value
}

/// Scalar value of a thresholded metric.
pub fn metric_value(record: &PredictionRecord, kind: MetricKind) -> Result<f64> {
    match kind {
        MetricKind::Correctness => Err(AuditError::UnsupportedMetric(kind)),
        MetricKind::Confidence => Ok(confidence(record)),
        MetricKind::Entropy => Ok(entropy(record)),
        MetricKind::ModifiedEntropy => Ok(modified_entropy(record)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rec(probs: &[f64], label: usize) -> PredictionRecord {
        PredictionRecord::new(probs.to_vec(), label, Membership::Unknown).unwrap()
    }

    #[test]
    fn correctness_examples() {
        assert!(correctness(&rec(&[0.7, 0.2, 0.1], 0)));
        assert!(!correctness(&rec(&[0.1, 0.9], 0)));
        // tie goes to index 0
        assert!(!correctness(&rec(&[0.5, 0.5], 1)));
        assert!(correctness(&rec(&[0.5, 0.5], 0)));
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(&rec(&[0.7, 0.2, 0.1], 0)), 0.7);
        assert_eq!(confidence(&rec(&[0.0, 1.0], 0)), 0.0);
        assert_eq!(confidence(&rec(&[0.25; 4], 3)), 0.25);
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&rec(&[0.25; 4], 0)), 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&rec(&[1.0, 0.0], 0)), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(entropy(&rec(&[0.9, 0.1], 0)), 0.325083, epsilon = 1e-6);
    }

    #[test]
    fn modified_entropy_examples() {
        assert_abs_diff_eq!(modified_entropy(&rec(&[1.0, 0.0], 0)), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            modified_entropy(&rec(&[0.5, 0.5], 0)),
            2f64.ln(),
            epsilon = 1e-12
        );
        let wrong = modified_entropy(&rec(&[1.0, 0.0], 1));
        assert_abs_diff_eq!(
            wrong,
            -2.0 * (1.0 - CLAMP_EPS) * CLAMP_EPS.ln(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(wrong, 55.262, epsilon = 1e-3);
        assert!(wrong.is_finite());
    }

    #[test]
    fn metric_value_dispatch() {
        assert_eq!(
            metric_value(&rec(&[0.7, 0.3], 0), MetricKind::Confidence).unwrap(),
            0.7
        );
        assert_abs_diff_eq!(
            metric_value(&rec(&[0.25; 4], 0), MetricKind::Entropy).unwrap(),
            1.386294,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            metric_value(&rec(&[0.5, 0.5], 0), MetricKind::ModifiedEntropy).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-6
        );
        assert!(matches!(
            metric_value(&rec(&[0.5, 0.5], 0), MetricKind::Correctness),
            Err(AuditError::UnsupportedMetric(MetricKind::Correctness))
        ));
    }

    #[test]
    fn directions() {
        assert_eq!(MetricKind::Confidence.direction(), Some(Direction::AtLeast));
        assert_eq!(MetricKind::Entropy.direction(), Some(Direction::AtMost));
        assert_eq!(
            MetricKind::ModifiedEntropy.direction(),
            Some(Direction::AtMost)
        );
        assert_eq!(MetricKind::Correctness.direction(), None);
    }

    #[test]
    fn entropy_ignores_label_but_mentr_does_not() {
        let right = rec(&[1.0, 0.0, 0.0], 0);
        let wrong = rec(&[1.0, 0.0, 0.0], 2);
        assert_abs_diff_eq!(entropy(&right), entropy(&wrong), epsilon = 1e-15);
        assert!(modified_entropy(&right) < modified_entropy(&wrong));
    }

    #[test]
    fn rejects_bad_records() {
        assert!(PredictionRecord::new(vec![0.5, 0.3], 0, Membership::Member).is_err());
        assert!(PredictionRecord::new(vec![0.5, 0.5], 2, Membership::Member).is_err());
        assert!(PredictionRecord::new(vec![1.0], 0, Membership::Member).is_err());
        assert!(PredictionRecord::new(vec![1.5, -0.5], 0, Membership::Member).is_err());
        assert!(PredictionRecord::new(vec![0.5, 0.5 + 5e-7], 0, Membership::Member).is_ok());
    }

    #[test]
    fn set_rejects_mixed_k() {
        let a = rec(&[0.5, 0.5], 0);
        let b = rec(&[0.2, 0.3, 0.5], 0);
        assert!(matches!(
            PredictionSet::new(2, vec![a, b]),
            Err(AuditError::InvariantViolation { row: 1, .. })
        ));
    }

    #[test]
    fn metric_names_parse() {
        for kind in MetricKind::ALL {
            assert_eq!(kind.short_name().parse::<MetricKind>().unwrap(), kind);
        }
        assert!("nope".parse::<MetricKind>().is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("non-degenerate", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn metric_ranges(probs in (2usize..12).prop_flat_map(simplex), seed in 0usize..100) {
            let k = probs.len();
            let r = PredictionRecord { id: None, membership: Membership::Unknown, label: seed % k, probs };
            let h = entropy(&r);
            prop_assert!(h >= -1e-12 && h <= (k as f64).ln() + 1e-9);
            prop_assert!(modified_entropy(&r) >= -1e-12);
            let c = confidence(&r);
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn non_label_permutation_invariance(probs in (3usize..8).prop_flat_map(simplex), shift in 1usize..7) {
            let k = probs.len();
            let label = 0;
            let mut permuted = probs.clone();
            // rotate the non-label coordinates
            let n = k - 1;
            for j in 0..n {
                permuted[1 + (j + shift) % n] = probs[1 + j];
            }
            let a = PredictionRecord { id: None, membership: Membership::Unknown, label, probs };
            let b = PredictionRecord { id: None, membership: Membership::Unknown, label, probs: permuted };
            prop_assert!((entropy(&a) - entropy(&b)).abs() < 1e-12);
            prop_assert!((modified_entropy(&a) - modified_entropy(&b)).abs() < 1e-12);
            prop_assert_eq!(confidence(&a), confidence(&b));
            // correctness only differs when an off-label tie is broken by index
            if a.probs[0] != a.probs.iter().skip(1).cloned().fold(f64::MIN, f64::max) {
                prop_assert_eq!(correctness(&a), correctness(&b));
            }
        }
    }
}
