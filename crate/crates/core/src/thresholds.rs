//! Attack thresholds learned from shadow data.
//!
//! For every class the learner scans all cut points of the step-shaped
//! accuracy objective: the two infinite sentinels and the midpoints between
//! consecutive distinct metric values. The best cut is exact, with no grid
//! resolution to tune. Ties go to the smallest threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::metrics::{metric_value, Direction, Membership, MetricKind, PredictionSet};

pub const DEFAULT_MIN_CLASS_SUPPORT: usize = 5;

/// What the threshold search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Fraction of correctly classified shadow samples.
    #[default]
    Accuracy,
    /// Mean of true-positive and true-negative rates.
    BalancedAccuracy,
}

impl Objective {
    /// Score of a cut given its confusion counts.
    pub fn score(self, tp: usize, tn: usize, n_member: usize, n_nonmember: usize) -> f64 {
        match self {
            Objective::Accuracy => (tp + tn) as f64 / (n_member + n_nonmember) as f64,
            Objective::BalancedAccuracy => {
                0.5 * (tp as f64 / n_member as f64 + tn as f64 / n_nonmember as f64)
            }
        }
    }
}

/// A chosen cut and the objective value it reaches on the data it was learned from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub threshold: f64,
    pub accuracy: f64,
}

/// Exhaustive search for the best cut over `(value, is_member)` pairs.
///
/// Returns `None` unless both members and non-members are present.
pub fn best_cut(
    samples: &[(f64, bool)],
    direction: Direction,
    objective: Objective,
) -> Option<Cut> {
    let n_member = samples.iter().filter(|(_, m)| *m).count();
    let n_nonmember = samples.len() - n_member;
    if n_member == 0 || n_nonmember == 0 {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // (tp, tn) given how many members / non-members fall below the cut.
    let confusion = |members_below: usize, nonmembers_below: usize| match direction {
        Direction::AtLeast => (n_member - members_below, nonmembers_below),
        Direction::AtMost => (members_below, n_nonmember - nonmembers_below),
    };
    let score = |(tp, tn): (usize, usize)| objective.score(tp, tn, n_member, n_nonmember);

    let mut best = Cut {
        threshold: f64::NEG_INFINITY,
        accuracy: score(confusion(0, 0)),
    };
    let mut members_below = 0;
    let mut nonmembers_below = 0;
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == value {
            if sorted[i].1 {
                members_below += 1;
            } else {
                nonmembers_below += 1;
            }
            i += 1;
        }
        let threshold = if i < sorted.len() {
            midpoint(value, sorted[i].0)
        } else {
            f64::INFINITY
        };
        let accuracy = score(confusion(members_below, nonmembers_below));
        if accuracy > best.accuracy {
            best = Cut {
                threshold,
                accuracy,
            };
        }
    }
    Some(best)
}

/// Midpoint between two consecutive distinct sorted values.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub min_class_support: usize,
    pub objective: Objective,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            min_class_support: DEFAULT_MIN_CLASS_SUPPORT,
            objective: Objective::Accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub threshold: f64,
    /// Objective value on this class's shadow samples at `threshold`.
    pub shadow_accuracy: f64,
    pub n_member: usize,
    pub n_nonmember: usize,
    /// The class lacked support and uses the pooled threshold.
    pub fallback: bool,
}

/// Per-class thresholds for one metric, with a pooled fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub metric: MetricKind,
    pub direction: Direction,
    pub per_class: BTreeMap<usize, ClassThreshold>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub global_threshold: f64,
    pub global_accuracy: f64,
    pub min_class_support: usize,
    pub objective: Objective,
}

impl ThresholdTable {
    /// Threshold for `class`; unseen classes use the pooled threshold.
    pub fn threshold_for(&self, class: usize) -> f64 {
        self.per_class
            .get(&class)
            .map_or(self.global_threshold, |c| c.threshold)
    }

    pub fn fallback_classes(&self) -> Vec<usize> {
        self.per_class
            .iter()
            .filter(|(_, c)| c.fallback)
            .map(|(&y, _)| y)
            .collect()
    }
}

fn metric_samples(shadow: &PredictionSet, metric: MetricKind) -> Result<Vec<(usize, f64, bool)>> {
    let mut out = Vec::with_capacity(shadow.len());
    for r in shadow {
        if let Some(is_member) = r.membership.as_bool() {
            out.push((r.label, metric_value(r, metric)?, is_member));
        }
    }
    Ok(out)
}

fn check_shadow(shadow: &PredictionSet, metric: MetricKind) -> Result<Direction> {
    let direction = metric
        .direction()
        .ok_or(AuditError::UnsupportedMetric(metric))?;
    if shadow.count_membership(Membership::Member) == 0
        || shadow.count_membership(Membership::NonMember) == 0
    {
        return Err(AuditError::EmptyShadow);
    }
    Ok(direction)
}

/// One threshold for all classes, found by pooling every shadow sample.
pub fn learn_global_threshold(
    shadow: &PredictionSet,
    metric: MetricKind,
    objective: Objective,
) -> Result<Cut> {
    let direction = check_shadow(shadow, metric)?;
    let pooled: Vec<(f64, bool)> = metric_samples(shadow, metric)?
        .into_iter()
        .map(|(_, v, m)| (v, m))
        .collect();
    best_cut(&pooled, direction, objective).ok_or(AuditError::EmptyShadow)
}

/// Class-dependent thresholds. Classes with fewer than
/// `min_class_support` members or non-members fall back to the pooled threshold.
pub fn learn_class_thresholds(
    shadow: &PredictionSet,
    metric: MetricKind,
    config: &ThresholdConfig,
) -> Result<ThresholdTable> {
    let direction = check_shadow(shadow, metric)?;
    let samples = metric_samples(shadow, metric)?;
    let pooled: Vec<(f64, bool)> = samples.iter().map(|&(_, v, m)| (v, m)).collect();
    let global = best_cut(&pooled, direction, config.objective).ok_or(AuditError::EmptyShadow)?;

    let mut by_class: BTreeMap<usize, Vec<(f64, bool)>> = BTreeMap::new();
    for r in shadow {
        by_class.entry(r.label).or_default();
    }
    for &(y, v, m) in &samples {
        by_class.entry(y).or_default().push((v, m));
    }

    let support = config.min_class_support.max(1);
    let per_class = by_class
        .into_iter()
        .map(|(y, values)| {
            let n_member = values.iter().filter(|(_, m)| *m).count();
            let n_nonmember = values.len() - n_member;
            let entry = if n_member >= support && n_nonmember >= support {
                let cut =
                    best_cut(&values, direction, config.objective).expect("both sides present");
                ClassThreshold {
                    threshold: cut.threshold,
                    shadow_accuracy: cut.accuracy,
                    n_member,
                    n_nonmember,
                    fallback: false,
                }
            } else {
                ClassThreshold {
                    threshold: global.threshold,
                    shadow_accuracy: accuracy_at(&values, direction, global.threshold),
                    n_member,
                    n_nonmember,
                    fallback: true,
                }
            };
            (y, entry)
        })
        .collect();

    Ok(ThresholdTable {
        metric,
        direction,
        per_class,
        global_threshold: global.threshold,
        global_accuracy: global.accuracy,
        min_class_support: config.min_class_support,
        objective: config.objective,
    })
}

fn accuracy_at(values: &[(f64, bool)], direction: Direction, threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let correct = values
        .iter()
        .filter(|&&(v, m)| direction.is_member(v, threshold) == m)
        .count();
    correct as f64 / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PredictionRecord;
    use approx::assert_abs_diff_eq;

    fn pairs(members: &[f64], nonmembers: &[f64]) -> Vec<(f64, bool)> {
        members
            .iter()
            .map(|&v| (v, true))
            .chain(nonmembers.iter().map(|&v| (v, false)))
            .collect()
    }

    #[test]
    fn confidence_example() {
        let cut = best_cut(
            &pairs(&[0.9, 0.8], &[0.6, 0.4]),
            Direction::AtLeast,
            Objective::Accuracy,
        )
        .unwrap();
        assert_abs_diff_eq!(cut.threshold, 0.7, epsilon = 1e-15);
        assert_eq!(cut.accuracy, 1.0);
    }

    #[test]
    fn indistinguishable_values() {
        let cut = best_cut(
            &pairs(&[0.5, 0.5], &[0.5, 0.5]),
            Direction::AtLeast,
            Objective::Accuracy,
        )
        .unwrap();
        assert_eq!(cut.threshold, f64::NEG_INFINITY);
        assert_eq!(cut.accuracy, 0.5);
    }

    #[test]
    fn mentr_separated() {
        let cut = best_cut(
            &pairs(&[1.0, 2.0], &[3.0, 4.0]),
            Direction::AtMost,
            Objective::Accuracy,
        )
        .unwrap();
        assert_eq!(cut.threshold, 2.5);
        assert_eq!(cut.accuracy, 1.0);
    }

    #[test]
    fn mentr_inverted_prefers_lower_sentinel() {
        let cut = best_cut(
            &pairs(&[3.0, 4.0], &[1.0, 2.0]),
            Direction::AtMost,
            Objective::Accuracy,
        )
        .unwrap();
        assert_eq!(cut.threshold, f64::NEG_INFINITY);
        assert_eq!(cut.accuracy, 0.5);
    }

    #[test]
    fn one_sided_data_has_no_cut() {
        assert!(best_cut(&pairs(&[1.0], &[]), Direction::AtMost, Objective::Accuracy).is_none());
    }

    #[test]
    fn balanced_objective_differs_on_imbalanced_data() {
        let data = pairs(&[0.5, 0.9], &[0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.6, 0.6]);
        let raw = best_cut(&data, Direction::AtLeast, Objective::Accuracy).unwrap();
        let bal = best_cut(&data, Direction::AtLeast, Objective::BalancedAccuracy).unwrap();
        assert_abs_diff_eq!(raw.threshold, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(raw.accuracy, 10.0 / 11.0);
        assert_abs_diff_eq!(bal.threshold, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(bal.accuracy, 0.5 * (1.0 + 7.0 / 9.0));
    }

    fn set(rows: &[(f64, usize, Membership)]) -> PredictionSet {
        let records = rows
            .iter()
            .map(|&(p, label, m)| {
                let mut probs = vec![0.0; 2];
                probs[label] = p;
                probs[1 - label] = 1.0 - p;
                PredictionRecord::new(probs, label, m).unwrap()
            })
            .collect();
        PredictionSet::new(2, records).unwrap()
    }

    #[test]
    fn class_table_with_fallback() {
        use Membership::*;
        let shadow = set(&[
            (0.9, 0, Member),
            (0.8, 0, Member),
            (0.6, 0, NonMember),
            (0.4, 0, NonMember),
            (0.95, 1, Member),
            (0.3, 1, NonMember),
        ]);
        let config = ThresholdConfig {
            min_class_support: 2,
            objective: Objective::Accuracy,
        };
        let table = learn_class_thresholds(&shadow, MetricKind::Confidence, &config).unwrap();
        assert_eq!(table.per_class.len(), 2);
        assert!(!table.per_class[&0].fallback);
        assert!(table.per_class[&1].fallback);
        assert_eq!(table.threshold_for(1), table.global_threshold);
        assert_eq!(table.threshold_for(7), table.global_threshold);
        assert_eq!(table.fallback_classes(), vec![1]);
        assert_abs_diff_eq!(table.threshold_for(0), 0.7, epsilon = 1e-15);
        for entry in table.per_class.values() {
            assert!(entry.shadow_accuracy >= 0.5);
        }
    }

    #[test]
    fn global_matches_class_table_for_single_class() {
        use Membership::*;
        let shadow = set(&[
            (0.9, 0, Member),
            (0.7, 0, Member),
            (0.75, 0, NonMember),
            (0.4, 0, NonMember),
        ]);
        let config = ThresholdConfig {
            min_class_support: 1,
            objective: Objective::Accuracy,
        };
        let table = learn_class_thresholds(&shadow, MetricKind::Confidence, &config).unwrap();
        let global =
            learn_global_threshold(&shadow, MetricKind::Confidence, Objective::Accuracy).unwrap();
        assert_eq!(table.per_class[&0].threshold, global.threshold);
        assert_eq!(table.per_class[&0].shadow_accuracy, global.accuracy);
    }

    #[test]
    fn errors() {
        use Membership::*;
        let only_members = set(&[(0.9, 0, Member), (0.8, 1, Member)]);
        assert!(matches!(
            learn_class_thresholds(&only_members, MetricKind::Confidence, &Default::default()),
            Err(AuditError::EmptyShadow)
        ));
        let shadow = set(&[(0.9, 0, Member), (0.8, 1, NonMember)]);
        assert!(matches!(
            learn_global_threshold(&shadow, MetricKind::Correctness, Objective::Accuracy),
            Err(AuditError::UnsupportedMetric(_))
        ));
    }
}
