//! Benchmark attacks: apply thresholds to a target set and score the decisions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::metrics::{correctness, metric_value, MetricKind, PredictionSet};
use crate::thresholds::{learn_class_thresholds, ThresholdConfig, ThresholdTable};

/// Whether to use each class's own threshold or the pooled one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thresholding {
    ClassDependent,
    ClassIndependent,
}

/// Member decisions from the correctness attack: correctly classified means member.
pub fn infer_correctness(target: &PredictionSet) -> Vec<bool> {
    target.iter().map(correctness).collect()
}

/// Per-record member decisions for `metric`.
///
/// Correctness ignores `table`; every other metric requires one learned for
/// the same metric.
pub fn infer_membership(
    target: &PredictionSet,
    metric: MetricKind,
    table: Option<&ThresholdTable>,
    mode: Thresholding,
) -> Result<Vec<bool>> {
    if metric == MetricKind::Correctness {
        return Ok(infer_correctness(target));
    }
    let table = table.ok_or(AuditError::UnsupportedMetric(metric))?;
    if table.metric != metric {
        return Err(AuditError::MetricMismatch {
            table: table.metric,
            requested: metric,
        });
    }
    target
        .iter()
        .map(|r| {
            let threshold = match mode {
                Thresholding::ClassDependent => table.threshold_for(r.label),
                Thresholding::ClassIndependent => table.global_threshold,
            };
            Ok(table
                .direction
                .is_member(metric_value(r, metric)?, threshold))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub metric: MetricKind,
    pub thresholding: Option<Thresholding>,
    pub accuracy: f64,
    /// `None` when the attack made no positive (member) predictions.
    pub precision: Option<f64>,
    pub recall: f64,
    pub per_class_accuracy: BTreeMap<usize, f64>,
    pub n_member: usize,
    pub n_nonmember: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl AttackReport {
    pub fn is_balanced(&self) -> bool {
        self.n_member == self.n_nonmember
    }

    pub fn true_positive_rate(&self) -> f64 {
        self.recall
    }

    pub fn true_negative_rate(&self) -> f64 {
        if self.n_nonmember == 0 {
            0.0
        } else {
            self.true_negative as f64 / self.n_nonmember as f64
        }
    }
}

/// Scores decisions against the membership tags carried by `truth`.
pub fn evaluate_attack(
    metric: MetricKind,
    decisions: &[bool],
    truth: &PredictionSet,
) -> Result<AttackReport> {
    if decisions.len() != truth.len() {
        return Err(AuditError::LengthMismatch {
            left: decisions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(AuditError::EmptySet);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    let mut class_hits: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (index, (record, &decided)) in truth.iter().zip(decisions).enumerate() {
        let is_member = record
            .membership
            .as_bool()
            .ok_or(AuditError::UnknownMembership { index })?;
        match (decided, is_member) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        let entry = class_hits.entry(record.label).or_insert((0, 0));
        entry.0 += usize::from(decided == is_member);
        entry.1 += 1;
    }
    let total = tp + fp + tn + fn_;
    let n_member = tp + fn_;
    Ok(AttackReport {
        metric,
        thresholding: None,
        accuracy: (tp + tn) as f64 / total as f64,
        precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
        recall: if n_member == 0 {
            0.0
        } else {
            tp as f64 / n_member as f64
        },
        per_class_accuracy: class_hits
            .into_iter()
            .map(|(y, (hit, n))| (y, hit as f64 / n as f64))
            .collect(),
        n_member,
        n_nonmember: tn + fp,
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub thresholds: ThresholdConfig,
}

/// Both thresholding variants of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: MetricKind,
    pub class_dependent: AttackReport,
    pub class_independent: AttackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub correctness: AttackReport,
    pub thresholded: Vec<MetricResult>,
    pub tables: Vec<ThresholdTable>,
}

impl BenchmarkReport {
    pub fn get(&self, metric: MetricKind) -> Option<&MetricResult> {
        self.thresholded.iter().find(|m| m.metric == metric)
    }

    /// Accuracy of `metric` under `mode`; correctness has a single value.
    pub fn accuracy(&self, metric: MetricKind, mode: Thresholding) -> Option<f64> {
        if metric == MetricKind::Correctness {
            return Some(self.correctness.accuracy);
        }
        self.get(metric).map(|m| match mode {
            Thresholding::ClassDependent => m.class_dependent.accuracy,
            Thresholding::ClassIndependent => m.class_independent.accuracy,
        })
    }

    /// Highest accuracy over every attack and variant.
    pub fn best_accuracy(&self) -> f64 {
        self.thresholded
            .iter()
            .flat_map(|m| [m.class_dependent.accuracy, m.class_independent.accuracy])
            .fold(self.correctness.accuracy, f64::max)
    }

    /// Aligned text table, one row per attack.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let fmt_pct = |v: f64| format!("{:.1}%", 100.0 * v);
        let fmt_prec = |v: Option<f64>| v.map_or_else(|| "N.A.".to_string(), fmt_pct);
        let _ = writeln!(
            out,
            "{:<8} {:>10} {:>12} {:>10} {:>8}",
            "attack", "class-dep", "class-indep", "precision", "recall"
        );
        let c = &self.correctness;
        let _ = writeln!(
            out,
            "{:<8} {:>10} {:>12} {:>10} {:>8}",
            format!("I_{}", MetricKind::Correctness),
            fmt_pct(c.accuracy),
            "-",
            fmt_prec(c.precision),
            fmt_pct(c.recall)
        );
        for m in &self.thresholded {
            let d = &m.class_dependent;
            let _ = writeln!(
                out,
                "{:<8} {:>10} {:>12} {:>10} {:>8}",
                format!("I_{}", m.metric),
                fmt_pct(d.accuracy),
                fmt_pct(m.class_independent.accuracy),
                fmt_prec(d.precision),
                fmt_pct(d.recall)
            );
        }
        let _ = writeln!(
            out,
            "target: {} members, {} non-members{}",
            c.n_member,
            c.n_nonmember,
            if c.is_balanced() { "" } else { " (imbalanced)" }
        );
        out
    }
}

/// Learns thresholds on `shadow` and runs all four attacks on `target`.
pub fn run_benchmark_suite(
    shadow: &PredictionSet,
    target: &PredictionSet,
    config: &SuiteConfig,
) -> Result<BenchmarkReport> {
    if shadow.num_classes() != target.num_classes() {
        return Err(AuditError::ClassCountMismatch {
            expected: shadow.num_classes(),
            found: target.num_classes(),
        });
    }
    let correctness = evaluate_attack(MetricKind::Correctness, &infer_correctness(target), target)?;
    let mut thresholded = Vec::new();
    let mut tables = Vec::new();
    for metric in MetricKind::THRESHOLDED {
        let table = learn_class_thresholds(shadow, metric, &config.thresholds)?;
        let run = |mode| -> Result<AttackReport> {
            let decisions = infer_membership(target, metric, Some(&table), mode)?;
            let mut report = evaluate_attack(metric, &decisions, target)?;
            report.thresholding = Some(mode);
            Ok(report)
        };
        let class_dependent = run(Thresholding::ClassDependent)?;
        let class_independent = run(Thresholding::ClassIndependent)?;
        thresholded.push(MetricResult {
            metric,
            class_dependent,
            class_independent,
        });
        tables.push(table);
    }
    Ok(BenchmarkReport {
        correctness,
        thresholded,
        tables,
    })
}
