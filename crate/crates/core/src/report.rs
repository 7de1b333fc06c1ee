//! Cross-cutting analyses and their text, CSV and gnuplot renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{run_benchmark_suite, SuiteConfig, Thresholding};
use crate::error::{AuditError, Result};
use crate::metrics::{correctness, Membership, MetricKind, PredictionSet};
use crate::riskscore::{CalibrationCurve, CdfPoint, PrecisionRecall, RiskScoreTable};

/// Pearson correlation; `None` when either axis has zero variance or fewer than two points.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRiskRow {
    pub class: usize,
    pub mean_member_risk: f64,
    pub member_accuracy: f64,
    pub nonmember_accuracy: f64,
    pub generalization_error: f64,
    pub n_member: usize,
    pub n_nonmember: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRiskReport {
    pub rows: Vec<ClassRiskRow>,
    /// Classes lacking members or non-members.
    pub skipped: Vec<usize>,
    /// `None` when one axis has zero variance.
    pub pearson: Option<f64>,
}

/// Per-class mean member risk score against the class's train/test accuracy gap.
pub fn per_class_risk_vs_generalization(
    target: &PredictionSet,
    scores: &RiskScoreTable,
) -> Result<ClassRiskReport> {
    if scores.rows.len() != target.len() {
        return Err(AuditError::LengthMismatch {
            left: scores.rows.len(),
            right: target.len(),
        });
    }
    #[derive(Default)]
    struct Acc {
        risk_sum: f64,
        member: (usize, usize),
        nonmember: (usize, usize),
    }
    let mut by_class: BTreeMap<usize, Acc> = BTreeMap::new();
    for (r, s) in target.iter().zip(&scores.rows) {
        let acc = by_class.entry(r.label).or_default();
        let hit = usize::from(correctness(r));
        match r.membership {
            Membership::Member => {
                acc.risk_sum += s.risk_score;
                acc.member.0 += hit;
                acc.member.1 += 1;
            }
            Membership::NonMember => {
                acc.nonmember.0 += hit;
                acc.nonmember.1 += 1;
            }
            Membership::Unknown => {}
        }
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (class, acc) in by_class {
        if acc.member.1 == 0 || acc.nonmember.1 == 0 {
            skipped.push(class);
            continue;
        }
        let member_accuracy = acc.member.0 as f64 / acc.member.1 as f64;
        let nonmember_accuracy = acc.nonmember.0 as f64 / acc.nonmember.1 as f64;
        rows.push(ClassRiskRow {
            class,
            mean_member_risk: acc.risk_sum / acc.member.1 as f64,
            member_accuracy,
            nonmember_accuracy,
            generalization_error: member_accuracy - nonmember_accuracy,
            n_member: acc.member.1,
            n_nonmember: acc.nonmember.1,
        });
    }
    if rows.len() < 2 {
        return Err(AuditError::FewerThanTwoClasses(rows.len()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.mean_member_risk).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.generalization_error).collect();
    Ok(ClassRiskReport {
        pearson: pearson(&xs, &ys),
        rows,
        skipped,
    })
}

/// Predictions of one saved training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSnapshot {
    pub epoch: u32,
    pub predictions: PredictionSet,
    /// This epoch's own shadow dump, if one exists.
    pub shadow: Option<PredictionSet>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

fn split_accuracy(set: &PredictionSet, membership: Membership) -> f64 {
    let (hit, n) = set
        .iter()
        .filter(|r| r.membership == membership)
        .fold((0usize, 0usize), |(h, n), r| {
            (h + usize::from(correctness(r)), n + 1)
        });
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

impl EpochSnapshot {
    /// Train and test accuracy are computed from the member and non-member splits.
    pub fn new(epoch: u32, predictions: PredictionSet, shadow: Option<PredictionSet>) -> Self {
        EpochSnapshot {
            epoch,
            train_accuracy: split_accuracy(&predictions, Membership::Member),
            test_accuracy: split_accuracy(&predictions, Membership::NonMember),
            predictions,
            shadow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowSource {
    Epoch,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epoch: u32,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub best_attack_accuracy: f64,
    pub best_attack: MetricKind,
    pub best_thresholding: Option<Thresholding>,
    pub shadow_source: ShadowSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub reference_accuracy: Option<f64>,
    /// Epoch whose test accuracy is nearest the reference; earliest on ties.
    pub selected_epoch: Option<u32>,
}

/// Runs the benchmark suite on every snapshot and picks the epoch closest
/// in test accuracy to `reference_accuracy`.
pub fn early_stopping_sweep(
    snapshots: &[EpochSnapshot],
    shared_shadow: Option<&PredictionSet>,
    reference_accuracy: Option<f64>,
    config: &SuiteConfig,
) -> Result<SweepReport> {
    if snapshots.is_empty() {
        return Err(AuditError::EmptySweep);
    }
    if let Some(w) = snapshots.windows(2).find(|w| w[0].epoch >= w[1].epoch) {
        return Err(AuditError::InvalidConfig(format!(
            "epochs must be strictly increasing, found {} then {}",
            w[0].epoch, w[1].epoch
        )));
    }
    let rows = snapshots
        .par_iter()
        .map(|snap| {
            let (shadow, shadow_source) = match (&snap.shadow, shared_shadow) {
                (Some(s), _) => (s, ShadowSource::Epoch),
                (None, Some(s)) => (s, ShadowSource::Shared),
                (None, None) => {
                    return Err(AuditError::InvalidConfig(format!(
                        "epoch {} has no shadow set and no shared shadow was given",
                        snap.epoch
                    )))
                }
            };
            let suite = run_benchmark_suite(shadow, &snap.predictions, config)?;
            let mut best = (
                suite.correctness.accuracy,
                MetricKind::Correctness,
                None::<Thresholding>,
            );
            for m in &suite.thresholded {
                for r in [&m.class_dependent, &m.class_independent] {
                    if r.accuracy > best.0 {
                        best = (r.accuracy, m.metric, r.thresholding);
                    }
                }
            }
            Ok(SweepRow {
                epoch: snap.epoch,
                train_accuracy: snap.train_accuracy,
                test_accuracy: snap.test_accuracy,
                best_attack_accuracy: best.0,
                best_attack: best.1,
                best_thresholding: best.2,
                shadow_source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selected_epoch = reference_accuracy.map(|reference| {
        let mut best = &rows[0];
        for row in &rows[1..] {
            if (row.test_accuracy - reference).abs() < (best.test_accuracy - reference).abs() {
                best = row;
            }
        }
        best.epoch
    });
    Ok(SweepReport {
        rows,
        reference_accuracy,
        selected_epoch,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "N.A.".to_string(), |v| format!("{v:.4}"))
}

pub fn calibration_text(curve: &CalibrationCurve) -> String {
    let mut out = format!(
        "{:>8} {:>11} {:>12} {:>8} {:>8}\n",
        "center", "mean_score", "member_frac", "n_tr", "n_te"
    );
    for b in &curve.bins {
        let _ = writeln!(
            out,
            "{:>8.3} {:>11.4} {:>12.4} {:>8} {:>8}",
            b.center, b.mean_score, b.member_fraction, b.n_member, b.n_nonmember
        );
    }
    let _ = writeln!(out, "rmse {:.4}", curve.rmse);
    out
}

pub fn calibration_csv(curve: &CalibrationCurve) -> String {
    let mut out = String::from("center,mean_score,member_fraction,n_member,n_nonmember\n");
    for b in &curve.bins {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            b.center, b.mean_score, b.member_fraction, b.n_member, b.n_nonmember
        );
    }
    out
}

/// Columns: bin center, mean score, member fraction.
pub fn calibration_gnuplot(curve: &CalibrationCurve) -> String {
    let mut out = format!(
        "# calibration curve, rmse {}\n# center mean_score member_fraction\n",
        curve.rmse
    );
    for b in &curve.bins {
        let _ = writeln!(out, "{} {} {}", b.center, b.mean_score, b.member_fraction);
    }
    out
}

pub fn cdf_csv(points: &[CdfPoint]) -> String {
    let mut out = String::from("score,cumulative\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.score, p.cumulative);
    }
    out
}

pub fn cdf_gnuplot(points: &[CdfPoint]) -> String {
    let mut out = String::from("# member risk score cdf\n# score cumulative\n");
    for p in points {
        let _ = writeln!(out, "{} {}", p.score, p.cumulative);
    }
    out
}

pub fn precision_recall_text(rows: &[PrecisionRecall]) -> String {
    let mut out = format!(
        "{:>9} {:>10} {:>8} {:>9}\n",
        "threshold", "precision", "recall", "flagged"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>9.2} {:>10} {:>8.4} {:>9}",
            r.threshold,
            fmt_opt(r.precision),
            r.recall,
            r.n_flagged
        );
    }
    out
}

pub fn precision_recall_csv(rows: &[PrecisionRecall]) -> String {
    let mut out = String::from("threshold,precision,recall,n_flagged\n");
    for r in rows {
        let precision = r.precision.map_or_else(String::new, |p| p.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.threshold, precision, r.recall, r.n_flagged
        );
    }
    out
}

pub fn class_risk_text(report: &ClassRiskReport) -> String {
    let mut out = format!(
        "{:>6} {:>10} {:>9} {:>9} {:>9}\n",
        "class", "mean_risk", "train_acc", "test_acc", "gen_err"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>6} {:>10.4} {:>9.4} {:>9.4} {:>9.4}",
            r.class,
            r.mean_member_risk,
            r.member_accuracy,
            r.nonmember_accuracy,
            r.generalization_error
        );
    }
    let _ = writeln!(out, "pearson {}", fmt_opt(report.pearson));
    if !report.skipped.is_empty() {
        let skipped: Vec<String> = report.skipped.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "skipped classes: {}", skipped.join(","));
    }
    out
}

pub fn class_risk_csv(report: &ClassRiskReport) -> String {
    let mut out = String::from(
        "class,mean_member_risk,member_accuracy,nonmember_accuracy,generalization_error,n_member,n_nonmember\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.class,
            r.mean_member_risk,
            r.member_accuracy,
            r.nonmember_accuracy,
            r.generalization_error,
            r.n_member,
            r.n_nonmember
        );
    }
    out
}

pub fn sweep_text(report: &SweepReport) -> String {
    let mut out = format!(
        "{:>6} {:>9} {:>9} {:>11} {:>7} {:>7}\n",
        "epoch", "train_acc", "test_acc", "best_attack", "metric", "shadow"
    );
    for r in &report.rows {
        let marker = if report.selected_epoch == Some(r.epoch) {
            " *"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{:>6} {:>9.4} {:>9.4} {:>11.4} {:>7} {:>7}{marker}",
            r.epoch,
            r.train_accuracy,
            r.test_accuracy,
            r.best_attack_accuracy,
            r.best_attack.short_name(),
            match r.shadow_source {
                ShadowSource::Epoch => "epoch",
                ShadowSource::Shared => "shared",
            }
        );
    }
    if let (Some(reference), Some(epoch)) = (report.reference_accuracy, report.selected_epoch) {
        let _ = writeln!(out, "closest to reference {reference:.4}: epoch {epoch}");
    }
    out
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "epoch,train_accuracy,test_accuracy,best_attack_accuracy,best_attack,shadow_source,selected\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch,
            r.train_accuracy,
            r.test_accuracy,
            r.best_attack_accuracy,
            r.best_attack.short_name(),
            match r.shadow_source {
                ShadowSource::Epoch => "epoch",
                ShadowSource::Shared => "shared",
            },
            report.selected_epoch == Some(r.epoch)
        );
    }
    out
}

pub fn sweep_gnuplot(report: &SweepReport) -> String {
    let mut out = String::from("# epoch train_accuracy test_accuracy best_attack_accuracy\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            r.epoch, r.train_accuracy, r.test_accuracy, r.best_attack_accuracy
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PredictionRecord;
    use crate::riskscore::RiskScoreRow;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pearson_two_points_is_one() {
        assert_abs_diff_eq!(
            pearson(&[0.5, 0.9], &[0.0, 0.4]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pearson(&[0.5, 0.9], &[0.4, 0.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pearson_zero_variance_is_undefined() {
        assert_eq!(pearson(&[0.5, 0.5], &[0.1, 0.1]), None);
        assert_eq!(pearson(&[0.5], &[0.1]), None);
    }

    #[test]
    fn pearson_affine_invariance() {
        let xs = [0.1, 0.4, 0.35, 0.8, 0.6];
        let ys = [0.02, 0.1, 0.15, 0.3, 0.2];
        let r = pearson(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| 3.0 * x + 7.0).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| 0.5 * y - 1.0).collect();
        assert_abs_diff_eq!(pearson(&xs2, &ys2).unwrap(), r, epsilon = 1e-12);
    }

    fn rec(p: f64, label: usize, m: Membership) -> PredictionRecord {
        let mut probs = vec![(1.0 - p) / 2.0; 3];
        probs[label] = p;
        PredictionRecord::new(probs, label, m).unwrap()
    }

    fn scores(values: &[f64]) -> RiskScoreTable {
        RiskScoreTable {
            metric: MetricKind::ModifiedEntropy,
            p_train: 0.5,
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &s)| RiskScoreRow {
                    id: i.to_string(),
                    label: 0,
                    value: 0.0,
                    risk_score: s,
                })
                .collect(),
        }
    }

    #[test]
    fn class_risk_table() {
        use Membership::*;
        let target = PredictionSet::new(
            3,
            vec![
                rec(0.9, 0, Member),
                rec(0.2, 0, NonMember),
                rec(0.9, 1, Member),
                rec(0.9, 1, NonMember),
                rec(0.9, 2, Member),
            ],
        )
        .unwrap();
        let report =
            per_class_risk_vs_generalization(&target, &scores(&[0.9, 0.1, 0.5, 0.5, 0.7])).unwrap();
        assert_eq!(report.skipped, vec![2]);
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].generalization_error, 1.0);
        assert_eq!(report.rows[1].generalization_error, 0.0);
        assert_abs_diff_eq!(report.pearson.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn class_risk_needs_two_classes() {
        use Membership::*;
        let target =
            PredictionSet::new(3, vec![rec(0.9, 0, Member), rec(0.2, 0, NonMember)]).unwrap();
        assert!(matches!(
            per_class_risk_vs_generalization(&target, &scores(&[0.9, 0.1])),
            Err(AuditError::FewerThanTwoClasses(1))
        ));
    }

    fn snapshot(epoch: u32, test_correct: usize) -> EpochSnapshot {
        use Membership::*;
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(rec(0.9, i % 3, Member));
            let p = if i < test_correct { 0.8 } else { 0.1 };
            records.push(rec(p, i % 3, NonMember));
        }
        EpochSnapshot::new(epoch, PredictionSet::new(3, records).unwrap(), None)
    }

    #[test]
    fn sweep_selects_nearest_test_accuracy() {
        let snaps = vec![snapshot(10, 7), snapshot(20, 8), snapshot(30, 9)];
        assert_eq!(snaps[1].test_accuracy, 0.8);
        assert_eq!(snaps[1].train_accuracy, 1.0);
        let shared = snaps[0].predictions.clone();
        let r = early_stopping_sweep(&snaps, Some(&shared), Some(0.76), &SuiteConfig::default())
            .unwrap();
        assert_eq!(r.selected_epoch, Some(20));
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows.windows(2).all(|w| w[0].epoch < w[1].epoch));
        assert!(r
            .rows
            .iter()
            .all(|row| row.shadow_source == ShadowSource::Shared));
        assert!(sweep_text(&r).contains("epoch 20"));
    }

    #[test]
    fn sweep_single_snapshot_and_errors() {
        let snaps = vec![snapshot(5, 5)];
        let shared = snaps[0].predictions.clone();
        let r = early_stopping_sweep(&snaps, Some(&shared), Some(0.1), &SuiteConfig::default())
            .unwrap();
        assert_eq!(r.selected_epoch, Some(5));
        assert!(matches!(
            early_stopping_sweep(&[], None, None, &SuiteConfig::default()),
            Err(AuditError::EmptySweep)
        ));
        assert!(early_stopping_sweep(&snaps, None, None, &SuiteConfig::default()).is_err());
        let unordered = vec![snapshot(5, 5), snapshot(5, 6)];
        assert!(
            early_stopping_sweep(&unordered, Some(&shared), None, &SuiteConfig::default()).is_err()
        );
    }
}
