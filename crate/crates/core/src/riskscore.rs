//! Per-sample privacy risk scores.
//!
//! A risk score is the posterior probability that a sample was in the
//! target's training set, given its metric value (modified entropy unless
//! configured otherwise) and its class:
//!
//! ```text
//! r = p_train * d_tr / (p_train * d_tr + (1 - p_train) * d_te)
//! ```
//!
//! `d_tr` and `d_te` are the class-conditional member / non-member
//! densities, estimated from shadow data with equal-width histograms over
//! `[0, clamp_max)` and one overflow bin `[clamp_max, inf)`. Additive
//! smoothing keeps every density strictly positive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::metrics::{metric_value, Membership, MetricKind, PredictionRecord, PredictionSet};
use crate::thresholds::DEFAULT_MIN_CLASS_SUPPORT;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_PSEUDO_COUNT: f64 = 1.0;
pub const DEFAULT_CLAMP_QUANTILE: f64 = 0.995;
pub const DEFAULT_CALIBRATION_BINS: usize = 20;
/// Risk-score cutoffs for high-confidence attacks.
pub const DEFAULT_RISK_THRESHOLDS: [f64; 6] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    p_train: f64,
}

impl Priors {
    pub fn new(p_train: f64) -> Result<Self> {
        if p_train > 0.0 && p_train < 1.0 {
            Ok(Priors { p_train })
        } else {
            Err(AuditError::InvalidConfig(format!(
                "p_train must lie strictly inside (0, 1), got {p_train}"
            )))
        }
    }

    pub fn equal() -> Self {
        Priors { p_train: 0.5 }
    }

    pub fn p_train(&self) -> f64 {
        self.p_train
    }

    pub fn p_test(&self) -> f64 {
        1.0 - self.p_train
    }
}

impl Default for Priors {
    fn default() -> Self {
        Priors::equal()
    }
}

/// Bayes posterior of membership from the two class-conditional densities.
///
/// When both densities vanish (only possible without smoothing) the prior is returned.
pub fn posterior(d_tr: f64, d_te: f64, priors: Priors) -> f64 {
    let num = priors.p_train * d_tr;
    let den = num + priors.p_test() * d_te;
    if den > 0.0 {
        num / den
    } else {
        priors.p_train
    }
}

/// Posterior under equal priors.
pub fn posterior_equal_prior(d_tr: f64, d_te: f64) -> f64 {
    let den = d_tr + d_te;
    if den > 0.0 {
        d_tr / den
    } else {
        0.5
    }
}

/// Counts and smoothed probability mass per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    fn from_counts(counts: Vec<u64>, pseudo_count: f64) -> Self {
        let total: u64 = counts.iter().sum();
        let norm = total as f64 + pseudo_count * counts.len() as f64;
        let densities = counts
            .iter()
            .map(|&c| {
                if norm > 0.0 {
                    (c as f64 + pseudo_count) / norm
                } else {
                    0.0
                }
            })
            .collect();
        Histogram { counts, densities }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistograms {
    pub member: Histogram,
    pub nonmember: Histogram,
    /// Too few shadow samples; the pooled histograms are used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub metric: MetricKind,
    /// Total bin count, overflow bin included.
    pub bins: usize,
    pub pseudo_count: f64,
    pub min_class_support: usize,
    /// Quantile of pooled shadow values used as `clamp_max` when not given.
    pub clamp_quantile: f64,
    pub clamp_max: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            metric: MetricKind::ModifiedEntropy,
            bins: DEFAULT_BINS,
            pseudo_count: DEFAULT_PSEUDO_COUNT,
            min_class_support: DEFAULT_MIN_CLASS_SUPPORT,
            clamp_quantile: DEFAULT_CLAMP_QUANTILE,
            clamp_max: None,
        }
    }
}

/// Class-conditional member and non-member densities of a scalar metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConditionalModel {
    pub metric: MetricKind,
    /// Lower edge of every bin; the last one is `clamp_max` and opens the overflow bin.
    pub edges: Vec<f64>,
    pub clamp_max: f64,
    pub pseudo_count: f64,
    pub min_class_support: usize,
    pub per_class: BTreeMap<usize, ClassHistograms>,
    pub pooled: ClassHistograms,
}

impl ClassConditionalModel {
    pub fn num_bins(&self) -> usize {
        self.edges.len()
    }

    pub fn bin_index(&self, value: f64) -> usize {
        bin_index(value, self.clamp_max, self.edges.len())
    }

    /// Histograms for `class`, falling back to the pooled ones.
    pub fn histograms_for(&self, class: usize) -> &ClassHistograms {
        match self.per_class.get(&class) {
            Some(h) if !h.fallback => h,
            _ => &self.pooled,
        }
    }

    /// `(d_tr, d_te)` for a metric value in `class`.
    pub fn densities(&self, class: usize, value: f64) -> (f64, f64) {
        let h = self.histograms_for(class);
        let b = self.bin_index(value);
        (h.member.densities[b], h.nonmember.densities[b])
    }
}

fn bin_index(value: f64, clamp_max: f64, bins: usize) -> usize {
    if value >= clamp_max {
        return bins - 1;
    }
    let width = clamp_max / (bins - 1) as f64;
    let idx = (value / width).floor();
    if idx.is_nan() || idx < 0.0 {
        0
    } else {
        (idx as usize).min(bins - 2)
    }
}

/// Nearest-rank quantile of an ascending slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Fits member / non-member histograms per class from shadow data.
pub fn fit_conditionals(
    shadow: &PredictionSet,
    config: &FitConfig,
) -> Result<ClassConditionalModel> {
    if config.metric == MetricKind::Correctness {
        return Err(AuditError::UnsupportedMetric(config.metric));
    }
    if config.bins < 2 {
        return Err(AuditError::InvalidConfig(format!(
            "need at least 2 bins, got {}",
            config.bins
        )));
    }
    if !(config.pseudo_count >= 0.0 && config.pseudo_count.is_finite()) {
        return Err(AuditError::InvalidConfig(format!(
            "pseudo_count must be finite and non-negative, got {}",
            config.pseudo_count
        )));
    }
    let mut samples = Vec::with_capacity(shadow.len());
    for r in shadow {
        if let Some(m) = r.membership.as_bool() {
            samples.push((r.label, metric_value(r, config.metric)?, m));
        }
    }
    if !samples.iter().any(|s| s.2) || !samples.iter().any(|s| !s.2) {
        return Err(AuditError::EmptyShadow);
    }

    let mut sorted: Vec<f64> = samples.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Err(AuditError::DegenerateBins(lo));
    }
    let clamp_max = match config.clamp_max {
        Some(c) if c > 0.0 && c.is_finite() => c,
        Some(c) => {
            return Err(AuditError::InvalidConfig(format!(
                "clamp_max must be positive and finite, got {c}"
            )))
        }
        None => {
            let q = quantile_sorted(&sorted, config.clamp_quantile);
            if q > 0.0 {
                q
            } else if hi > 0.0 {
                hi
            } else {
                return Err(AuditError::DegenerateBins(hi));
            }
        }
    };
    let bins = config.bins;
    let width = clamp_max / (bins - 1) as f64;
    let edges: Vec<f64> = (0..bins)
        .map(|i| {
            if i == bins - 1 {
                clamp_max
            } else {
                i as f64 * width
            }
        })
        .collect();

    let mut counts: BTreeMap<usize, [Vec<u64>; 2]> = BTreeMap::new();
    for r in shadow {
        counts
            .entry(r.label)
            .or_insert_with(|| [vec![0; bins], vec![0; bins]]);
    }
    let mut pooled = [vec![0u64; bins], vec![0u64; bins]];
    for &(y, v, m) in &samples {
        let b = bin_index(v, clamp_max, bins);
        let side = usize::from(!m);
        counts.get_mut(&y).expect("class registered")[side][b] += 1;
        pooled[side][b] += 1;
    }

    let support = config.min_class_support.max(1) as u64;
    let per_class = counts
        .into_iter()
        .map(|(y, [member, nonmember])| {
            let enough =
                member.iter().sum::<u64>() >= support && nonmember.iter().sum::<u64>() >= support;
            (
                y,
                ClassHistograms {
                    member: Histogram::from_counts(member, config.pseudo_count),
                    nonmember: Histogram::from_counts(nonmember, config.pseudo_count),
                    fallback: !enough,
                },
            )
        })
        .collect();
    let [member, nonmember] = pooled;

    Ok(ClassConditionalModel {
        metric: config.metric,
        edges,
        clamp_max,
        pseudo_count: config.pseudo_count,
        min_class_support: config.min_class_support,
        per_class,
        pooled: ClassHistograms {
            member: Histogram::from_counts(member, config.pseudo_count),
            nonmember: Histogram::from_counts(nonmember, config.pseudo_count),
            fallback: false,
        },
    })
}

pub fn risk_score(
    record: &PredictionRecord,
    model: &ClassConditionalModel,
    priors: Priors,
) -> Result<f64> {
    let value = metric_value(record, model.metric)?;
    let (d_tr, d_te) = model.densities(record.label, value);
    Ok(posterior(d_tr, d_te, priors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScoreRow {
    pub id: String,
    pub label: usize,
    /// Metric value the score was computed from (modified entropy by default).
    pub value: f64,
    pub risk_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScoreTable {
    pub metric: MetricKind,
    pub p_train: f64,
    pub rows: Vec<RiskScoreRow>,
}

impl RiskScoreTable {
    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.risk_score).collect()
    }
}

/// Scores every record of `target`. Records without an id get their row index.
pub fn score_set(
    target: &PredictionSet,
    model: &ClassConditionalModel,
    priors: Priors,
) -> Result<RiskScoreTable> {
    let rows = target
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let value = metric_value(r, model.metric)?;
            let (d_tr, d_te) = model.densities(r.label, value);
            Ok(RiskScoreRow {
                id: r.id.clone().unwrap_or_else(|| i.to_string()),
                label: r.label,
                value,
                risk_score: posterior(d_tr, d_te, priors),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskScoreTable {
        metric: model.metric,
        p_train: priors.p_train,
        rows,
    })
}

fn truth_bools(scores: &[f64], truth: &[Membership]) -> Result<Vec<bool>> {
    if scores.len() != truth.len() {
        return Err(AuditError::LengthMismatch {
            left: scores.len(),
            right: truth.len(),
        });
    }
    truth
        .iter()
        .enumerate()
        .map(|(index, m)| m.as_bool().ok_or(AuditError::UnknownMembership { index }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    pub mean_score: f64,
    pub member_fraction: f64,
    pub n_member: usize,
    pub n_nonmember: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    /// Non-empty bins only, in ascending order.
    pub bins: Vec<CalibrationBin>,
    pub rmse: f64,
}

/// Equal-width binning of scores on `[0, 1]`, comparing each bin's mean
/// score with its empirical member fraction.
pub fn calibration_curve(
    scores: &[f64],
    truth: &[Membership],
    bins: usize,
) -> Result<CalibrationCurve> {
    if bins < 2 {
        return Err(AuditError::InvalidConfig(format!(
            "need at least 2 calibration bins, got {bins}"
        )));
    }
    let truth = truth_bools(scores, truth)?;
    if scores.is_empty() {
        return Err(AuditError::EmptySet);
    }
    let mut sums = vec![0.0f64; bins];
    let mut n_member = vec![0usize; bins];
    let mut n_nonmember = vec![0usize; bins];
    for (&s, &m) in scores.iter().zip(&truth) {
        let b = ((s * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        sums[b] += s;
        if m {
            n_member[b] += 1;
        } else {
            n_nonmember[b] += 1;
        }
    }
    let width = 1.0 / bins as f64;
    let occupied: Vec<CalibrationBin> = (0..bins)
        .filter(|&b| n_member[b] + n_nonmember[b] > 0)
        .map(|b| {
            let n = (n_member[b] + n_nonmember[b]) as f64;
            CalibrationBin {
                lower: b as f64 * width,
                upper: (b + 1) as f64 * width,
                center: (b as f64 + 0.5) * width,
                mean_score: sums[b] / n,
                member_fraction: n_member[b] as f64 / n,
                n_member: n_member[b],
                n_nonmember: n_nonmember[b],
            }
        })
        .collect();
    let mse = occupied
        .iter()
        .map(|b| (b.mean_score - b.member_fraction).powi(2))
        .sum::<f64>()
        / occupied.len() as f64;
    Ok(CalibrationCurve {
        bins: occupied,
        rmse: mse.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub threshold: f64,
    /// `None` when no score reaches the threshold.
    pub precision: Option<f64>,
    pub recall: f64,
    pub n_flagged: usize,
}

/// Member iff `score >= t`, for each threshold.
pub fn precision_recall_at_thresholds(
    scores: &[f64],
    truth: &[Membership],
    thresholds: &[f64],
) -> Result<Vec<PrecisionRecall>> {
    let truth = truth_bools(scores, truth)?;
    let n_member = truth.iter().filter(|&&m| m).count();
    thresholds
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(AuditError::InvalidConfig(format!(
                    "risk threshold {t} outside [0, 1]"
                )));
            }
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&s, &m) in scores.iter().zip(&truth) {
                if s >= t {
                    if m {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            Ok(PrecisionRecall {
                threshold: t,
                precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
                recall: if n_member == 0 {
                    0.0
                } else {
                    tp as f64 / n_member as f64
                },
                n_flagged: tp + fp,
            })
        })
        .collect()
}

/// Scores of the rows tagged as members.
pub fn member_scores(table: &RiskScoreTable, truth: &[Membership]) -> Result<Vec<f64>> {
    let scores = table.scores();
    if scores.len() != truth.len() {
        return Err(AuditError::LengthMismatch {
            left: scores.len(),
            right: truth.len(),
        });
    }
    Ok(scores
        .into_iter()
        .zip(truth)
        .filter(|(_, m)| **m == Membership::Member)
        .map(|(s, _)| s)
        .collect())
}

/// Mean excess of member risk scores over the training prior.
pub fn prior_leakage_distance(member_scores: &[f64], priors: Priors) -> Result<f64> {
    if member_scores.is_empty() {
        return Err(AuditError::NoMembers);
    }
    let sum: f64 = member_scores.iter().map(|&r| r - priors.p_train).sum();
    Ok(sum / member_scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub score: f64,
    pub cumulative: f64,
}

/// Empirical CDF, one point per distinct score.
pub fn risk_cdf(member_scores: &[f64]) -> Result<Vec<CdfPoint>> {
    if member_scores.is_empty() {
        return Err(AuditError::NoMembers);
    }
    let mut sorted = member_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, &s) in sorted.iter().enumerate() {
        let cumulative = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.score == s => last.cumulative = cumulative,
            _ => points.push(CdfPoint {
                score: s,
                cumulative,
            }),
        }
    }
    Ok(points)
}
