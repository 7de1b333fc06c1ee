//! Command-line surface.
//!
//! Every tunable default can be overridden with a `MIA_AUDIT_*` environment
//! variable (for example `MIA_AUDIT_BINS=30`); explicit flags win over the
//! environment. Exit status is 0 on success, 1 on usage errors and 2 on data
//! errors. Diagnostics go to stderr; data goes to files or stdout.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attacks::{run_benchmark_suite, SuiteConfig};
use crate::error::{AuditError, Result};
use crate::io::{
    load_json, load_predictions, membership_tags, read_scores_csv, save_json, scores_csv_string,
    to_json_string, write_predictions, Format, LoadOptions,
};
use crate::metrics::{MetricKind, PredictionSet, DEFAULT_PROB_TOLERANCE};
use crate::report::{
    calibration_csv, calibration_gnuplot, calibration_text, cdf_csv, cdf_gnuplot, class_risk_csv,
    class_risk_text, early_stopping_sweep, per_class_risk_vs_generalization, precision_recall_csv,
    precision_recall_text, sweep_csv, sweep_gnuplot, sweep_text, EpochSnapshot,
};
use crate::riskscore::{
    calibration_curve, fit_conditionals, member_scores, precision_recall_at_thresholds,
    prior_leakage_distance, risk_cdf, score_set, FitConfig, Priors, RiskScoreTable,
    DEFAULT_CLAMP_QUANTILE,
};
use crate::synth::{generate, GeneratorSpec};
use crate::thresholds::{learn_class_thresholds, Objective, ThresholdConfig, ThresholdTable};

/// Resolved settings shared by every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub metric: MetricKind,
    pub bins: usize,
    pub pseudo_count: f64,
    pub min_class_support: usize,
    pub p_train: f64,
    pub calibration_bins: usize,
    pub risk_thresholds: Vec<f64>,
    pub seed: u64,
    pub prob_tolerance: f64,
    pub balanced_accuracy: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            metric: MetricKind::ModifiedEntropy,
            bins: crate::riskscore::DEFAULT_BINS,
            pseudo_count: crate::riskscore::DEFAULT_PSEUDO_COUNT,
            min_class_support: crate::thresholds::DEFAULT_MIN_CLASS_SUPPORT,
            p_train: 0.5,
            calibration_bins: crate::riskscore::DEFAULT_CALIBRATION_BINS,
            risk_thresholds: crate::riskscore::DEFAULT_RISK_THRESHOLDS.to_vec(),
            seed: 0,
            prob_tolerance: DEFAULT_PROB_TOLERANCE,
            balanced_accuracy: false,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AuditError::InvalidConfig(m));
        if self.bins < 2 {
            return bad(format!("bins must be >= 2, got {}", self.bins));
        }
        if self.calibration_bins < 2 {
            return bad(format!(
                "calibration bins must be >= 2, got {}",
                self.calibration_bins
            ));
        }
        if !(self.pseudo_count >= 0.0 && self.pseudo_count.is_finite()) {
            return bad(format!(
                "pseudo count must be >= 0, got {}",
                self.pseudo_count
            ));
        }
        Priors::new(self.p_train)?;
        if let Some(t) = self
            .risk_thresholds
            .iter()
            .find(|t| !(0.0..=1.0).contains(*t))
        {
            return bad(format!("risk threshold {t} outside [0, 1]"));
        }
        if !(self.prob_tolerance >= 0.0 && self.prob_tolerance < 1.0) {
            return bad(format!(
                "probability tolerance must lie in [0, 1), got {}",
                self.prob_tolerance
            ));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> ThresholdConfig {
        ThresholdConfig {
            min_class_support: self.min_class_support,
            objective: if self.balanced_accuracy {
                Objective::BalancedAccuracy
            } else {
                Objective::Accuracy
            },
        }
    }

    pub fn fit(&self) -> FitConfig {
        FitConfig {
            metric: self.metric,
            bins: self.bins,
            pseudo_count: self.pseudo_count,
            min_class_support: self.min_class_support,
            clamp_quantile: DEFAULT_CLAMP_QUANTILE,
            clamp_max: None,
        }
    }

    pub fn priors(&self) -> Result<Priors> {
        Priors::new(self.p_train)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mia-audit",
    version,
    about = "Membership-inference privacy audit from model prediction outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Number of classes; cross-checked against the input header.
    #[arg(long)]
    k: Option<usize>,
    /// Metric for thresholds or conditional densities (conf, entr, mentr).
    #[arg(long, env = "MIA_AUDIT_METRIC", default_value = "mentr", value_parser = parse_metric)]
    metric: MetricKind,
    /// Histogram bins, overflow bin included.
    #[arg(long, env = "MIA_AUDIT_BINS", default_value_t = 20)]
    bins: usize,
    #[arg(long, env = "MIA_AUDIT_PSEUDO_COUNT", default_value_t = 1.0)]
    pseudo_count: f64,
    #[arg(long, env = "MIA_AUDIT_MIN_CLASS_SUPPORT", default_value_t = 5)]
    min_class_support: usize,
    #[arg(long, env = "MIA_AUDIT_P_TRAIN", default_value_t = 0.5)]
    p_train: f64,
    #[arg(long, env = "MIA_AUDIT_CALIBRATION_BINS", default_value_t = 20)]
    calibration_bins: usize,
    /// Comma-separated risk-score thresholds.
    #[arg(
        long,
        env = "MIA_AUDIT_RISK_THRESHOLDS",
        value_delimiter = ',',
        default_value = "1.0,0.9,0.8,0.7,0.6,0.5"
    )]
    risk_thresholds: Vec<f64>,
    #[arg(long, env = "MIA_AUDIT_SEED", default_value_t = 0)]
    seed: u64,
    /// Allowed deviation of each probability vector's sum from 1.
    #[arg(long, env = "MIA_AUDIT_PROB_TOLERANCE", default_value_t = DEFAULT_PROB_TOLERANCE)]
    prob_tolerance: f64,
    /// Maximize balanced accuracy instead of raw accuracy when learning thresholds.
    #[arg(long, env = "MIA_AUDIT_BALANCED")]
    balanced: bool,
}

impl Common {
    fn config(&self) -> Result<AuditConfig> {
        let config = AuditConfig {
            metric: self.metric,
            bins: self.bins,
            pseudo_count: self.pseudo_count,
            min_class_support: self.min_class_support,
            p_train: self.p_train,
            calibration_bins: self.calibration_bins,
            risk_thresholds: self.risk_thresholds.clone(),
            seed: self.seed,
            prob_tolerance: self.prob_tolerance,
            balanced_accuracy: self.balanced,
        };
        config.validate()?;
        Ok(config)
    }

    fn load(&self, path: &Path, config: &AuditConfig) -> Result<PredictionSet> {
        load_predictions(
            path,
            None,
            &LoadOptions {
                expected_k: self.k,
                prob_tolerance: config.prob_tolerance,
            },
        )
    }
}

fn parse_metric(s: &str) -> std::result::Result<MetricKind, String> {
    s.parse().map_err(|e: AuditError| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: AuditError| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn class-dependent attack thresholds from a shadow set.
    Thresholds {
        #[arg(long)]
        shadow: PathBuf,
        /// Output JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the benchmark attack suite and print an accuracy table.
    Attack {
        #[arg(long)]
        shadow: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit conditional densities on the shadow set and score the target.
    Score {
        #[arg(long)]
        shadow: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Risk-score CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the fitted conditional model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Write the risk-score table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Calibration curve and RMSE of risk scores against the target's tags.
    Calibrate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// gnuplot data file.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Risk CDF, precision/recall table, per-class correlation and prior leakage.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Directory for CSV and gnuplot files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Early-stopping sweep over per-epoch prediction dumps.
    Sweep {
        /// EPOCH:TARGET[:SHADOW], repeatable.
        #[arg(long = "snapshot", required = true)]
        snapshots: Vec<String>,
        /// Shadow set for epochs without their own.
        #[arg(long)]
        shadow: Option<PathBuf>,
        /// Test accuracy of the defended model to match.
        #[arg(long)]
        reference_acc: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic prediction set (`--k` classes, 10 by default).
    Synth {
        #[arg(long, default_value_t = 5000)]
        n_member: usize,
        #[arg(long, default_value_t = 5000)]
        n_nonmember: usize,
        #[arg(long, default_value_t = 8.0)]
        member_boost: f64,
        #[arg(long, default_value_t = 3.0)]
        nonmember_boost: f64,
        #[arg(long, default_value_t = 1.0)]
        base_concentration: f64,
        /// Comma-separated per-class boost multipliers.
        #[arg(long, value_delimiter = ',')]
        heterogeneity: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_format)]
        format: Option<Format>,
        /// Output file; stdout (CSV unless --format) when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Runs the CLI; returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().ansi().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_scores(path: &Path, p_train: f64) -> Result<RiskScoreTable> {
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        load_json(path)
    } else {
        read_scores_csv(std::fs::File::open(path)?, p_train)
    }
}

fn check_aligned(scores: &RiskScoreTable, target: &PredictionSet) -> Result<()> {
    if scores.rows.len() != target.len() {
        return Err(AuditError::LengthMismatch {
            left: scores.rows.len(),
            right: target.len(),
        });
    }
    Ok(())
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Thresholds {
            shadow,
            out,
            common,
        } => {
            let config = common.config()?;
            let shadow = common.load(&shadow, &config)?;
            let table: ThresholdTable =
                learn_class_thresholds(&shadow, config.metric, &config.thresholds())?;
            emit(&to_json_string(&table)?, out.as_deref(), stdout)
        }
        Command::Attack {
            shadow,
            target,
            json,
            common,
        } => {
            let config = common.config()?;
            let shadow = common.load(&shadow, &config)?;
            let target = common.load(&target, &config)?;
            let report = run_benchmark_suite(
                &shadow,
                &target,
                &SuiteConfig {
                    thresholds: config.thresholds(),
                },
            )?;
            if let Some(path) = json {
                save_json(&report, &path)?;
            }
            emit(&report.to_text_table(), None, stdout)
        }
        Command::Score {
            shadow,
            target,
            out,
            model_out,
            json,
            common,
        } => {
            let config = common.config()?;
            let shadow = common.load(&shadow, &config)?;
            let target = common.load(&target, &config)?;
            let model = fit_conditionals(&shadow, &config.fit())?;
            let table = score_set(&target, &model, config.priors()?)?;
            if let Some(path) = model_out {
                save_json(&model, &path)?;
            }
            if let Some(path) = json {
                save_json(&table, &path)?;
            }
            emit(&scores_csv_string(&table)?, out.as_deref(), stdout)
        }
        Command::Calibrate {
            scores,
            target,
            csv,
            plot,
            common,
        } => {
            let config = common.config()?;
            let scores = load_scores(&scores, config.p_train)?;
            let target = common.load(&target, &config)?;
            check_aligned(&scores, &target)?;
            let curve = calibration_curve(
                &scores.scores(),
                &membership_tags(&target),
                config.calibration_bins,
            )?;
            if let Some(path) = csv {
                std::fs::write(path, calibration_csv(&curve))?;
            }
            if let Some(path) = plot {
                std::fs::write(path, calibration_gnuplot(&curve))?;
            }
            emit(&calibration_text(&curve), None, stdout)
        }
        Command::Report {
            scores,
            target,
            out_dir,
            common,
        } => {
            let config = common.config()?;
            let priors = config.priors()?;
            let scores = load_scores(&scores, config.p_train)?;
            let target = common.load(&target, &config)?;
            check_aligned(&scores, &target)?;
            let truth = membership_tags(&target);
            let members = member_scores(&scores, &truth)?;
            let cdf = risk_cdf(&members)?;
            let pr =
                precision_recall_at_thresholds(&scores.scores(), &truth, &config.risk_thresholds)?;
            let leakage = prior_leakage_distance(&members, priors)?;
            let class_risk = match per_class_risk_vs_generalization(&target, &scores) {
                Ok(r) => Some(r),
                Err(AuditError::FewerThanTwoClasses(n)) => {
                    log::warn!("per-class correlation skipped: only {n} usable classes");
                    None
                }
                Err(e) => return Err(e),
            };

            let mut text = String::new();
            text.push_str(&format!("members: {}\n", members.len()));
            text.push_str(&format!(
                "prior leakage distance (p_train {}): {:.4}\n\n",
                priors.p_train(),
                leakage
            ));
            text.push_str("high-confidence attacks\n");
            text.push_str(&precision_recall_text(&pr));
            if let Some(r) = &class_risk {
                text.push_str("\nper-class risk vs generalization error\n");
                text.push_str(&class_risk_text(r));
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("risk_cdf.csv"), cdf_csv(&cdf))?;
                std::fs::write(dir.join("risk_cdf.dat"), cdf_gnuplot(&cdf))?;
                std::fs::write(dir.join("precision_recall.csv"), precision_recall_csv(&pr))?;
                if let Some(r) = &class_risk {
                    std::fs::write(dir.join("class_risk.csv"), class_risk_csv(r))?;
                }
            }
            emit(&text, None, stdout)
        }
        Command::Sweep {
            snapshots,
            shadow,
            reference_acc,
            csv,
            plot,
            common,
        } => {
            let config = common.config()?;
            let shared = shadow.map(|p| common.load(&p, &config)).transpose()?;
            let mut snaps = Vec::with_capacity(snapshots.len());
            for spec in &snapshots {
                let parts: Vec<&str> = spec.splitn(3, ':').collect();
                if parts.len() < 2 {
                    return Err(AuditError::InvalidConfig(format!(
                        "snapshot '{spec}' is not EPOCH:TARGET[:SHADOW]"
                    )));
                }
                let epoch: u32 = parts[0].parse().map_err(|_| {
                    AuditError::InvalidConfig(format!("epoch '{}' is not an integer", parts[0]))
                })?;
                let target = common.load(Path::new(parts[1]), &config)?;
                let own = parts
                    .get(2)
                    .map(|p| common.load(Path::new(p), &config))
                    .transpose()?;
                snaps.push(EpochSnapshot::new(epoch, target, own));
            }
            let report = early_stopping_sweep(
                &snaps,
                shared.as_ref(),
                reference_acc,
                &SuiteConfig {
                    thresholds: config.thresholds(),
                },
            )?;
            if let Some(path) = csv {
                std::fs::write(path, sweep_csv(&report))?;
            }
            if let Some(path) = plot {
                std::fs::write(path, sweep_gnuplot(&report))?;
            }
            emit(&sweep_text(&report), None, stdout)
        }
        Command::Synth {
            n_member,
            n_nonmember,
            member_boost,
            nonmember_boost,
            base_concentration,
            heterogeneity,
            format,
            out,
            common,
        } => {
            let config = common.config()?;
            let spec = GeneratorSpec {
                k: common.k.unwrap_or(10),
                n_member,
                n_nonmember,
                member_boost,
                nonmember_boost,
                base_concentration,
                heterogeneity,
                seed: config.seed,
            };
            let set = generate(&spec)?;
            match out {
                Some(path) => {
                    let format = format.unwrap_or_else(|| Format::from_path(&path));
                    write_predictions(&set, std::fs::File::create(path)?, format)
                }
                None => write_predictions(&set, stdout, format.unwrap_or(Format::Csv)),
            }
        }
    }
}
