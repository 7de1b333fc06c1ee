//! Membership-inference privacy auditing from prediction outputs alone.
//!
//! The crate takes dumps of a model's prediction vectors on member
//! (training) and non-member samples and measures how much membership they
//! leak:
//!
//! - [`metrics`]: correctness, confidence, entropy and modified entropy of a prediction.
//! - [`thresholds`]: class-dependent attack thresholds learned from shadow data.
//! - [`attacks`]: the benchmark attack suite and its accuracy/precision/recall.
//! - [`riskscore`]: per-sample privacy risk scores and their calibration.
//! - [`report`]: per-class risk vs. generalization error, early-stopping sweeps.
//! - [`io`] and [`cli`]: file formats and the `mia-audit` command line.
//! - [`synth`]: a seeded Dirichlet prediction generator and brute-force oracles.
//!
//! ```
//! use mia_audit::prelude::*;
//!
//! let spec = GeneratorSpec { n_member: 500, n_nonmember: 500, seed: 1, ..Default::default() };
//! let shadow = generate(&spec).unwrap();
//! let target = generate(&GeneratorSpec { seed: 2, ..spec }).unwrap();
//! let report = run_benchmark_suite(&shadow, &target, &SuiteConfig::default()).unwrap();
//! assert!(report.best_accuracy() > 0.5);
//! ```

pub mod attacks;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod report;
pub mod riskscore;
mod serde_ext;
pub mod synth;
pub mod thresholds;

pub use error::{AuditError, Result};

pub mod prelude {
    pub use crate::attacks::{
        evaluate_attack, infer_correctness, infer_membership, run_benchmark_suite, AttackReport,
        BenchmarkReport, SuiteConfig, Thresholding,
    };
    pub use crate::error::{AuditError, Result};
    pub use crate::metrics::{
        confidence, correctness, entropy, metric_value, modified_entropy, Direction, Membership,
        MetricKind, PredictionRecord, PredictionSet,
    };
    pub use crate::report::{
        early_stopping_sweep, per_class_risk_vs_generalization, EpochSnapshot,
    };
    pub use crate::riskscore::{
        calibration_curve, fit_conditionals, member_scores, precision_recall_at_thresholds,
        prior_leakage_distance, risk_cdf, risk_score, score_set, ClassConditionalModel, FitConfig,
        Priors, RiskScoreTable,
    };
    pub use crate::synth::{generate, GeneratorSpec};
    pub use crate::thresholds::{
        learn_class_thresholds, learn_global_threshold, Objective, ThresholdConfig, ThresholdTable,
    };
}
