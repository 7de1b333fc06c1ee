//! Per-class thresholds learned from a shadow set, with the pooled fallback.

use mia_audit::prelude::*;

fn main() -> Result<()> {
    let shadow = generate(&GeneratorSpec {
        n_member: 2000,
        n_nonmember: 2000,
        heterogeneity: Some((0..10).map(|i| 0.5 + i as f64 * 0.2).collect()),
        seed: 1,
        ..Default::default()
    })?;
    for metric in MetricKind::THRESHOLDED {
        let table = learn_class_thresholds(&shadow, metric, &ThresholdConfig::default())?;
        println!(
            "{metric}: global threshold {:.4} (shadow accuracy {:.4})",
            table.global_threshold, table.global_accuracy
        );
        for (class, t) in &table.per_class {
            println!(
                "  class {class}: {:>8.4}  accuracy {:.4}{}",
                t.threshold,
                t.shadow_accuracy,
                if t.fallback { "  (fallback)" } else { "" }
            );
        }
    }
    Ok(())
}
