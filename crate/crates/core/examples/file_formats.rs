//! Writing and reading prediction dumps, threshold tables and risk scores.

use mia_audit::io::{
    load_json, load_predictions, save_json, save_predictions, write_scores_csv, LoadOptions,
};
use mia_audit::prelude::*;

fn main() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let set = generate(&GeneratorSpec {
        k: 3,
        n_member: 4,
        n_nonmember: 4,
        seed: 13,
        ..Default::default()
    })?;

    for name in ["preds.csv", "preds.jsonl"] {
        let path = dir.path().join(name);
        save_predictions(&set, &path, None)?;
        let back = load_predictions(&path, None, &LoadOptions::default())?;
        assert_eq!(back, set);
        let text = std::fs::read_to_string(&path)?;
        println!(
            "== {name}\n{}",
            text.lines().take(3).collect::<Vec<_>>().join("\n")
        );
    }

    let table = learn_class_thresholds(&set, MetricKind::Confidence, &ThresholdConfig::default())?;
    let path = dir.path().join("thresholds.json");
    save_json(&table, &path)?;
    assert_eq!(load_json::<ThresholdTable>(&path)?, table);
    println!("== thresholds.json\n{}", std::fs::read_to_string(&path)?);

    let model = fit_conditionals(
        &set,
        &FitConfig {
            bins: 4,
            ..Default::default()
        },
    )?;
    let scores = score_set(&set, &model, Priors::equal())?;
    println!("== scores.csv");
    write_scores_csv(&scores, std::io::stdout())?;
    Ok(())
}
