//! Flag only the samples whose risk score clears a high bar.

use mia_audit::prelude::*;
use mia_audit::report::precision_recall_text;

fn main() -> Result<()> {
    let spec = GeneratorSpec {
        n_member: 10_000,
        n_nonmember: 10_000,
        seed: 7,
        ..Default::default()
    };
    let shadow = generate(&spec)?;
    let target = generate(&GeneratorSpec { seed: 8, ..spec })?;
    let model = fit_conditionals(&shadow, &FitConfig::default())?;
    let scores = score_set(&target, &model, Priors::equal())?;
    let truth: Vec<Membership> = target.iter().map(|r| r.membership).collect();
    let rows = precision_recall_at_thresholds(
        &scores.scores(),
        &truth,
        &[1.0, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5],
    )?;
    print!("{}", precision_recall_text(&rows));
    Ok(())
}
