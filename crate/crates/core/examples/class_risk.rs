//! Classes that generalize worse carry more member risk.

use mia_audit::prelude::*;
use mia_audit::report::class_risk_text;

fn main() -> Result<()> {
    let spec = GeneratorSpec {
        n_member: 10_000,
        n_nonmember: 10_000,
        member_boost: 3.0,
        nonmember_boost: 1.0,
        heterogeneity: Some((0..10).map(|i| 0.2 + 0.8 * i as f64 / 9.0).collect()),
        seed: 9,
        ..Default::default()
    };
    let shadow = generate(&spec)?;
    let target = generate(&GeneratorSpec { seed: 10, ..spec })?;
    let model = fit_conditionals(&shadow, &FitConfig::default())?;
    let scores = score_set(&target, &model, Priors::equal())?;
    let report = per_class_risk_vs_generalization(&target, &scores)?;
    print!("{}", class_risk_text(&report));
    Ok(())
}
