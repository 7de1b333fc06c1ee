//! How well risk scores match the empirical member fraction.

use mia_audit::prelude::*;
use mia_audit::report::calibration_text;

fn main() -> Result<()> {
    let spec = GeneratorSpec {
        n_member: 20_000,
        n_nonmember: 20_000,
        seed: 5,
        ..Default::default()
    };
    let shadow = generate(&spec)?;
    let target = generate(&GeneratorSpec { seed: 6, ..spec })?;
    let model = fit_conditionals(&shadow, &FitConfig::default())?;
    let scores = score_set(&target, &model, Priors::equal())?;
    let truth: Vec<Membership> = target.iter().map(|r| r.membership).collect();
    let curve = calibration_curve(&scores.scores(), &truth, 10)?;
    print!("{}", calibration_text(&curve));
    Ok(())
}
