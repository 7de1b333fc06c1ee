//! Member risk relative to the training prior, as the prior varies.

use mia_audit::prelude::*;

fn main() -> Result<()> {
    let spec = GeneratorSpec {
        n_member: 10_000,
        n_nonmember: 10_000,
        member_boost: 10.0,
        nonmember_boost: 1.0,
        base_concentration: 0.02,
        seed: 11,
        ..Default::default()
    };
    let shadow = generate(&spec)?;
    let target = generate(&GeneratorSpec { seed: 12, ..spec })?;
    let model = fit_conditionals(&shadow, &FitConfig::default())?;
    let truth: Vec<Membership> = target.iter().map(|r| r.membership).collect();
    println!("{:>7} {:>10} {:>10}", "p_train", "mean risk", "leakage");
    for p in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        let priors = Priors::new(p)?;
        let scores = score_set(&target, &model, priors)?;
        let members = member_scores(&scores, &truth)?;
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        println!(
            "{p:>7.1} {mean:>10.4} {:>10.4}",
            prior_leakage_distance(&members, priors)?
        );
    }
    Ok(())
}
