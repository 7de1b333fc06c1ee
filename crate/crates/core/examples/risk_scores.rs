//! Per-sample privacy risk scores and the distribution of member risk.

use mia_audit::prelude::*;

fn main() -> Result<()> {
    let spec = GeneratorSpec {
        n_member: 10_000,
        n_nonmember: 10_000,
        seed: 3,
        ..Default::default()
    };
    let shadow = generate(&spec)?;
    let target = generate(&GeneratorSpec { seed: 4, ..spec })?;

    let model = fit_conditionals(&shadow, &FitConfig::default())?;
    println!(
        "{} bins on [0, {:.3}) plus overflow; {} classes fitted",
        model.num_bins() - 1,
        model.clamp_max,
        model.per_class.len()
    );
    let table = score_set(&target, &model, Priors::equal())?;
    let truth: Vec<Membership> = target.iter().map(|r| r.membership).collect();
    let members = member_scores(&table, &truth)?;

    for row in table.rows.iter().take(5) {
        println!(
            "id {:>5}  label {}  mentr {:.4}  risk {:.4}",
            row.id, row.label, row.value, row.risk_score
        );
    }
    let cdf = risk_cdf(&members)?;
    for q in [0.25, 0.5, 0.75, 0.95] {
        let point = cdf.iter().find(|p| p.cumulative >= q).unwrap();
        println!("member risk quantile {q}: {:.4}", point.score);
    }
    println!(
        "prior leakage distance: {:.4}",
        prior_leakage_distance(&members, Priors::equal())?
    );
    Ok(())
}
