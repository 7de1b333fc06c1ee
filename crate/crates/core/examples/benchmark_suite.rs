//! Every benchmark attack, shadow-trained and evaluated on a separate target.

use mia_audit::prelude::*;

fn main() -> Result<()> {
    let spec = GeneratorSpec {
        member_boost: 8.0,
        nonmember_boost: 3.0,
        seed: 1,
        ..Default::default()
    };
    let shadow = generate(&spec)?;
    let target = generate(&GeneratorSpec { seed: 2, ..spec })?;
    let report = run_benchmark_suite(&shadow, &target, &SuiteConfig::default())?;
    print!("{}", report.to_text_table());
    println!("best attack accuracy: {:.4}", report.best_accuracy());
    Ok(())
}
