//! Attack accuracy across training epochs, picking the epoch whose test
//! accuracy matches a defended model.

use mia_audit::prelude::*;
use mia_audit::report::sweep_text;

fn main() -> Result<()> {
    let mut snapshots = Vec::new();
    for (i, epoch) in [5u32, 10, 20, 40, 80].into_iter().enumerate() {
        let t = i as f64;
        let spec = GeneratorSpec {
            n_member: 3000,
            n_nonmember: 3000,
            member_boost: 2.0 + 3.0 * t,
            nonmember_boost: 1.5 + 0.6 * t,
            seed: 100 + epoch as u64,
            ..Default::default()
        };
        let shadow = generate(&GeneratorSpec {
            seed: spec.seed + 1000,
            ..spec.clone()
        })?;
        snapshots.push(EpochSnapshot::new(epoch, generate(&spec)?, Some(shadow)));
    }
    let report = early_stopping_sweep(&snapshots, None, Some(0.7), &SuiteConfig::default())?;
    print!("{}", sweep_text(&report));
    Ok(())
}
