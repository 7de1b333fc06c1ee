//! The four per-prediction signals on a few hand-made predictions.

use mia_audit::prelude::*;

fn main() -> Result<()> {
    let cases = [
        ("confident, correct", vec![0.97, 0.02, 0.01], 0),
        ("hesitant, correct", vec![0.45, 0.35, 0.20], 0),
        ("confident, wrong", vec![0.02, 0.97, 0.01], 0),
        ("uniform", vec![1.0 / 3.0; 3], 2),
    ];
    println!(
        "{:<20} {:>5} {:>8} {:>8} {:>8}",
        "prediction", "corr", "conf", "entr", "mentr"
    );
    for (name, probs, label) in cases {
        let r = PredictionRecord::new(probs, label, Membership::Unknown)?;
        println!(
            "{name:<20} {:>5} {:>8.4} {:>8.4} {:>8.4}",
            correctness(&r),
            confidence(&r),
            entropy(&r),
            modified_entropy(&r)
        );
    }
    Ok(())
}
