//! A credit model built from protected characteristics alone, audited end
//! to end. Prints the stage narrative.
//!
//!     cargo run --example finnish_credit_audit

use fairaudit::scenarios;

fn main() -> fairaudit::Result<()> {
    let scenario = scenarios::get("finnish_credit")?;
    let report = scenario.run(None)?;
    for stage in &report.finding.narrative {
        println!("[{}] {}\n    {}\n", stage.stage, stage.name, stage.summary);
    }
    for f in &report.finding.direct.features {
        if let Some(flip) = &f.flip {
            println!("{:<10} flip rate {:.3}  adverse shares {:?}", f.feature, flip.rate, flip.adverse_share);
        }
    }
    println!("\nclassification: {} (expected {})", report.finding.classification, scenario.expected);
    Ok(())
}
