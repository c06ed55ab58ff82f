//! Risk truly differs by age through credit history. The audit finds a
//! disparity but the less discriminatory alternative costs too much accuracy.
//!
//!     cargo run --example true_difference_audit

use fairaudit::scenarios;

fn main() -> fairaudit::Result<()> {
    let scenario = scenarios::get("true_difference")?;
    let report = scenario.run(None)?;
    let f = &report.finding;

    println!("disadvantaged: {:?}", f.indirect.disadvantaged);
    println!("max ω: {:.4}", f.estimation.max_omega);
    let j = &f.justification;
    if let Some(p) = &j.primary {
        println!("{:<20} log-loss {:.4} disparity {:.4}", p.name, p.log_loss, p.disparity);
    }
    for a in &j.alternatives {
        println!(
            "{:<20} log-loss {:.4} disparity {:.4}  (reduction {:+.4}, cost {:+.4}, less discriminatory: {})",
            a.evaluation.name, a.evaluation.log_loss, a.evaluation.disparity, a.disparity_reduction, a.log_loss_increase, a.less_discriminatory
        );
    }
    println!("classification: {}", f.classification);
    Ok(())
}
