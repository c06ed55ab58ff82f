//! Statistical parity, conditional statistical parity and conditional
//! estimation disparity on the same predictions.
//!
//!     cargo run --example parity_metrics

use fairaudit::estimation::{self, ModelSpec, OptimizerConfig};
use fairaudit::metrics::{self, BootstrapConfig, Groups, ParityReport};
use fairaudit::{dgp, scenarios};

fn show(r: &ParityReport) {
    println!("{} (aggregate {:.4})", r.metric, r.overall_gap);
    for g in &r.detail.groups {
        let ci = g.ci.map(|c| format!("[{:+.4}, {:+.4}]", c.lower, c.upper)).unwrap_or_default();
        println!("  {:<9} n={:<6} gap={:.4} signed={:+.4} {ci}", g.group, g.n, g.gap, g.signed_gap);
    }
}

fn main() -> fairaudit::Result<()> {
    let spec = scenarios::get("true_difference")?.dgp();
    let train = dgp::sample(&spec, 20_000, 1)?;
    let audit = dgp::sample(&spec, 20_000, 2)?;

    // a model that ignores credit history cannot see the true age difference
    let model = estimation::fit(&train, &ModelSpec::new(&["income"]), &OptimizerConfig::default())?;
    let pi_hat = estimation::predict_dataset(&model, &audit)?;
    let eps = estimation::estimation_error(&model, &spec, &audit)?;

    let groups = Groups::from_dataset(&audit, "age_group")?;
    let strata = metrics::build_strata(&audit, &["income".into(), "credit_history".into()], 5)?;
    let single = metrics::build_strata(&audit, &[], 1)?;
    let boot = BootstrapConfig { replicates: 300, level: 0.95, seed: 7 };

    show(&metrics::parity_report("statistical_parity", "age_group", &pi_hat, &groups, &single, Some(&boot))?);
    show(&metrics::parity_report("conditional_statistical_parity", "age_group", &pi_hat, &groups, &strata, Some(&boot))?);
    show(&metrics::parity_report("conditional_estimation_disparity", "age_group", &eps, &groups, &strata, Some(&boot))?);
    Ok(())
}
