//! Group-dependent label noise: the recorded outcome over-reports defaults
//! for one group. The γ-disparity measures the mismatch, and training on the
//! true outcome removes the flag.
//!
//!     cargo run --example label_bias_gamma

use fairaudit::metrics::{self, BootstrapConfig, Groups};
use fairaudit::{dgp, scenarios, FitTarget};

fn main() -> fairaudit::Result<()> {
    let scenario = scenarios::get("label_bias")?;
    let spec = scenario.dgp();
    let data = dgp::sample(&spec, 50_000, 4)?;

    let gamma = metrics::target_mismatch_gamma(&spec, &data)?;
    let groups = Groups::from_dataset(&data, "ethnicity")?;
    let strata = metrics::build_strata(&data, &["income".into()], 5)?;
    let boot = BootstrapConfig { replicates: 200, level: 0.95, seed: 1 };
    let g = metrics::gamma_group_disparity(&gamma, "ethnicity", &groups, &strata, 0.02, &boot)?;
    for gg in &g.report.detail.groups {
        println!("{:<9} γ-disparity {:.4}", gg.group, gg.gap);
    }
    println!("{}\n", g.message);

    for target in [FitTarget::YProxy, FitTarget::Y] {
        let mut config = scenario.config();
        config.model.spec.target = target;
        for alt in &mut config.alternatives {
            alt.spec.target = target;
        }
        let report = fairaudit::pipeline::execute(&spec, &config)?;
        println!("trained on {target:?}: {} | {}", report.finding.classification, report.finding.estimation.gamma_note);
    }
    Ok(())
}
