//! Threshold and expected-utility policies, and the selection rates they
//! produce per group.
//!
//!     cargo run --example decision_policies

use fairaudit::decision::{self, DecisionPolicy, UtilityMatrix};
use fairaudit::estimation::{self, FittedModel};
use fairaudit::metrics::Groups;
use fairaudit::{dgp, scenarios};

fn main() -> fairaudit::Result<()> {
    // a loan that defaults costs three times what a repaid loan earns
    let lending = UtilityMatrix::new(
        vec!["deny".into(), "grant".into()],
        vec![vec![0.0, 1.0], vec![0.0, -3.0]],
    )?;
    for p in [0.1, 0.25, 0.4] {
        let eu = lending.expected([1.0 - p, p]);
        println!("π̂={p}: EU(deny)={:+.2} EU(grant)={:+.2} -> {}", eu[0], eu[1], lending.actions[decision::decide_utility([1.0 - p, p], &lending)?]);
    }

    let spec = scenarios::get("true_difference")?.dgp();
    let data = dgp::sample(&spec, 20_000, 3)?;
    let pi_hat = estimation::predict_dataset(&FittedModel::oracle(&spec)?, &data)?;
    let groups = Groups::from_dataset(&data, "age_group")?;

    let policies = [
        DecisionPolicy::Threshold(0.3),
        DecisionPolicy::Threshold(0.5),
        DecisionPolicy::Utility(lending),
    ];
    for policy in &policies {
        policy.check()?;
        let decisions: Vec<usize> = pi_hat.iter().map(|&p| policy.decide(p)).collect();
        let rates = decision::selection_rates(&decisions, &groups)?;
        let per_group: Vec<String> = rates
            .groups
            .iter()
            .map(|g| format!("{}={:.3}", g.group, g.rate.unwrap_or(f64::NAN)))
            .collect();
        println!("{:<45} overall={:.3} {}", policy.describe(), rates.overall.unwrap_or(f64::NAN), per_group.join(" "));
    }
    Ok(())
}
