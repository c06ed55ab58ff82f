//! Driving the audit from code: your own data, models, policy and context.
//! Prints the classification and the direct-discrimination evidence.
//!
//!     cargo run --example custom_audit

use std::collections::BTreeMap;

use fairaudit::legal_audit::{self, AuditConfig, Candidate, ContextDeclaration, ProtectedContext};
use fairaudit::estimation::{self, ModelSpec, OptimizerConfig};
use fairaudit::{dgp, scenarios, DecisionPolicy};

fn main() -> fairaudit::Result<()> {
    let spec = scenarios::get("neutral")?.dgp();
    let train = dgp::sample(&spec, 10_000, 1)?;
    let audit = dgp::sample(&spec, 10_000, 2)?;
    let opt = OptimizerConfig::default();

    // the hiring-style model below uses gender directly
    let primary = Candidate {
        name: "with_gender".into(),
        model: estimation::fit(&train, &ModelSpec::new(&["gender", "income", "debt"]), &opt)?,
        policy: DecisionPolicy::Threshold(0.2),
    };
    let alternative = Candidate {
        name: "without_gender".into(),
        model: estimation::fit(&train, &ModelSpec::new(&["income", "debt"]), &opt)?,
        policy: DecisionPolicy::Threshold(0.2),
    };
    let context = ContextDeclaration {
        protected_context: ProtectedContext::Employment,
        stated_aim: "predict probation failure".into(),
        aim_asserted_legitimate: true,
        rationale: BTreeMap::from([("debt".into(), "proxy for financial stress".into())]),
    };
    let config = AuditConfig { bootstrap_replicates: 100, seed: 5, ..Default::default() };
    let finding = legal_audit::run_audit(&spec, &audit, &primary, &context, &[alternative], &config)?;

    println!("classification: {}", finding.classification);
    println!("gender coefficient: {:+.4}", primary.model.coefficients["gender=male"]);
    println!("flip rate: {:.4}", finding.direct.counterfactual_flip_rate);
    for note in &finding.direct.notes {
        println!("note: {note}");
    }
    Ok(())
}
