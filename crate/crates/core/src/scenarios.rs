//! Built-in audit scenarios with known expected classifications.
//!
//! Each scenario is a DGP spec plus a run config, stored as the same TOML a
//! user would write, so `scenario export` and `audit --config` exercise the
//! exact fixtures the programmatic path uses.

use std::path::{Path, PathBuf};

use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::legal_audit::Classification;
use crate::pipeline::{self, RunConfig};
use crate::report::AuditReport;

#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub expected: Classification,
    pub notes: &'static [&'static str],
    dgp_toml: &'static str,
    config_toml: &'static str,
}

impl Scenario {
    pub fn dgp(&self) -> DgpSpec {
        DgpSpec::from_toml_str(self.dgp_toml).expect("built-in DGP parses")
    }

    pub fn config(&self) -> RunConfig {
        RunConfig::from_toml_str(self.config_toml).expect("built-in config parses")
    }

    pub fn dgp_toml(&self) -> &'static str {
        self.dgp_toml
    }

    pub fn config_toml(&self) -> &'static str {
        self.config_toml
    }

    /// Runs the scenario, optionally under a different seed.
    pub fn run(&self, seed: Option<u64>) -> Result<AuditReport> {
        let mut config = self.config();
        if let Some(s) = seed {
            config.seed = s;
        }
        pipeline::execute(&self.dgp(), &config)
    }

    /// Writes `<name>.dgp.toml` and `<name>.config.toml` into `dir` and
    /// returns the config path.
    pub fn export(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let dgp = dir.join(format!("{}.dgp.toml", self.name));
        std::fs::write(&dgp, self.dgp_toml).map_err(|e| Error::io(&dgp, e))?;
        let config = dir.join(format!("{}.config.toml", self.name));
        std::fs::write(&config, self.config_toml).map_err(|e| Error::io(&config, e))?;
        Ok(config)
    }
}

pub fn all() -> &'static [Scenario] {
    &SCENARIOS
}

pub fn get(name: &str) -> Result<Scenario> {
    SCENARIOS.iter().find(|s| s.name == name).copied().ok_or_else(|| {
        Error::Config(format!(
            "unknown scenario '{name}'; available: {}",
            SCENARIOS.iter().map(|s| s.name).collect::<Vec<_>>().join(", ")
        ))
    })
}

static SCENARIOS: [Scenario; 4] = [
    Scenario {
        name: "finnish_credit",
        summary: "Credit scoring on gender, language, age and residence only; switching gender alone changes decisions.",
        expected: Classification::DirectDiscriminationRisk,
        notes: &[
            "The bank model uses nothing but protected characteristics.",
            "Men carry more debt, so the fitted model scores them as riskier and some men are refused where an otherwise identical woman is not.",
        ],
        dgp_toml: FINNISH_DGP,
        config_toml: FINNISH_CONFIG,
    },
    Scenario {
        name: "true_difference",
        summary: "Risk differs by age only through credit history, a legitimate feature the model relies on.",
        expected: Classification::IndirectJustifiable,
        notes: &[
            "Younger applicants have shorter credit histories, which truly predict default.",
            "Dropping credit history narrows the age gap but costs far more accuracy than the configured margin.",
        ],
        dgp_toml: TRUE_DIFFERENCE_DGP,
        config_toml: TRUE_DIFFERENCE_CONFIG,
    },
    Scenario {
        name: "label_bias",
        summary: "Recorded defaults are inflated for the minority group and the model learns it through postcode.",
        expected: Classification::IndirectPrimaFacie,
        notes: &[
            "Postcode is not part of the true outcome model; it carries ethnicity into the predictions.",
            "An income-only model is both less discriminatory and at least as accurate on the true outcome.",
        ],
        dgp_toml: LABEL_BIAS_DGP,
        config_toml: LABEL_BIAS_CONFIG,
    },
    Scenario {
        name: "neutral",
        summary: "Gender is independent of everything and the model uses legitimate features only.",
        expected: Classification::NoProhibitedConduct,
        notes: &["A control: nothing should be flagged."],
        dgp_toml: NEUTRAL_DGP,
        config_toml: NEUTRAL_CONFIG,
    },
];

const FINNISH_DGP: &str = r#"[[features]]
name = "gender"
role = "protected"
distribution = { categorical = { levels = ["female", "male"], probabilities = [0.5, 0.5] } }

[[features]]
name = "language"
role = "protected"
distribution = { categorical = { levels = ["finnish", "swedish", "other"], probabilities = [0.85, 0.10, 0.05] } }

[[features]]
name = "age_band"
role = "protected"
distribution = { categorical = { levels = ["under_30", "30_to_54", "55_plus"], probabilities = [0.25, 0.5, 0.25] } }

[[features]]
name = "residence"
role = "protected"
distribution = { categorical = { levels = ["urban", "rural"], probabilities = [0.7, 0.3] } }

[[features]]
name = "income"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 1.0 } }
dependence = { parents = [
    { term = "language=swedish", coefficient = 0.4 },
    { term = "language=other", coefficient = -0.3 },
    { term = "age_band=under_30", coefficient = -0.3 },
    { term = "residence=rural", coefficient = -0.2 },
] }

[[features]]
name = "debt"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 1.0 } }
dependence = { parents = [
    { term = "gender=male", coefficient = 0.4 },
    { term = "age_band=under_30", coefficient = 0.2 },
] }

[[features]]
name = "employment"
role = "legitimate"
distribution = { bernoulli = { p = 0.75 } }
dependence = { parents = [{ term = "age_band=under_30", coefficient = -0.5 }] }

[outcome]
true-feature-names = ["income", "debt", "employment"]
intercept = -1.6
coefficients = { income = -0.8, debt = 0.7, employment = -0.6 }
"#;

const FINNISH_CONFIG: &str = r#"name = "finnish_credit"
seed = 2018

[data]
dgp = "finnish_credit.dgp.toml"
n-train = 20000
n-audit = 20000

[model]
name = "bank_model"
feature-names = ["gender", "language", "age_band", "residence"]

[policy]
threshold = 0.17

[context]
protected-context = "credit"
stated-aim = "predict loan default"
aim-asserted-legitimate = true

[metrics]
bins = 5
bootstrap-replicates = 200

[[alternatives]]
name = "legitimate_features"
feature-names = ["income", "debt", "employment"]
"#;

const TRUE_DIFFERENCE_DGP: &str = r#"[[features]]
name = "age_group"
role = "protected"
distribution = { categorical = { levels = ["under_30", "30_plus"], probabilities = [0.35, 0.65] } }

[[features]]
name = "income"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 1.0 } }

[[features]]
name = "credit_history"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 0.6 } }
dependence = { parents = [{ term = "age_group=under_30", coefficient = -1.5 }] }

[outcome]
true-feature-names = ["income", "credit_history"]
intercept = -1.5
coefficients = { income = -0.6, credit_history = -1.2 }
"#;

const TRUE_DIFFERENCE_CONFIG: &str = r#"name = "true_difference"
seed = 11

[data]
dgp = "true_difference.dgp.toml"
n-train = 20000
n-audit = 20000

[model]
name = "credit_model"
feature-names = ["income", "credit_history"]

[policy]
threshold = 0.3

[context]
protected-context = "credit"
stated-aim = "predict loan default"
aim-asserted-legitimate = true

[context.rationale]
credit_history = "repayment record predicts default"

[metrics]
strata-features = ["income"]
bins = 5
bootstrap-replicates = 200

[[alternatives]]
name = "parity_constrained"
feature-names = ["income"]
"#;

const LABEL_BIAS_DGP: &str = r#"[[features]]
name = "ethnicity"
role = "protected"
distribution = { categorical = { levels = ["majority", "minority"], probabilities = [0.7, 0.3] } }

[[features]]
name = "income"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 1.0 } }

[[features]]
name = "postcode_area"
role = "non-legitimate"
distribution = { categorical = { levels = ["area_a", "area_b"], probabilities = [0.8, 0.2] } }
dependence = { parents = [{ term = "ethnicity=minority", coefficient = 3.0 }] }

[outcome]
true-feature-names = ["income"]
intercept = -1.5
coefficients = { income = -1.0 }

[proxy]
group-feature = "ethnicity"
flip0 = { minority = 0.15 }
"#;

const LABEL_BIAS_CONFIG: &str = r#"name = "label_bias"
seed = 5

[data]
dgp = "label_bias.dgp.toml"
n-train = 20000
n-audit = 20000

[model]
name = "recorded_default_model"
feature-names = ["income", "postcode_area"]
target = "y_proxy"

[policy]
threshold = 0.25

[context]
protected-context = "credit"
stated-aim = "predict loan default"
aim-asserted-legitimate = true

[metrics]
bins = 5
bootstrap-replicates = 200

[[alternatives]]
name = "income_only"
feature-names = ["income"]
target = "y_proxy"
"#;

const NEUTRAL_DGP: &str = r#"[[features]]
name = "gender"
role = "protected"
distribution = { categorical = { levels = ["female", "male"], probabilities = [0.5, 0.5] } }

[[features]]
name = "income"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 1.0 } }

[[features]]
name = "debt"
role = "legitimate"
distribution = { gaussian = { mean = 0.0, sd = 1.0 } }

[outcome]
true-feature-names = ["income", "debt"]
intercept = -1.4
coefficients = { income = -0.8, debt = 0.6 }
"#;

const NEUTRAL_CONFIG: &str = r#"name = "neutral"
seed = 3

[data]
dgp = "neutral.dgp.toml"
n-train = 20000
n-audit = 20000

[model]
name = "credit_model"
feature-names = ["income", "debt"]

[policy]
threshold = 0.25

[context]
protected-context = "credit"
stated-aim = "predict loan default"
aim-asserted-legitimate = true

[[alternatives]]
name = "income_only"
feature-names = ["income"]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse_and_validate() {
        for s in all() {
            let spec = s.dgp();
            assert!(spec.validate().is_ok(), "{}: {:?}", s.name, spec.validate());
            let c = s.config();
            assert!(c.check().is_ok(), "{}", s.name);
            assert_eq!(c.name.as_deref(), Some(s.name));
            assert_eq!(c.data.dgp, PathBuf::from(format!("{}.dgp.toml", s.name)));
        }
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(get("nope"), Err(Error::Config(_))));
    }
}
