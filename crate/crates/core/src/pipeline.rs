//! Run configuration and the end-to-end audit pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::decision::DecisionPolicy;
use crate::dgp::{self, DgpSpec};
use crate::error::{Error, Result};
use crate::estimation::{self, FittedModel, ModelSpec, OptimizerConfig};
use crate::legal_audit::{self, AuditConfig, Candidate, ContextDeclaration};
use crate::report::{AuditReport, NamedModel, Provenance, ReportModels, SCHEMA_VERSION};
use crate::rng::derive_seed;

fn default_n_train() -> usize {
    20_000
}

fn default_n_audit() -> usize {
    20_000
}

fn default_primary_name() -> String {
    "primary".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DataConfig {
    /// DGP spec file, relative to the config file.
    pub dgp: PathBuf,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_audit")]
    pub n_audit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelConfig {
    #[serde(default = "default_primary_name")]
    pub name: String,
    #[serde(flatten)]
    pub spec: ModelSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AlternativeConfig {
    pub name: String,
    #[serde(flatten)]
    pub spec: ModelSpec,
    /// Defaults to the primary policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<DecisionPolicy>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A complete audit run, as read from a TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub policy: DecisionPolicy,
    pub context: ContextDeclaration,
    #[serde(default)]
    pub metrics: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub alternatives: Vec<AlternativeConfig>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes to TOML")
    }

    /// Reads a config file. A missing or unreadable file is a configuration
    /// error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// The DGP path resolved against the directory holding the config file.
    pub fn dgp_path(&self, config_path: &Path) -> PathBuf {
        match config_path.parent() {
            Some(dir) if self.data.dgp.is_relative() => dir.join(&self.data.dgp),
            _ => self.data.dgp.clone(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.data.n_train == 0 || self.data.n_audit == 0 {
            return Err(Error::Config("data: n-train and n-audit must be ≥ 1".into()));
        }
        self.policy.check().map_err(|e| Error::Config(format!("policy: {e}")))?;
        for a in &self.alternatives {
            if let Some(p) = &a.policy {
                p.check().map_err(|e| Error::Config(format!("alternative '{}': {e}", a.name)))?;
            }
        }
        self.context.check()?;
        self.metrics.check()
    }

    /// Audit settings with bootstrap seeds tied to the run seed.
    pub fn audit_config(&self) -> AuditConfig {
        AuditConfig { seed: derive_seed(self.seed, "audit"), ..self.metrics.clone() }
    }

    /// Hex SHA-256 of the canonical JSON of the config and DGP spec. Paths
    /// and output settings do not take part.
    pub fn hash_with(&self, spec: &DgpSpec) -> String {
        let mut canonical = self.clone();
        canonical.data.dgp = PathBuf::new();
        canonical.output = OutputConfig::default();
        let json = serde_json::to_string(&(canonical, spec)).expect("config serializes to JSON");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Overrides for a pipeline run: use supplied data or a supplied model
/// instead of sampling or fitting them.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub audit_data: Option<Dataset>,
    pub primary_model: Option<FittedModel>,
}

/// The sampled train and audit sets for a run.
pub fn sample_data(spec: &DgpSpec, config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let train = dgp::sample(spec, config.data.n_train, derive_seed(config.seed, "train"))?;
    let audit = dgp::sample(spec, config.data.n_audit, derive_seed(config.seed, "audit-data"))?;
    Ok((train, audit))
}

/// Samples, fits and audits.
pub fn execute(spec: &DgpSpec, config: &RunConfig) -> Result<AuditReport> {
    execute_with(spec, config, Overrides::default())
}

pub fn execute_with(spec: &DgpSpec, config: &RunConfig, overrides: Overrides) -> Result<AuditReport> {
    spec.ensure_valid()?;
    config.check()?;
    let needs_training = overrides.primary_model.is_none() || !config.alternatives.is_empty();
    let train = if needs_training {
        Some(dgp::sample(spec, config.data.n_train, derive_seed(config.seed, "train"))?)
    } else {
        None
    };
    let audit = match overrides.audit_data {
        Some(d) => d,
        None => dgp::sample(spec, config.data.n_audit, derive_seed(config.seed, "audit-data"))?,
    };
    let primary_model = match overrides.primary_model {
        Some(m) => m,
        None => estimation::fit(train.as_ref().expect("train data"), &config.model.spec, &config.model.optimizer)?,
    };
    let primary = Candidate { name: config.model.name.clone(), model: primary_model, policy: config.policy.clone() };
    let mut alternatives = Vec::with_capacity(config.alternatives.len());
    for a in &config.alternatives {
        let model = estimation::fit(train.as_ref().expect("train data"), &a.spec, &config.model.optimizer)?;
        alternatives.push(Candidate {
            name: a.name.clone(),
            model,
            policy: a.policy.clone().unwrap_or_else(|| config.policy.clone()),
        });
    }
    let finding =
        legal_audit::run_audit(spec, &audit, &primary, &config.context, &alternatives, &config.audit_config())?;
    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run: config.name.clone(),
            seed: config.seed,
            config_hash: config.hash_with(spec),
            n_train: train.as_ref().map(|t| t.n()),
            n_audit: audit.n(),
        },
        models: ReportModels {
            primary: NamedModel::from(&primary),
            alternatives: alternatives.iter().map(NamedModel::from).collect(),
        },
        finding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
seed = 7

[data]
dgp = "spec.toml"
n-train = 500

[model]
feature-names = ["income"]

[policy]
threshold = 0.4

[context]
protected-context = "credit"
stated-aim = "repayment"
aim-asserted-legitimate = true

[[alternatives]]
name = "flat"
feature-names = []
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(CONFIG).unwrap();
        assert_eq!(c.data.n_audit, default_n_audit());
        assert_eq!(c.model.name, "primary");
        assert_eq!(c.policy, DecisionPolicy::Threshold(0.4));
        assert_eq!(c.metrics, AuditConfig::default());
        assert_eq!(c.alternatives[0].policy, None);
        assert!(c.check().is_ok());
    }

    #[test]
    fn utility_policy_from_toml() {
        let text = CONFIG.replace(
            "[policy]\nthreshold = 0.4",
            "[policy.utility]\nactions = [\"deny\", \"grant\"]\nvalues = [[0, 1], [0, -3]]",
        );
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.policy.utility_matrix().values, vec![vec![0.0, 1.0], vec![0.0, -3.0]]);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::from_toml_str(CONFIG).unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn dgp_path_is_relative_to_config() {
        let c = RunConfig::from_toml_str(CONFIG).unwrap();
        assert_eq!(c.dgp_path(Path::new("/a/b/run.toml")), PathBuf::from("/a/b/spec.toml"));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let spec = crate::dgp::tests::two_feature_spec();
        let a = RunConfig::from_toml_str(CONFIG).unwrap();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        b.data.dgp = "other.toml".into();
        assert_eq!(a.hash_with(&spec), b.hash_with(&spec));
        b.seed = 8;
        assert_ne!(a.hash_with(&spec), b.hash_with(&spec));
    }

    #[test]
    fn zero_rows_rejected() {
        let mut c = RunConfig::from_toml_str(CONFIG).unwrap();
        c.data.n_audit = 0;
        assert!(matches!(c.check(), Err(Error::Config(_))));
    }
}
