//! Machine-readable audit report and its markdown rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::DecisionPolicy;
use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::legal_audit::{AuditFinding, Candidate, JustificationOutcome};
use crate::metrics::ParityReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    pub n_audit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub policy: DecisionPolicy,
    pub model: FittedModel,
}

impl From<&Candidate> for NamedModel {
    fn from(c: &Candidate) -> Self {
        Self { name: c.name.clone(), policy: c.policy.clone(), model: c.model.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportModels {
    pub primary: NamedModel,
    pub alternatives: Vec<NamedModel>,
}

/// The full audit output. Serialization is deterministic: fields appear in
/// declaration order and maps are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub models: ReportModels,
    pub finding: AuditFinding,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes to JSON");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("audit report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "unsupported report schema version {} (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Writes `report.json` and `report.md` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))?;
        let md = dir.join("report.md");
        std::fs::write(&md, render_markdown(self)).map_err(|e| Error::io(&md, e))
    }
}

fn parity_table(out: &mut String, r: &ParityReport) {
    let _ = writeln!(out, "\n`{}` by `{}` (aggregate gap {:.4}):\n", r.metric, r.group_feature, r.overall_gap);
    out.push_str("| group | n | gap | signed gap | interval | coverage |\n|---|---:|---:|---:|---|---:|\n");
    for g in &r.detail.groups {
        let ci = g.ci.map_or("n/a".to_string(), |c| format!("[{:.4}, {:.4}]", c.lower, c.upper));
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {:+.4} | {} | {:.3} |",
            g.group, g.n, g.gap, g.signed_gap, ci, g.coverage
        );
    }
}

/// Narrative report in markdown. A pure function of the report.
pub fn render_markdown(report: &AuditReport) -> String {
    let f = &report.finding;
    let p = &report.provenance;
    let mut out = String::new();
    let _ = writeln!(out, "# Discrimination audit: {}\n", f.classification);
    if let Some(run) = &p.run {
        let _ = writeln!(out, "Run `{run}`. ");
    }
    let _ = writeln!(
        out,
        "{} {}, seed {}, config hash `{}`, {} audit rows.\n",
        p.tool, p.version, p.seed, p.config_hash, p.n_audit
    );
    out.push_str("The classification reports evidence of risk; it is not a legal ruling.\n\n## Stages\n");
    for s in &f.narrative {
        let _ = writeln!(out, "\n### {}. {}\n\n{}", s.stage, s.name, s.summary);
    }

    out.push_str("\n## Models\n\n| name | inputs | target | policy |\n|---|---|---|---|\n");
    for m in std::iter::once(&report.models.primary).chain(&report.models.alternatives) {
        let _ = writeln!(
            out,
            "| {} | {} | {:?} | {} |",
            m.name,
            m.model.feature_names().join(", "),
            m.model.target,
            m.policy.describe()
        );
    }

    if !f.direct.features.is_empty() {
        out.push_str("\n## Counterfactual flips\n\n| feature | role | rate | adverse to |\n|---|---|---:|---|\n");
        for d in &f.direct.features {
            match &d.flip {
                Some(fl) => {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {:.4} | {} |",
                        d.feature,
                        d.role,
                        fl.rate,
                        fl.adverse_direction.join(", ")
                    );
                }
                None => {
                    let _ = writeln!(out, "| {} | {} | n/a | n/a |", d.feature, d.role);
                }
            }
        }
    }

    if !f.indirect.reports.is_empty() {
        out.push_str("\n## Favourable-action rates\n");
        for r in &f.indirect.reports {
            parity_table(&mut out, r);
        }
    }
    if !f.estimation.omega.is_empty() {
        out.push_str("\n## Estimation disparity\n");
        for r in &f.estimation.omega {
            parity_table(&mut out, r);
        }
    }
    if !f.estimation.gamma.is_empty() {
        out.push_str("\n## Target mismatch\n");
        for g in &f.estimation.gamma {
            parity_table(&mut out, &g.report);
            let _ = writeln!(out, "\n{}", g.message);
        }
    }

    let j = &f.justification;
    if j.outcome != JustificationOutcome::NotReached {
        out.push_str("\n## Alternatives\n\n| name | log-loss | mean utility | disparity | less discriminatory |\n|---|---:|---:|---:|---|\n");
        if let Some(e) = &j.primary {
            let _ = writeln!(out, "| {} (primary) | {:.4} | {:.4} | {:.4} | |", e.name, e.log_loss, e.mean_utility, e.disparity);
        }
        for a in &j.alternatives {
            let e = &a.evaluation;
            let _ = writeln!(
                out,
                "| {} | {:.4} | {:.4} | {:.4} | {} |",
                e.name, e.log_loss, e.mean_utility, e.disparity, a.less_discriminatory
            );
        }
    }

    let warnings: Vec<&String> = f.indirect.warnings.iter().chain(&f.diagnostics).collect();
    if !warnings.is_empty() {
        out.push_str("\n## Warnings\n\n");
        for w in warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}
