//! Staged discrimination audit.
//!
//! Stages run in a fixed order and each appends to the narrative:
//!
//! 1. data legitimacy: feature roles, model inputs, and (for models fitted
//!    to a proxy label) the group γ-disparity of the target;
//! 2. direct discrimination: protected features or exact proxies among the
//!    model inputs, with a counterfactual flip test;
//! 3. indirect discrimination: conditional favourable-action rate gaps of
//!    the (model, policy) pair;
//! 4. estimation: conditional estimation disparity ω;
//! 5. justification: comparison against less discriminatory alternatives.
//!    Only indirect discrimination admits this defence; for a direct finding
//!    the comparison is kept as evidence and the classification stays.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::decision::{DecisionPolicy, SelectionRates, FAVOURABLE};
use crate::dgp::{DgpSpec, FeatureRole};
use crate::error::{Error, Result};
use crate::estimation::{self, FitTarget, FittedModel};
use crate::metrics::{self, BootstrapConfig, GammaDisparity, Groups, ParityReport, Strata};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtectedContext {
    Employment,
    Credit,
    Housing,
    GoodsAndServices,
    Education,
    Other,
}

/// What the decision-maker declares about the setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ContextDeclaration {
    pub protected_context: ProtectedContext,
    /// The target `y` and its business rationale.
    pub stated_aim: String,
    pub aim_asserted_legitimate: bool,
    /// Per-feature rationale, keyed by feature name.
    #[serde(default)]
    pub rationale: BTreeMap<String, String>,
}

impl ContextDeclaration {
    pub fn check(&self) -> Result<()> {
        if self.aim_asserted_legitimate && self.stated_aim.trim().is_empty() {
            return Err(Error::Config("context: stated-aim must be non-empty when the aim is asserted legitimate".into()));
        }
        Ok(())
    }
}

/// Audit thresholds and sample settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct AuditConfig {
    /// Protected features to compare groups on. Default: every discrete
    /// protected feature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_features: Option<Vec<String>>,
    /// Legitimate features to condition on. Default: every legitimate feature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata_features: Option<Vec<String>>,
    pub bins: usize,
    pub bootstrap_replicates: usize,
    pub confidence_level: f64,
    /// Smallest group gap that counts as a disparity.
    pub gap_tolerance: f64,
    /// How much lower an alternative's disparity must be to count as less
    /// discriminatory.
    pub disparity_reduction_tolerance: f64,
    /// Holdout log-loss an alternative may give up and still count as a
    /// proportionate substitute.
    pub accuracy_margin: f64,
    pub min_group_size: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            group_features: None,
            strata_features: None,
            bins: 5,
            bootstrap_replicates: 200,
            confidence_level: 0.95,
            gap_tolerance: 0.02,
            disparity_reduction_tolerance: 0.02,
            accuracy_margin: 0.01,
            min_group_size: 30,
            seed: 0,
        }
    }
}

impl AuditConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("metrics: {m}")));
        if self.bins == 0 {
            return bad("bins must be ≥ 1");
        }
        if self.bootstrap_replicates == 0 {
            return bad("bootstrap-replicates must be ≥ 1");
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return bad("confidence-level must lie in (0, 1)");
        }
        for (name, v) in [
            ("gap-tolerance", self.gap_tolerance),
            ("disparity-reduction-tolerance", self.disparity_reduction_tolerance),
            ("accuracy-margin", self.accuracy_margin),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be finite and ≥ 0"));
            }
        }
        Ok(())
    }

    fn bootstrap(&self, label: &str) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.bootstrap_replicates,
            level: self.confidence_level,
            seed: derive_seed(self.seed, label),
        }
    }
}

/// A fitted model together with the policy applied to its predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub name: String,
    pub model: FittedModel,
    pub policy: DecisionPolicy,
}

impl Candidate {
    pub fn describe(&self) -> String {
        format!(
            "model '{}' on [{}] with policy: {}",
            self.name,
            self.model.feature_names().join(", "),
            self.policy.describe()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    NoProhibitedConduct,
    DirectDiscriminationRisk,
    IndirectPrimaFacie,
    IndirectJustifiable,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::NoProhibitedConduct => "NoProhibitedConduct",
            Classification::DirectDiscriminationRisk => "DirectDiscriminationRisk",
            Classification::IndirectPrimaFacie => "IndirectPrimaFacie",
            Classification::IndirectJustifiable => "IndirectJustifiable",
            Classification::Inconclusive => "Inconclusive",
        }
    }

    pub fn is_flag(&self) -> bool {
        *self != Classification::NoProhibitedConduct
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decisions under a switched protected value, all else fixed.
///
/// This intervenes on the model input only; it is not a full legal
/// counterfactual of the individual's life history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipResult {
    pub feature: String,
    pub in_model: bool,
    pub rows: usize,
    pub rows_changed: usize,
    /// Share of rows whose decision changes for some alternative level.
    pub rate: f64,
    /// How often each level is the side that loses the favourable action.
    pub adverse_counts: BTreeMap<String, usize>,
    /// `adverse_counts` over the number of level pairings each level took
    /// part in, so large groups do not dominate.
    pub adverse_share: BTreeMap<String, f64>,
    /// Level(s) with the largest adverse share.
    pub adverse_direction: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectFeature {
    pub feature: String,
    pub role: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proxy_for: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip: Option<FlipResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DirectFinding {
    pub flagged: bool,
    /// The flip test could not be run on some protected input.
    pub inconclusive: bool,
    pub features: Vec<DirectFeature>,
    pub counterfactual_flip_rate: f64,
    /// `feature=level` entries losing the favourable action.
    pub adverse_direction: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndirectFinding {
    pub flagged: bool,
    pub inconclusive: bool,
    pub pcp_description: String,
    /// Favourable-action rate gaps, one report per group feature.
    pub reports: Vec<ParityReport>,
    pub selection_rates: BTreeMap<String, SelectionRates>,
    /// `feature=level` entries put at a particular disadvantage.
    pub disadvantaged: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimationFinding {
    pub omega: Vec<ParityReport>,
    pub max_omega: f64,
    /// `feature=level` entries whose risk is overestimated beyond tolerance.
    pub adverse_estimation: Vec<String>,
    pub gamma: Vec<GammaDisparity>,
    pub gamma_flagged: bool,
    pub gamma_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub name: String,
    pub log_loss: f64,
    pub mean_utility: f64,
    /// Largest conditional favourable-action rate gap over audited groups.
    pub disparity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeComparison {
    pub evaluation: CandidateEvaluation,
    pub disparity_reduction: f64,
    pub log_loss_increase: f64,
    pub less_discriminatory: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JustificationOutcome {
    #[default]
    NotReached,
    /// Direct discrimination: no justification defence exists.
    NoDefence,
    Justifiable,
    NotJustifiable,
    Inconclusive,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JustificationFinding {
    pub assessed: bool,
    pub outcome: JustificationOutcome,
    pub aim_asserted_legitimate: bool,
    pub less_discriminatory_alternative_found: bool,
    /// Log-loss given up by the alternative with the largest disparity reduction.
    pub accuracy_cost: Option<f64>,
    pub primary: Option<CandidateEvaluation>,
    pub alternatives: Vec<AlternativeComparison>,
    pub caveats: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataLegitimacy {
    pub roles: BTreeMap<String, String>,
    pub model_inputs: BTreeMap<String, String>,
    pub target: FitTarget,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: u8,
    pub name: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub classification: Classification,
    pub data_legitimacy: DataLegitimacy,
    pub direct: DirectFinding,
    pub indirect: IndirectFinding,
    pub estimation: EstimationFinding,
    pub justification: JustificationFinding,
    pub narrative: Vec<StageEntry>,
    pub diagnostics: Vec<String>,
}

/// Dataset, group memberships and strata shared by the audit stages.
pub struct AuditFrame<'a> {
    pub data: &'a Dataset,
    pub groups: Vec<(String, Groups)>,
    pub strata: Strata,
}

impl<'a> AuditFrame<'a> {
    pub fn new(spec: &DgpSpec, data: &'a Dataset, config: &AuditConfig) -> Result<Self> {
        let group_features = match &config.group_features {
            Some(g) => g.clone(),
            None => spec
                .features
                .iter()
                .filter(|f| f.role == FeatureRole::Protected && f.schema().is_discrete())
                .map(|f| f.name.clone())
                .collect(),
        };
        if group_features.is_empty() {
            return Err(Error::Config("audit needs at least one discrete protected group feature".into()));
        }
        let mut groups = Vec::with_capacity(group_features.len());
        for g in group_features {
            match spec.feature(&g) {
                Some(f) if f.role == FeatureRole::Protected && f.schema().is_discrete() => {}
                Some(_) => return Err(Error::Config(format!("group feature '{g}' must be a discrete protected feature"))),
                None => return Err(Error::Config(format!("unknown group feature '{g}'"))),
            }
            let grp = Groups::from_dataset(data, &g)?;
            groups.push((g, grp));
        }
        let strata_features = match &config.strata_features {
            Some(s) => s.clone(),
            None => spec.features_with_role(|r| *r == FeatureRole::Legitimate),
        };
        for s in &strata_features {
            if spec.role(s) != Some(&FeatureRole::Legitimate) {
                return Err(Error::Config(format!("strata feature '{s}' must be legitimate")));
            }
        }
        let strata = metrics::build_strata(data, &strata_features, config.bins)?;
        Ok(Self { data, groups, strata })
    }

    fn favourable(decisions: &[usize]) -> Vec<f64> {
        decisions.iter().map(|&d| if d == FAVOURABLE { 1.0 } else { 0.0 }).collect()
    }

    fn disparity(&self, decisions: &[usize]) -> Result<f64> {
        let fav = Self::favourable(decisions);
        let mut worst: f64 = 0.0;
        for (_, g) in &self.groups {
            worst = worst.max(metrics::stratified_gap(&fav, g, &self.strata)?.max_gap());
        }
        Ok(worst)
    }
}

fn decisions_for(policy: &DecisionPolicy, pi_hat: &[f64]) -> Vec<usize> {
    pi_hat.iter().map(|&p| policy.decide(p)).collect()
}

/// Counterfactual flip test on one discrete feature.
pub fn counterfactual_flip_rate(
    model: &FittedModel,
    policy: &DecisionPolicy,
    data: &Dataset,
    feature: &str,
) -> Result<FlipResult> {
    let col = data
        .column_index(feature)
        .ok_or_else(|| Error::Input(format!("unknown feature '{feature}'")))?;
    let schema = &data.columns()[col].schema;
    let levels = schema
        .levels()
        .ok_or_else(|| Error::Input(format!("flip test needs a categorical or binary feature; '{feature}' is continuous")))?;
    let n = data.n();
    let mut adverse_counts: BTreeMap<String, usize> = levels.iter().map(|l| (l.clone(), 0)).collect();
    if !model.uses(feature) {
        return Ok(FlipResult {
            feature: feature.to_string(),
            in_model: false,
            rows: n,
            rows_changed: 0,
            rate: 0.0,
            adverse_share: levels.iter().map(|l| (l.clone(), 0.0)).collect(),
            adverse_counts,
            adverse_direction: Vec::new(),
        });
    }
    policy.check()?;
    let lp = model.compile_for(data)?;
    let per_row: Vec<(bool, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = data.value(i, col) as usize;
            let base = policy.decide(lp.probability(|c| data.value(i, c)));
            let mut changed = false;
            let mut losers = Vec::new();
            for alt in (0..levels.len()).filter(|&l| l != own) {
                let a = policy.decide(lp.probability(|c| if c == col { alt as f64 } else { data.value(i, c) }));
                if a == base {
                    continue;
                }
                changed = true;
                if base == FAVOURABLE {
                    losers.push(alt);
                } else if a == FAVOURABLE {
                    losers.push(own);
                }
            }
            (changed, losers)
        })
        .collect();
    let mut rows_changed = 0;
    for (changed, losers) in &per_row {
        rows_changed += usize::from(*changed);
        for &l in losers {
            *adverse_counts.get_mut(&levels[l]).expect("level") += 1;
        }
    }
    let k = levels.len();
    let mut level_rows = vec![0usize; k];
    for i in 0..n {
        level_rows[data.value(i, col) as usize] += 1;
    }
    let adverse_share: BTreeMap<String, f64> = levels
        .iter()
        .enumerate()
        .map(|(l, label)| {
            let pairings = level_rows[l] * (k - 1) + (n - level_rows[l]);
            let share = if pairings > 0 { adverse_counts[label] as f64 / pairings as f64 } else { 0.0 };
            (label.clone(), share)
        })
        .collect();
    let worst = adverse_share.values().copied().fold(0.0, f64::max);
    let adverse_direction = if worst > 0.0 {
        levels.iter().filter(|l| adverse_share[*l] == worst).cloned().collect()
    } else {
        Vec::new()
    };
    Ok(FlipResult {
        feature: feature.to_string(),
        in_model: true,
        rows: n,
        rows_changed,
        rate: if n > 0 { rows_changed as f64 / n as f64 } else { 0.0 },
        adverse_counts,
        adverse_share,
        adverse_direction,
    })
}

/// Direct discrimination: protected features or exact proxies among the model
/// inputs, and a nonzero counterfactual flip rate attributable to them.
pub fn detect_direct(spec: &DgpSpec, model: &FittedModel, policy: &DecisionPolicy, data: &Dataset) -> Result<DirectFinding> {
    let mut out = DirectFinding::default();
    for f in &model.features {
        let role = spec
            .role(&f.name)
            .ok_or_else(|| Error::Input(format!("model input '{}' is not declared in the DGP", f.name)))?;
        if !role.is_protected_channel() {
            continue;
        }
        let proxy_for = match role {
            FeatureRole::ExactProxy { target } => Some(target.clone()),
            _ => None,
        };
        let flip = if f.is_discrete() {
            Some(counterfactual_flip_rate(model, policy, data, &f.name)?)
        } else {
            out.inconclusive = true;
            out.notes.push(format!("'{}' is continuous; the flip test cannot be run", f.name));
            None
        };
        if let Some(fl) = &flip {
            out.counterfactual_flip_rate = out.counterfactual_flip_rate.max(fl.rate);
            if fl.rate > 0.0 {
                out.flagged = true;
                out.adverse_direction.extend(fl.adverse_direction.iter().map(|l| format!("{}={l}", f.name)));
            }
        }
        out.features.push(DirectFeature { feature: f.name.clone(), role: role.label().to_string(), proxy_for, flip });
    }
    if out.features.is_empty() {
        out.notes.push("no protected feature or exact proxy among the model inputs".into());
    } else {
        out.notes.push("motive and intent do not bear on this finding".into());
    }
    if out.flagged {
        out.inconclusive = false;
    }
    Ok(out)
}

/// Indirect discrimination: does the (model, policy) pair put a protected
/// group at a particular disadvantage given legitimate features?
///
/// A group is disadvantaged when its aggregate conditional gap exceeds the
/// tolerance and the interval for its signed gap lies below zero.
pub fn detect_indirect(
    decisions: &[usize],
    frame: &AuditFrame<'_>,
    config: &AuditConfig,
    pcp_description: &str,
) -> Result<IndirectFinding> {
    let fav = AuditFrame::favourable(decisions);
    let mut out = IndirectFinding { pcp_description: pcp_description.to_string(), ..Default::default() };
    for (feature, groups) in &frame.groups {
        let boot = config.bootstrap(&format!("indirect/{feature}"));
        let report = metrics::parity_report("favourable_rate_gap", feature, &fav, groups, &frame.strata, Some(&boot))?;
        out.selection_rates.insert(feature.clone(), crate::decision::selection_rates(decisions, groups)?);
        for g in &report.detail.groups {
            if g.n == 0 {
                continue;
            }
            if g.n < config.min_group_size {
                out.inconclusive = true;
                out.warnings.push(format!(
                    "{feature}={}: {} rows is below the minimum group size {}",
                    g.group, g.n, config.min_group_size
                ));
                continue;
            }
            if g.gap > config.gap_tolerance && g.ci.is_some_and(|ci| ci.upper < 0.0) {
                out.disadvantaged.push(format!("{feature}={}", g.group));
            }
        }
        out.warnings.extend(report.detail.warnings.iter().map(|w| format!("{feature}: {w}")));
        out.reports.push(report);
    }
    out.flagged = !out.disadvantaged.is_empty();
    Ok(out)
}

struct Evaluated {
    evaluation: CandidateEvaluation,
}

fn evaluate(candidate: &Candidate, frame: &AuditFrame<'_>) -> Result<Evaluated> {
    candidate.policy.check()?;
    let pi_hat = estimation::predict_dataset(&candidate.model, frame.data)?;
    let decisions = decisions_for(&candidate.policy, &pi_hat);
    let u = candidate.policy.utility_matrix();
    let y = frame.data.y();
    let n = y.len().max(1) as f64;
    let mean_utility = decisions.iter().zip(y).map(|(&a, &yy)| u.get(usize::from(yy), a)).sum::<f64>() / n;
    Ok(Evaluated {
        evaluation: CandidateEvaluation {
            name: candidate.name.clone(),
            log_loss: estimation::log_loss(&pi_hat, y),
            mean_utility,
            disparity: frame.disparity(&decisions)?,
        },
    })
}

/// Proportionality check against alternative (model, policy) pairs.
///
/// An alternative is less discriminatory when it lowers the disparity by
/// more than the reduction tolerance while giving up at most the accuracy
/// margin in holdout log-loss. Justifiable requires supplied alternatives,
/// none of them less discriminatory, and an aim asserted legitimate.
pub fn assess_justification(
    context: &ContextDeclaration,
    primary: &Candidate,
    alternatives: &[Candidate],
    frame: &AuditFrame<'_>,
    config: &AuditConfig,
    direct: &DirectFinding,
    indirect: &IndirectFinding,
) -> Result<JustificationFinding> {
    let mut out = JustificationFinding { aim_asserted_legitimate: context.aim_asserted_legitimate, ..Default::default() };
    if !direct.flagged && !indirect.flagged {
        out.caveats.push("no prima facie discrimination to justify".into());
        return Ok(out);
    }
    let base = evaluate(primary, frame)?.evaluation;
    let mut best_reduction: Option<(f64, f64)> = None;
    for alt in alternatives {
        let e = evaluate(alt, frame)?.evaluation;
        let disparity_reduction = base.disparity - e.disparity;
        let log_loss_increase = e.log_loss - base.log_loss;
        let less_discriminatory = disparity_reduction > config.disparity_reduction_tolerance
            && log_loss_increase <= config.accuracy_margin;
        if disparity_reduction > 0.0 && best_reduction.is_none_or(|(r, _)| disparity_reduction > r) {
            best_reduction = Some((disparity_reduction, log_loss_increase));
        }
        out.less_discriminatory_alternative_found |= less_discriminatory;
        out.alternatives.push(AlternativeComparison { evaluation: e, disparity_reduction, log_loss_increase, less_discriminatory });
    }
    out.accuracy_cost = best_reduction.map(|(_, cost)| cost);
    out.primary = Some(base);

    if direct.flagged {
        out.outcome = JustificationOutcome::NoDefence;
        out.caveats.push("direct discrimination admits no justification; comparison kept as evidence only".into());
        return Ok(out);
    }
    out.assessed = true;
    out.outcome = if !context.aim_asserted_legitimate {
        out.caveats.push("the aim is not asserted legitimate".into());
        JustificationOutcome::NotJustifiable
    } else if out.less_discriminatory_alternative_found {
        JustificationOutcome::NotJustifiable
    } else if alternatives.is_empty() {
        out.caveats.push("no alternatives supplied; proportionality cannot be assessed".into());
        JustificationOutcome::Inconclusive
    } else {
        JustificationOutcome::Justifiable
    };
    Ok(out)
}

/// Final classification from the stage findings.
///
/// A direct finding is never downgraded by the justification stage.
pub fn classify(
    direct: &DirectFinding,
    indirect: &IndirectFinding,
    justification: &JustificationFinding,
    stage_failed: bool,
) -> Classification {
    if direct.flagged {
        return Classification::DirectDiscriminationRisk;
    }
    if stage_failed || direct.inconclusive {
        return Classification::Inconclusive;
    }
    if indirect.flagged {
        return match justification.outcome {
            JustificationOutcome::Justifiable if justification.assessed => Classification::IndirectJustifiable,
            JustificationOutcome::Inconclusive => Classification::Inconclusive,
            _ => Classification::IndirectPrimaFacie,
        };
    }
    if indirect.inconclusive {
        return Classification::Inconclusive;
    }
    Classification::NoProhibitedConduct
}

fn fmt_levels(v: &[String]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

/// Runs all stages in order on audit (holdout) data.
///
/// Invalid inputs are errors. A stage that fails at run time is logged in
/// the diagnostics and the classification becomes `Inconclusive`, unless a
/// direct finding already stands.
pub fn run_audit(
    spec: &DgpSpec,
    data: &Dataset,
    primary: &Candidate,
    context: &ContextDeclaration,
    alternatives: &[Candidate],
    config: &AuditConfig,
) -> Result<AuditFinding> {
    spec.ensure_valid()?;
    context.check()?;
    config.check()?;
    primary.policy.check()?;
    for a in alternatives {
        a.policy.check()?;
    }
    if spec.features_with_role(|r| *r == FeatureRole::Legitimate).is_empty() {
        return Err(Error::Config("audit needs at least one legitimate feature".into()));
    }
    if spec.features_with_role(|r| *r == FeatureRole::Protected).is_empty() {
        return Err(Error::Config("audit needs at least one protected feature".into()));
    }
    let frame = AuditFrame::new(spec, data, config)?;
    let mut narrative = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failed = false;
    let mut fail = |stage: u8, e: Error, diagnostics: &mut Vec<String>| {
        failed = true;
        diagnostics.push(format!("stage {stage}: {e}"));
    };

    // 1. data legitimacy
    let mut legitimacy = DataLegitimacy { target: primary.model.target, ..Default::default() };
    for f in &spec.features {
        legitimacy.roles.insert(f.name.clone(), f.role.label().to_string());
    }
    for name in primary.model.feature_names() {
        let role = spec.role(&name).map(|r| r.label().to_string()).unwrap_or_else(|| "undeclared".into());
        legitimacy.model_inputs.insert(name, role);
    }
    let non_legit: Vec<String> =
        legitimacy.model_inputs.iter().filter(|(_, r)| *r == "non-legitimate").map(|(k, _)| k.clone()).collect();
    if !non_legit.is_empty() {
        legitimacy.notes.push(format!(
            "model uses non-legitimate feature(s) {} that are absent from the true outcome model",
            non_legit.join(", ")
        ));
    }
    let missing_true: Vec<&String> =
        spec.outcome.true_feature_names.iter().filter(|t| !primary.model.uses(t)).collect();
    if !missing_true.is_empty() {
        legitimacy.notes.push(format!(
            "true outcome features not used by the model: {}",
            missing_true.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
    }
    let mut estimation_finding = EstimationFinding::default();
    match (primary.model.target, &spec.proxy) {
        (FitTarget::YProxy, Some(_)) => {
            let gamma = metrics::target_mismatch_gamma(spec, data);
            match gamma {
                Ok(gamma) => {
                    for (feature, groups) in &frame.groups {
                        let boot = config.bootstrap(&format!("gamma/{feature}"));
                        match metrics::gamma_group_disparity(&gamma, feature, groups, &frame.strata, config.gap_tolerance, &boot)
                        {
                            Ok(g) => {
                                estimation_finding.gamma_flagged |= g.flagged;
                                estimation_finding.gamma.push(g);
                            }
                            Err(e) => fail(1, e, &mut diagnostics),
                        }
                    }
                    estimation_finding.gamma_note = if estimation_finding.gamma_flagged {
                        estimation_finding
                            .gamma
                            .iter()
                            .filter(|g| g.flagged)
                            .map(|g| format!("{}: {}", g.report.group_feature, g.message))
                            .collect::<Vec<_>>()
                            .join("; ")
                    } else {
                        "proxy target shows no group-level mismatch beyond tolerance".into()
                    };
                }
                Err(e) => fail(1, e, &mut diagnostics),
            }
        }
        (FitTarget::YProxy, None) => {
            fail(1, Error::Input("model targets y_proxy but the DGP declares no proxy".into()), &mut diagnostics)
        }
        (FitTarget::Y, _) => estimation_finding.gamma_note = "model is fitted to the true outcome; γ ≡ 0".into(),
    }
    let protected_inputs: Vec<String> = legitimacy
        .model_inputs
        .iter()
        .filter(|(_, r)| *r == "protected" || *r == "exact-proxy")
        .map(|(k, _)| k.clone())
        .collect();
    narrative.push(StageEntry {
        stage: 1,
        name: "data legitimacy".into(),
        summary: format!(
            "Context {:?}; aim \"{}\" asserted legitimate: {}. Model inputs: {}. Protected or exact-proxy inputs: {}. Target: {}. {}",
            context.protected_context,
            context.stated_aim,
            context.aim_asserted_legitimate,
            fmt_levels(&primary.model.feature_names()),
            fmt_levels(&protected_inputs),
            match primary.model.target {
                FitTarget::Y => "true outcome y",
                FitTarget::YProxy => "proxy label ỹ",
            },
            estimation_finding.gamma_note
        ),
    });

    // 2. direct
    let direct = match detect_direct(spec, &primary.model, &primary.policy, data) {
        Ok(d) => d,
        Err(e) => {
            fail(2, e, &mut diagnostics);
            DirectFinding::default()
        }
    };
    narrative.push(StageEntry {
        stage: 2,
        name: "direct discrimination".into(),
        summary: if direct.flagged {
            format!(
                "Flagged: switching a protected input alone changes decisions ({}). Motive and intent are irrelevant.",
                direct
                    .features
                    .iter()
                    .filter_map(|f| f.flip.as_ref())
                    .filter(|fl| fl.rate > 0.0)
                    .map(|fl| format!(
                        "{}: {:.2}% of individuals, adverse to {}",
                        fl.feature,
                        100.0 * fl.rate,
                        fmt_levels(&fl.adverse_direction)
                    ))
                    .collect::<Vec<_>>()
                    .join("; ")
            )
        } else if direct.inconclusive {
            format!("Inconclusive: {}", direct.notes.join("; "))
        } else {
            format!("Not flagged: {}", direct.notes.join("; "))
        },
    });

    // 3. indirect
    let pcp = primary.describe();
    let primary_pi_hat = estimation::predict_dataset(&primary.model, data);
    let indirect = match &primary_pi_hat {
        Ok(pi_hat) => {
            let decisions = decisions_for(&primary.policy, pi_hat);
            detect_indirect(&decisions, &frame, config, &pcp).unwrap_or_else(|e| {
                fail(3, e, &mut diagnostics);
                IndirectFinding::default()
            })
        }
        Err(e) => {
            fail(3, Error::Input(e.to_string()), &mut diagnostics);
            IndirectFinding::default()
        }
    };
    narrative.push(StageEntry {
        stage: 3,
        name: "indirect discrimination".into(),
        summary: format!(
            "PCP: {pcp}. Conditioning on [{}] in {} strata. Largest conditional favourable-rate gap {:.4} (tolerance {}). Disadvantaged: {}.{}",
            frame.strata.features.join(", "),
            frame.strata.len(),
            indirect.reports.iter().map(|r| r.overall_gap).fold(0.0, f64::max),
            config.gap_tolerance,
            fmt_levels(&indirect.disadvantaged),
            if indirect.inconclusive { " Some groups are too small to assess." } else { "" }
        ),
    });

    // 4. estimation
    match estimation::estimation_error(&primary.model, spec, data) {
        Ok(eps) => {
            for (feature, groups) in &frame.groups {
                let boot = config.bootstrap(&format!("omega/{feature}"));
                match metrics::parity_report("conditional_estimation_disparity", feature, &eps, groups, &frame.strata, Some(&boot)) {
                    Ok(r) => {
                        for g in &r.detail.groups {
                            if g.n > 0 && g.gap > config.gap_tolerance && g.ci.is_some_and(|ci| ci.lower > 0.0) {
                                estimation_finding.adverse_estimation.push(format!("{feature}={}", g.group));
                            }
                        }
                        estimation_finding.max_omega = estimation_finding.max_omega.max(r.overall_gap);
                        estimation_finding.omega.push(r);
                    }
                    Err(e) => fail(4, e, &mut diagnostics),
                }
            }
        }
        Err(e) => fail(4, e, &mut diagnostics),
    }
    narrative.push(StageEntry {
        stage: 4,
        name: "estimation".into(),
        summary: format!(
            "Largest conditional estimation disparity ω = {:.4}. Risk overestimated beyond tolerance for: {}.",
            estimation_finding.max_omega,
            fmt_levels(&estimation_finding.adverse_estimation)
        ),
    });

    // 5. justification
    let justification = match assess_justification(context, primary, alternatives, &frame, config, &direct, &indirect) {
        Ok(j) => j,
        Err(e) => {
            fail(5, e, &mut diagnostics);
            JustificationFinding::default()
        }
    };
    narrative.push(StageEntry {
        stage: 5,
        name: "justification".into(),
        summary: match justification.outcome {
            JustificationOutcome::NotReached => "Not reached: nothing to justify.".into(),
            JustificationOutcome::NoDefence => format!(
                "No defence is available for direct discrimination. Less discriminatory alternative on record: {}.",
                justification.less_discriminatory_alternative_found
            ),
            outcome => format!(
                "{:?}: {} alternative(s) compared; less discriminatory alternative found: {}; accuracy cost of the fairest alternative: {}.{}",
                outcome,
                justification.alternatives.len(),
                justification.less_discriminatory_alternative_found,
                justification.accuracy_cost.map_or("n/a".to_string(), |c| format!("{c:+.4} log-loss")),
                if justification.caveats.is_empty() { String::new() } else { format!(" {}", justification.caveats.join("; ")) }
            ),
        },
    });

    let classification = classify(&direct, &indirect, &justification, failed);
    Ok(AuditFinding {
        classification,
        data_legitimacy: legitimacy,
        direct,
        indirect,
        estimation: estimation_finding,
        justification,
        narrative,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn findings(direct: bool, indirect: bool, outcome: JustificationOutcome) -> (DirectFinding, IndirectFinding, JustificationFinding) {
        (
            DirectFinding { flagged: direct, ..Default::default() },
            IndirectFinding { flagged: indirect, ..Default::default() },
            JustificationFinding { assessed: indirect && !direct, outcome, ..Default::default() },
        )
    }

    #[test]
    fn classification_table() {
        use JustificationOutcome::*;
        let cases = [
            (false, false, NotReached, Classification::NoProhibitedConduct),
            (true, false, NoDefence, Classification::DirectDiscriminationRisk),
            (true, true, Justifiable, Classification::DirectDiscriminationRisk),
            (false, true, Justifiable, Classification::IndirectJustifiable),
            (false, true, NotJustifiable, Classification::IndirectPrimaFacie),
            (false, true, Inconclusive, Classification::Inconclusive),
        ];
        for (d, i, o, want) in cases {
            let (d, i, j) = findings(d, i, o);
            assert_eq!(classify(&d, &i, &j, false), want);
        }
    }

    #[test]
    fn failures_never_mask_direct() {
        let (d, i, j) = findings(true, false, JustificationOutcome::NotReached);
        assert_eq!(classify(&d, &i, &j, true), Classification::DirectDiscriminationRisk);
        let (d, i, j) = findings(false, false, JustificationOutcome::NotReached);
        assert_eq!(classify(&d, &i, &j, true), Classification::Inconclusive);
    }

    #[test]
    fn context_requires_aim_text() {
        let c = ContextDeclaration {
            protected_context: ProtectedContext::Credit,
            stated_aim: " ".into(),
            aim_asserted_legitimate: true,
            rationale: BTreeMap::new(),
        };
        assert!(c.check().is_err());
    }

    #[test]
    fn config_ranges() {
        assert!(AuditConfig::default().check().is_ok());
        assert!(AuditConfig { bins: 0, ..Default::default() }.check().is_err());
        assert!(AuditConfig { confidence_level: 1.0, ..Default::default() }.check().is_err());
        assert!(AuditConfig { gap_tolerance: -0.1, ..Default::default() }.check().is_err());
    }
}
