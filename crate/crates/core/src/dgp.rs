//! Declarative true data-generating process.
//!
//! A [`DgpSpec`] lists features in declaration order (each a structural
//! equation over earlier features), a logistic true outcome model
//! `p(y = 1 | x_true)` and an optional biased proxy label. [`sample`] draws a
//! [`Dataset`] from it; [`true_prob`] evaluates the true probability for one
//! individual.
//!
//! Structural equations. Each feature may carry a [`Dependence`]: a latent
//! shift `s = Σ coefficient · parent_term + noise_sd · N(0, 1)`. The shift
//! enters as
//! - Gaussian: `x = mean + s + sd · N(0, 1)`;
//! - Bernoulli: `P(x = 1) = logistic(logit(p) + s)`;
//! - Categorical: every non-reference level's weight is multiplied by `exp(s)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset};
use crate::design::{self, gather, logistic, FeatureKind, FeatureLookup, FeatureSchema, LinearPredictor, Term};
use crate::error::{Error, Result};
use crate::metrics::{self, Groups, StratifiedGap};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureRole {
    Protected,
    /// Exact correspondence with a declared protected feature.
    ExactProxy { target: String },
    Legitimate,
    NonLegitimate,
}

impl FeatureRole {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureRole::Protected => "protected",
            FeatureRole::ExactProxy { .. } => "exact-proxy",
            FeatureRole::Legitimate => "legitimate",
            FeatureRole::NonLegitimate => "non-legitimate",
        }
    }

    /// Protected features and their exact proxies.
    pub fn is_protected_channel(&self) -> bool {
        matches!(self, FeatureRole::Protected | FeatureRole::ExactProxy { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    Categorical { levels: Vec<String>, probabilities: Vec<f64> },
    Bernoulli { p: f64 },
    Gaussian { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ParentTerm {
    pub term: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Dependence {
    pub parents: Vec<ParentTerm>,
    #[serde(default)]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FeatureSpec {
    pub name: String,
    pub role: FeatureRole,
    pub distribution: Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependence: Option<Dependence>,
}

impl FeatureSpec {
    pub fn schema(&self) -> FeatureSchema {
        let kind = match &self.distribution {
            Distribution::Categorical { levels, .. } => FeatureKind::Categorical { levels: levels.clone() },
            Distribution::Bernoulli { .. } => FeatureKind::Binary,
            Distribution::Gaussian { .. } => FeatureKind::Continuous,
        };
        FeatureSchema { name: self.name.clone(), kind }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    #[default]
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OutcomeSpec {
    pub true_feature_names: Vec<String>,
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    pub link: Link,
}

/// Label noise turning the true outcome `y` into the recorded proxy `ỹ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProxyLabelSpec {
    pub group_feature: String,
    /// `P(ỹ = 1 | y = 0, group)` keyed by group level label.
    #[serde(default)]
    pub flip0: BTreeMap<String, f64>,
    /// `P(ỹ = 0 | y = 1, group)` keyed by group level label.
    #[serde(default)]
    pub flip1: BTreeMap<String, f64>,
}

impl ProxyLabelSpec {
    pub fn flip0_for(&self, level: &str) -> f64 {
        self.flip0.get(level).copied().unwrap_or(0.0)
    }

    pub fn flip1_for(&self, level: &str) -> f64 {
        self.flip1.get(level).copied().unwrap_or(0.0)
    }

    /// `P(ỹ = 1)` for an individual with true probability `pi` in `level`.
    pub fn proxy_prob(&self, pi: f64, level: &str) -> f64 {
        pi * (1.0 - self.flip1_for(level)) + (1.0 - pi) * self.flip0_for(level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DgpSpec {
    pub features: Vec<FeatureSpec>,
    pub outcome: OutcomeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy: Option<ProxyLabelSpec>,
}

/// One broken invariant of a [`DgpSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub feature: Option<String>,
    pub rule: String,
}

impl Violation {
    fn new(feature: Option<&str>, rule: impl Into<String>) -> Self {
        Self { feature: feature.map(str::to_string), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.feature {
            Some(name) => write!(f, "{name}: {}", self.rule),
            None => f.write_str(&self.rule),
        }
    }
}

const RESERVED: [&str; 3] = ["y", "y_proxy", "pi_true"];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl DgpSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("DGP spec serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read DGP spec {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn schemas(&self) -> Vec<FeatureSchema> {
        self.features.iter().map(FeatureSpec::schema).collect()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn role(&self, name: &str) -> Option<&FeatureRole> {
        self.feature(name).map(|f| &f.role)
    }

    pub fn features_with_role(&self, pred: impl Fn(&FeatureRole) -> bool) -> Vec<String> {
        self.features.iter().filter(|f| pred(&f.role)).map(|f| f.name.clone()).collect()
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(Error::InvalidSpec)
    }

    pub(crate) fn outcome_predictor(&self, schemas: &[FeatureSchema]) -> Result<LinearPredictor> {
        LinearPredictor::compile(schemas, self.outcome.intercept, &self.outcome.coefficients).map_err(Error::Input)
    }
}

/// Checks every invariant of the spec. Violations are returned as data.
pub fn validate(spec: &DgpSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let schemas = spec.schemas();
    let mut seen: BTreeSet<&str> = BTreeSet::new();

    for (idx, f) in spec.features.iter().enumerate() {
        let name = Some(f.name.as_str());
        if !is_identifier(&f.name) {
            out.push(Violation::new(name, "feature name must be an identifier"));
        }
        if RESERVED.contains(&f.name.as_str()) {
            out.push(Violation::new(name, "feature name is reserved"));
        }
        if !seen.insert(&f.name) {
            out.push(Violation::new(name, "duplicate feature name"));
        }
        match &f.distribution {
            Distribution::Categorical { levels, probabilities } => {
                if levels.is_empty() {
                    out.push(Violation::new(name, "categorical feature needs at least one level"));
                }
                if levels.len() != probabilities.len() {
                    out.push(Violation::new(name, "levels and probabilities differ in length"));
                }
                let distinct: BTreeSet<_> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    out.push(Violation::new(name, "duplicate level label"));
                }
                if levels.iter().any(|l| l.is_empty() || l.contains(['=', ',', '"', '\n'])) {
                    out.push(Violation::new(name, "level labels must be non-empty without '=', ',', quotes or newlines"));
                }
                if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    out.push(Violation::new(name, "probability outside [0, 1]"));
                }
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    out.push(Violation::new(name, format!("probabilities sum ≠ 1 (sum = {sum})")));
                }
            }
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    out.push(Violation::new(name, "Bernoulli p outside [0, 1]"));
                }
            }
            Distribution::Gaussian { mean, sd } => {
                if !mean.is_finite() {
                    out.push(Violation::new(name, "Gaussian mean must be finite"));
                }
                if !(sd.is_finite() && *sd >= 0.0) {
                    out.push(Violation::new(name, "sd must be finite and ≥ 0"));
                }
            }
        }
        if let FeatureRole::ExactProxy { target } = &f.role {
            match spec.features.iter().find(|g| &g.name == target) {
                None => out.push(Violation::new(name, format!("unknown proxy target '{target}'"))),
                Some(g) if g.role != FeatureRole::Protected => {
                    out.push(Violation::new(name, format!("proxy target '{target}' is not a protected feature")))
                }
                _ => {}
            }
        }
        if let Some(dep) = &f.dependence {
            if !(dep.noise_sd.is_finite() && dep.noise_sd >= 0.0) {
                out.push(Violation::new(name, "noise sd must be finite and ≥ 0"));
            }
            for p in &dep.parents {
                let (parent, _) = design::split_key(&p.term);
                match spec.features.iter().position(|g| g.name == parent) {
                    Some(j) if j < idx => {
                        if let Err(e) = design::parse_term(&schemas, &p.term) {
                            out.push(Violation::new(name, e));
                        }
                    }
                    Some(_) => out.push(Violation::new(
                        name,
                        format!("parent '{parent}' must be declared before this feature"),
                    )),
                    None => out.push(Violation::new(name, format!("unknown parent '{parent}'"))),
                }
                if !p.coefficient.is_finite() {
                    out.push(Violation::new(name, "parent coefficient must be finite"));
                }
            }
        }
    }

    let outcome = &spec.outcome;
    if outcome.true_feature_names.is_empty() {
        out.push(Violation::new(None, "outcome: true-feature-names must be non-empty"));
    }
    for t in &outcome.true_feature_names {
        match spec.feature(t) {
            None => out.push(Violation::new(Some(t), "outcome: true feature is not declared")),
            Some(f) if f.role == FeatureRole::NonLegitimate => {
                out.push(Violation::new(Some(t), "outcome: non-legitimate features cannot be true features"))
            }
            _ => {}
        }
    }
    if !outcome.intercept.is_finite() {
        out.push(Violation::new(None, "outcome: intercept must be finite"));
    }
    for (key, c) in &outcome.coefficients {
        let (feature, _) = design::split_key(key);
        if let Err(e) = design::parse_term(&schemas, key) {
            out.push(Violation::new(Some(feature), format!("outcome: {e}")));
        } else if !outcome.true_feature_names.iter().any(|t| t == feature) {
            out.push(Violation::new(Some(feature), "outcome: coefficient on a feature outside true-feature-names"));
        }
        if !c.is_finite() {
            out.push(Violation::new(Some(feature), "outcome: coefficient must be finite"));
        }
    }

    if let Some(proxy) = &spec.proxy {
        let g = proxy.group_feature.as_str();
        match spec.feature(g) {
            None => out.push(Violation::new(Some(g), "proxy: unknown group feature")),
            Some(f) => {
                if f.role != FeatureRole::Protected {
                    out.push(Violation::new(Some(g), "proxy: group feature must be protected"));
                }
                match f.schema().levels() {
                    None => out.push(Violation::new(Some(g), "proxy: group feature must be categorical or Bernoulli")),
                    Some(levels) => {
                        for key in proxy.flip0.keys().chain(proxy.flip1.keys()) {
                            if !levels.contains(key) {
                                out.push(Violation::new(Some(g), format!("proxy: unknown group level '{key}'")));
                            }
                        }
                    }
                }
            }
        }
        for p in proxy.flip0.values().chain(proxy.flip1.values()) {
            if !(0.0..=1.0).contains(p) {
                out.push(Violation::new(Some(g), "proxy: flip probability outside [0, 1]"));
            }
        }
    }
    out
}

/// True probability `p(y = 1 | x_true)` for one individual. Features outside
/// the true feature set are never read.
pub fn true_prob(spec: &DgpSpec, x: &(impl FeatureLookup + ?Sized)) -> Result<f64> {
    let schemas: Vec<FeatureSchema> = spec
        .features
        .iter()
        .filter(|f| spec.outcome.true_feature_names.contains(&f.name))
        .map(FeatureSpec::schema)
        .collect();
    let values = gather(&schemas, x).map_err(Error::Input)?;
    let lp = spec.outcome_predictor(&schemas)?;
    Ok(lp.probability(|i| values[i]))
}

/// Per-dataset true probabilities, recomputed from the spec.
pub(crate) fn true_probs(spec: &DgpSpec, data: &Dataset) -> Result<Vec<f64>> {
    let schemas = data.schemas();
    for t in &spec.outcome.true_feature_names {
        if data.column_index(t).is_none() {
            return Err(Error::Input(format!("dataset lacks true feature '{t}'")));
        }
    }
    let lp = spec.outcome_predictor(&schemas)?;
    Ok((0..data.n()).into_par_iter().map(|i| lp.probability(|c| data.value(i, c))).collect())
}

struct CompiledFeature {
    distribution: Distribution,
    parents: Vec<(Term, f64)>,
    noise_sd: f64,
}

struct RowDraw {
    values: Vec<f64>,
    y: u8,
    y_proxy: Option<u8>,
    pi: f64,
}

/// Draws `n` individuals. Row `i` uses its own random stream, so the result
/// is a pure function of `(spec, n, seed)` for any thread count.
pub fn sample(spec: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.ensure_valid()?;
    let schemas = spec.schemas();
    let compiled: Vec<CompiledFeature> = spec
        .features
        .iter()
        .map(|f| {
            let (parents, noise_sd) = match &f.dependence {
                Some(d) => (
                    d.parents
                        .iter()
                        .map(|p| (design::parse_term(&schemas, &p.term).expect("validated"), p.coefficient))
                        .collect(),
                    d.noise_sd,
                ),
                None => (Vec::new(), 0.0),
            };
            CompiledFeature { distribution: f.distribution.clone(), parents, noise_sd }
        })
        .collect();
    let outcome = spec.outcome_predictor(&schemas)?;
    let proxy = spec.proxy.as_ref().map(|p| {
        let g = schemas.iter().position(|s| s.name == p.group_feature).expect("validated");
        let levels = schemas[g].levels().expect("validated");
        let flips: Vec<(f64, f64)> = levels.iter().map(|l| (p.flip0_for(l), p.flip1_for(l))).collect();
        (g, flips)
    });

    let draw_row = |i: usize| -> RowDraw {
        let mut rng = rng::stream(seed, Purpose::Sample, i as u64);
        let mut values = vec![0.0; compiled.len()];
        for (j, f) in compiled.iter().enumerate() {
            let mut shift = 0.0;
            for (term, c) in &f.parents {
                shift += c * term.eval(values[term.feature]);
            }
            if f.noise_sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                shift += f.noise_sd * z;
            }
            values[j] = match &f.distribution {
                Distribution::Gaussian { mean, sd } => {
                    let z: f64 = rng.sample(StandardNormal);
                    mean + shift + sd * z
                }
                Distribution::Bernoulli { p } => {
                    let p = if shift == 0.0 || *p <= 0.0 || *p >= 1.0 {
                        *p
                    } else {
                        logistic((p / (1.0 - p)).ln() + shift)
                    };
                    let u: f64 = rng.random();
                    if u < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                Distribution::Categorical { probabilities, .. } => {
                    let scale = shift.exp();
                    let weight = |k: usize| if k == 0 { probabilities[0] } else { probabilities[k] * scale };
                    let total: f64 = (0..probabilities.len()).map(weight).sum();
                    let u: f64 = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut level = probabilities.len() - 1;
                    for k in 0..probabilities.len() {
                        acc += weight(k);
                        if u < acc {
                            level = k;
                            break;
                        }
                    }
                    level as f64
                }
            };
        }
        let pi = outcome.probability(|c| values[c]);
        let u: f64 = rng.random();
        let y = u8::from(u < pi);
        let y_proxy = proxy.as_ref().map(|(g, flips)| {
            let (f0, f1) = flips[values[*g] as usize];
            let u: f64 = rng.random();
            match y {
                0 => u8::from(u < f0),
                _ => u8::from(u >= f1),
            }
        });
        RowDraw { values, y, y_proxy, pi }
    };

    let rows: Vec<RowDraw> = (0..n).into_par_iter().map(draw_row).collect();

    let mut columns: Vec<Column> = schemas
        .into_iter()
        .map(|schema| Column { schema, values: Vec::with_capacity(n) })
        .collect();
    let mut y = Vec::with_capacity(n);
    let mut y_proxy = proxy.as_ref().map(|_| Vec::with_capacity(n));
    let mut pi_true = Vec::with_capacity(n);
    for row in rows {
        for (c, v) in columns.iter_mut().zip(row.values) {
            c.values.push(v);
        }
        y.push(row.y);
        if let (Some(p), Some(v)) = (y_proxy.as_mut(), row.y_proxy) {
            p.push(v);
        }
        pi_true.push(row.pi);
    }
    Dataset::new(columns, y, y_proxy, pi_true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrueParityVerdict {
    TrueParityHolds,
    TrueDifferencesExist,
}

/// Settings for [`true_group_parity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParityConfig {
    pub group_feature: String,
    pub strata_features: Vec<String>,
    pub bins: usize,
    pub n_mc: usize,
    pub seed: u64,
    /// Gaps at or below this are treated as Monte Carlo noise.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueParityCheck {
    pub group_feature: String,
    pub gaps: StratifiedGap,
    pub max_gap: f64,
    pub verdict: TrueParityVerdict,
    pub warnings: Vec<String>,
}

/// Monte Carlo estimate of `|E[π | x_l, x_p] − E[π | x_l]|` per protected
/// group, stratifying on legitimate features.
///
/// When every group's gap is within tolerance, true conditional parity holds
/// and conditional estimation disparity reduces to conditional statistical
/// parity; otherwise the population carries true differences between groups.
pub fn true_group_parity_check(spec: &DgpSpec, config: &TrueParityConfig) -> Result<TrueParityCheck> {
    spec.ensure_valid()?;
    match spec.role(&config.group_feature) {
        Some(FeatureRole::Protected) => {}
        Some(_) => return Err(Error::Input(format!("'{}' is not a protected feature", config.group_feature))),
        None => return Err(Error::Input(format!("unknown feature '{}'", config.group_feature))),
    }
    for f in &config.strata_features {
        if spec.role(f) != Some(&FeatureRole::Legitimate) {
            return Err(Error::Input(format!("strata feature '{f}' is not legitimate")));
        }
    }
    let data = sample(spec, config.n_mc, config.seed)?;
    let strata = metrics::build_strata(&data, &config.strata_features, config.bins)?;
    let groups = Groups::from_dataset(&data, &config.group_feature)?;
    let gaps = metrics::stratified_gap(data.pi_true(), &groups, &strata)?;
    let mut warnings = strata.warnings.clone();
    warnings.extend(gaps.warnings.iter().cloned());
    let max_gap = gaps.groups.iter().map(|g| g.gap).fold(0.0, f64::max);
    let verdict = if max_gap > config.tolerance {
        TrueParityVerdict::TrueDifferencesExist
    } else {
        TrueParityVerdict::TrueParityHolds
    };
    Ok(TrueParityCheck { group_feature: config.group_feature.clone(), gaps, max_gap, verdict, warnings })
}
