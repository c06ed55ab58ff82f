//! Feature schemas and linear-predictor terms shared by the true outcome
//! model, structural equations and fitted models.
//!
//! A term key is either a feature name (the feature's numeric value, for
//! binary and continuous features) or `name=level` (a 0/1 indicator of one
//! level of a categorical feature).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

/// Value type of a feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Stored as the level index.
    Categorical { levels: Vec<String> },
    /// Stored as 0.0 / 1.0.
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSchema {
    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, FeatureKind::Continuous)
    }

    /// Level labels of a discrete feature. Binary features use `"0"` / `"1"`.
    pub fn levels(&self) -> Option<Vec<String>> {
        match &self.kind {
            FeatureKind::Categorical { levels } => Some(levels.clone()),
            FeatureKind::Binary => Some(vec!["0".to_string(), "1".to_string()]),
            FeatureKind::Continuous => None,
        }
    }

    pub fn n_levels(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { levels } => Some(levels.len()),
            FeatureKind::Binary => Some(2),
            FeatureKind::Continuous => None,
        }
    }

    pub fn level_label(&self, code: f64) -> String {
        match &self.kind {
            FeatureKind::Categorical { levels } => levels
                .get(code as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{code}")),
            FeatureKind::Binary => format!("{}", code as u8),
            FeatureKind::Continuous => format!("{code}"),
        }
    }

    /// Term keys a model expands this feature into: the value itself, or one
    /// indicator per non-reference level.
    pub fn expand_terms(&self) -> Vec<String> {
        match &self.kind {
            FeatureKind::Categorical { levels } => levels
                .iter()
                .skip(1)
                .map(|l| format!("{}={}", self.name, l))
                .collect(),
            _ => vec![self.name.clone()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TermKind {
    Value,
    Indicator(usize),
}

/// A term key resolved against a schema list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Term {
    pub feature: usize,
    pub kind: TermKind,
}

impl Term {
    #[inline]
    pub fn eval(&self, value: f64) -> f64 {
        match self.kind {
            TermKind::Value => value,
            TermKind::Indicator(level) => {
                if value == level as f64 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Splits `name=level` keys. Plain names return `(name, None)`.
pub(crate) fn split_key(key: &str) -> (&str, Option<&str>) {
    match key.split_once('=') {
        Some((name, level)) => (name, Some(level)),
        None => (key, None),
    }
}

pub(crate) fn parse_term(schemas: &[FeatureSchema], key: &str) -> Result<Term, String> {
    let (name, level) = split_key(key);
    let feature = schemas
        .iter()
        .position(|s| s.name == name)
        .ok_or_else(|| format!("unknown feature '{name}' in term '{key}'"))?;
    let schema = &schemas[feature];
    match (&schema.kind, level) {
        (FeatureKind::Categorical { levels }, Some(level)) => {
            let idx = levels
                .iter()
                .position(|l| l == level)
                .ok_or_else(|| format!("unknown level '{level}' of feature '{name}'"))?;
            Ok(Term { feature, kind: TermKind::Indicator(idx) })
        }
        (FeatureKind::Categorical { .. }, None) => Err(format!(
            "categorical feature '{name}' must be referenced as '{name}=<level>'"
        )),
        (_, Some(_)) => Err(format!("feature '{name}' is not categorical; use '{name}'")),
        (_, None) => Ok(Term { feature, kind: TermKind::Value }),
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `intercept + Σ coefficient · term`, summed in the order of `terms`.
///
/// Both the true outcome model and fitted models evaluate through this type
/// with terms in sorted key order, so a fitted model holding the true
/// coefficients reproduces the true probabilities bit for bit.
#[derive(Debug, Clone)]
pub(crate) struct LinearPredictor {
    pub intercept: f64,
    pub terms: Vec<(Term, f64)>,
}

impl LinearPredictor {
    pub fn compile(
        schemas: &[FeatureSchema],
        intercept: f64,
        coefficients: &BTreeMap<String, f64>,
    ) -> Result<Self, String> {
        let terms = coefficients
            .iter()
            .map(|(k, &c)| parse_term(schemas, k).map(|t| (t, c)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { intercept, terms })
    }

    #[inline]
    pub fn eval(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut z = self.intercept;
        for (term, c) in &self.terms {
            z += c * term.eval(value(term.feature));
        }
        z
    }

    #[inline]
    pub fn probability(&self, value: impl Fn(usize) -> f64) -> f64 {
        logistic(self.eval(value))
    }
}

/// Source of feature values for a single individual.
///
/// Categorical values are level indices, binary values 0/1.
pub trait FeatureLookup {
    fn value(&self, feature: &str) -> Option<f64>;
}

impl FeatureLookup for BTreeMap<String, f64> {
    fn value(&self, feature: &str) -> Option<f64> {
        self.get(feature).copied()
    }
}

impl FeatureLookup for HashMap<String, f64> {
    fn value(&self, feature: &str) -> Option<f64> {
        self.get(feature).copied()
    }
}

impl FeatureLookup for [(&str, f64)] {
    fn value(&self, feature: &str) -> Option<f64> {
        self.iter().find(|(k, _)| *k == feature).map(|(_, v)| *v)
    }
}

impl<const N: usize> FeatureLookup for [(&str, f64); N] {
    fn value(&self, feature: &str) -> Option<f64> {
        self.as_slice().value(feature)
    }
}

/// Gathers the values of `schemas` from a lookup, failing on the first gap.
pub(crate) fn gather(schemas: &[FeatureSchema], x: &(impl FeatureLookup + ?Sized)) -> Result<Vec<f64>, String> {
    schemas
        .iter()
        .map(|s| x.value(&s.name).ok_or_else(|| format!("missing value for feature '{}'", s.name)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schemas() -> Vec<FeatureSchema> {
        vec![
            FeatureSchema { name: "income".into(), kind: FeatureKind::Continuous },
            FeatureSchema {
                name: "lang".into(),
                kind: FeatureKind::Categorical { levels: vec!["fi".into(), "sv".into(), "other".into()] },
            },
            FeatureSchema { name: "employed".into(), kind: FeatureKind::Binary },
        ]
    }

    #[test]
    fn term_resolution() {
        let s = schemas();
        assert_eq!(parse_term(&s, "income").unwrap(), Term { feature: 0, kind: TermKind::Value });
        assert_eq!(parse_term(&s, "lang=other").unwrap(), Term { feature: 1, kind: TermKind::Indicator(2) });
        assert!(parse_term(&s, "lang").is_err());
        assert!(parse_term(&s, "lang=de").is_err());
        assert!(parse_term(&s, "income=1").is_err());
        assert!(parse_term(&s, "age").is_err());
    }

    #[test]
    fn categorical_expansion_drops_reference_level() {
        assert_eq!(schemas()[1].expand_terms(), vec!["lang=sv", "lang=other"]);
        assert_eq!(schemas()[2].expand_terms(), vec!["employed"]);
    }

    #[test]
    fn predictor_sums_terms() {
        let s = schemas();
        let coefs: BTreeMap<String, f64> =
            [("income".to_string(), 2.0), ("lang=sv".to_string(), -1.0)].into_iter().collect();
        let lp = LinearPredictor::compile(&s, 0.5, &coefs).unwrap();
        let row = [1.5, 1.0, 0.0];
        assert_eq!(lp.eval(|i| row[i]), 0.5 + 3.0 - 1.0);
        let row = [1.5, 2.0, 0.0];
        assert_eq!(lp.eval(|i| row[i]), 3.5);
    }
}
