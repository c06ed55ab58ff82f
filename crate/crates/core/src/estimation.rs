//! Regularized logistic regression for `p̂(y = 1 | x)` and per-individual
//! estimation error against the true DGP.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::design::{gather, logistic, parse_term, FeatureLookup, FeatureSchema, LinearPredictor};
use crate::dgp::{self, DgpSpec};
use crate::error::{Error, Result};

/// Which label column a model is fitted to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    #[default]
    Y,
    YProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelSpec {
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub l2_strength: f64,
    #[serde(default)]
    pub target: FitTarget,
}

impl ModelSpec {
    pub fn new(features: &[&str]) -> Self {
        Self { feature_names: features.iter().map(|s| s.to_string()).collect(), l2_strength: 0.0, target: FitTarget::Y }
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2_strength = l2;
        self
    }

    pub fn with_target(mut self, target: FitTarget) -> Self {
        self.target = target;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the Euclidean norm of the gradient.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub objective: Option<f64>,
}

/// A logistic model `p̂(y = 1 | x) = logistic(intercept + Σ β · term)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FittedModel {
    pub features: Vec<FeatureSchema>,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub target: FitTarget,
    pub l2_strength: f64,
    pub convergence: Convergence,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FittedModel {
    /// A model with fixed coefficients. Terms of `features` without a
    /// coefficient get zero.
    pub fn from_coefficients(
        features: Vec<FeatureSchema>,
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
    ) -> Result<Self> {
        LinearPredictor::compile(&features, intercept, &coefficients).map_err(Error::Input)?;
        let mut all: BTreeMap<String, f64> = features.iter().flat_map(|f| f.expand_terms()).map(|t| (t, 0.0)).collect();
        all.extend(coefficients);
        Ok(Self {
            features,
            intercept,
            coefficients: all,
            target: FitTarget::Y,
            l2_strength: 0.0,
            convergence: Convergence { converged: true, iterations: 0, final_gradient_norm: 0.0, objective: None },
            warnings: Vec::new(),
        })
    }

    /// The true outcome model: inputs are the true features and the
    /// coefficients those of the DGP.
    pub fn oracle(spec: &DgpSpec) -> Result<Self> {
        spec.ensure_valid()?;
        let features = spec
            .features
            .iter()
            .filter(|f| spec.outcome.true_feature_names.contains(&f.name))
            .map(|f| f.schema())
            .collect();
        Self::from_coefficients(features, spec.outcome.intercept, spec.outcome.coefficients.clone())
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn uses(&self, feature: &str) -> bool {
        self.features.iter().any(|f| f.name == feature)
    }

    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.coefficients.get(term).copied()
    }

    /// Compiles the model against a dataset's columns.
    pub(crate) fn compile_for(&self, data: &Dataset) -> Result<LinearPredictor> {
        let schemas = data.schemas();
        for f in &self.features {
            match data.column(&f.name) {
                None => return Err(Error::Input(format!("dataset lacks model feature '{}'", f.name))),
                Some(c) if c.schema.kind != f.kind => {
                    return Err(Error::Input(format!("feature '{}' has a different type in the dataset", f.name)))
                }
                _ => {}
            }
        }
        LinearPredictor::compile(&schemas, self.intercept, &self.coefficients).map_err(Error::Input)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("invalid model file: {e}")))?;
        LinearPredictor::compile(&m.features, m.intercept, &m.coefficients).map_err(Error::Input)?;
        Ok(m)
    }
}

/// Regularized mean negative log-likelihood
/// `−(1/n) Σ [y log μ + (1 − y) log(1 − μ)] + (λ/2) Σ_{j≥1} β_j²`
/// over a design matrix whose first column is the intercept.
pub struct LogisticObjective {
    x: DMatrix<f64>,
    y: DVector<f64>,
    l2: f64,
}

const PROB_FLOOR: f64 = 1e-12;

impl LogisticObjective {
    /// `x` is row-major with `n` rows; an intercept column is prepended.
    pub fn new(x_rows: &[Vec<f64>], y: &[f64], l2: f64) -> Result<Self> {
        let n = x_rows.len();
        if n == 0 || y.len() != n {
            return Err(Error::Input("objective needs n ≥ 1 rows and matching labels".into()));
        }
        let p = x_rows[0].len() + 1;
        if x_rows.iter().any(|r| r.len() + 1 != p) {
            return Err(Error::Input("ragged design matrix".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x_rows[i][j - 1] });
        Ok(Self { x, y: DVector::from_column_slice(y), l2 })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn mu(&self, beta: &DVector<f64>) -> DVector<f64> {
        (&self.x * beta).map(logistic)
    }

    fn penalty_mask(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |j, _| if j == 0 { 0.0 } else { 1.0 })
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        self.value_at(&DVector::from_column_slice(beta))
    }

    fn value_at(&self, beta: &DVector<f64>) -> f64 {
        let mu = self.mu(beta);
        let n = self.y.len() as f64;
        let nll: f64 = mu
            .iter()
            .zip(self.y.iter())
            .map(|(&m, &y)| {
                let m = m.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -(y * m.ln() + (1.0 - y) * (1.0 - m).ln())
            })
            .sum();
        let pen: f64 = beta.iter().skip(1).map(|b| b * b).sum();
        nll / n + 0.5 * self.l2 * pen
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        self.gradient_at(&DVector::from_column_slice(beta)).as_slice().to_vec()
    }

    fn gradient_at(&self, beta: &DVector<f64>) -> DVector<f64> {
        let r = self.mu(beta) - &self.y;
        let n = self.y.len() as f64;
        self.x.tr_mul(&r) / n + beta.component_mul(&self.penalty_mask()) * self.l2
    }

    fn hessian_at(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let w = self.mu(beta).map(|m| m * (1.0 - m));
        let n = self.y.len() as f64;
        let xw = DMatrix::from_fn(self.x.nrows(), self.x.ncols(), |i, j| self.x[(i, j)] * w[i]);
        let mut h = self.x.tr_mul(&xw) / n;
        for j in 1..self.dim() {
            h[(j, j)] += self.l2;
        }
        h
    }
}

/// Objective values visited by the optimizer, starting at zero coefficients.
pub type ObjectiveTrace = Vec<f64>;

/// Damped Newton with Armijo backtracking; falls back to a gradient step
/// when the Hessian is not positive definite or yields a non-finite step.
fn minimize(obj: &LogisticObjective, opt: &OptimizerConfig) -> (DVector<f64>, Convergence, ObjectiveTrace) {
    let mut beta = DVector::zeros(obj.dim());
    let mut f = obj.value_at(&beta);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut g = obj.gradient_at(&beta);
    while iterations < opt.max_iterations && g.norm() > opt.tolerance {
        iterations += 1;
        let newton = obj
            .hessian_at(&beta)
            .cholesky()
            .map(|c| -c.solve(&g))
            .filter(|d| d.iter().all(|v| v.is_finite()));
        let mut accepted = None;
        for direction in newton.into_iter().chain(std::iter::once(-g.clone())) {
            let slope = g.dot(&direction);
            if slope >= 0.0 {
                continue;
            }
            let mut t = 1.0;
            while t > 1e-12 {
                let candidate = &beta + &direction * t;
                let fc = obj.value_at(&candidate);
                if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                    accepted = Some((candidate, fc));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((b, fc)) => {
                beta = b;
                f = fc;
                trace.push(f);
                g = obj.gradient_at(&beta);
            }
            None => break,
        }
    }
    let norm = g.norm();
    (beta, Convergence { converged: norm <= opt.tolerance, iterations, final_gradient_norm: norm, objective: Some(f) }, trace)
}

fn design_rows(data: &Dataset, schemas: &[FeatureSchema], terms: &[String]) -> Result<Vec<Vec<f64>>> {
    let resolved = terms
        .iter()
        .map(|t| parse_term(schemas, t))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Error::Input)?;
    Ok((0..data.n())
        .map(|i| resolved.iter().map(|t| t.eval(data.value(i, t.feature))).collect())
        .collect())
}

/// Fits `p̂(y | x)` by maximizing the L2-regularized Bernoulli likelihood.
pub fn fit(data: &Dataset, spec: &ModelSpec, opt: &OptimizerConfig) -> Result<FittedModel> {
    fit_traced(data, spec, opt).map(|(m, _)| m)
}

/// Like [`fit`], also returning the objective value after every accepted step.
pub fn fit_traced(data: &Dataset, spec: &ModelSpec, opt: &OptimizerConfig) -> Result<(FittedModel, ObjectiveTrace)> {
    if data.n() == 0 {
        return Err(Error::Input("cannot fit on an empty dataset".into()));
    }
    if spec.feature_names.is_empty() {
        return Err(Error::Input("model needs at least one feature".into()));
    }
    if !(spec.l2_strength.is_finite() && spec.l2_strength >= 0.0) {
        return Err(Error::Input("l2 strength must be finite and ≥ 0".into()));
    }
    let mut features = Vec::with_capacity(spec.feature_names.len());
    for name in &spec.feature_names {
        let col = data
            .column(name)
            .ok_or_else(|| Error::Input(format!("dataset lacks model feature '{name}'")))?;
        features.push(col.schema.clone());
    }
    let labels: Vec<f64> = match spec.target {
        FitTarget::Y => data.y().iter().map(|&v| f64::from(v)).collect(),
        FitTarget::YProxy => data
            .y_proxy()
            .ok_or_else(|| Error::Input("model targets y_proxy but the dataset has none".into()))?
            .iter()
            .map(|&v| f64::from(v))
            .collect(),
    };
    let terms: Vec<String> = features.iter().flat_map(|f| f.expand_terms()).collect();
    let rows = design_rows(data, &data.schemas(), &terms)?;
    let obj = LogisticObjective::new(&rows, &labels, spec.l2_strength)?;
    let (beta, convergence, trace) = minimize(&obj, opt);

    let mut warnings = Vec::new();
    let positives = labels.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == labels.len() {
        warnings.push("all training labels belong to one class; fit is intercept-driven".to_string());
    }
    if !convergence.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations with gradient norm {:.3e}",
            convergence.iterations, convergence.final_gradient_norm
        ));
    }
    let coefficients = terms.into_iter().zip(beta.iter().skip(1).copied()).collect();
    Ok((
        FittedModel {
            features,
            intercept: beta[0],
            coefficients,
            target: spec.target,
            l2_strength: spec.l2_strength,
            convergence,
            warnings,
        },
        trace,
    ))
}

/// `π̂ = p̂(y = 1 | x)` for one individual.
pub fn predict(model: &FittedModel, x: &(impl FeatureLookup + ?Sized)) -> Result<f64> {
    let values = gather(&model.features, x).map_err(Error::Input)?;
    let lp = LinearPredictor::compile(&model.features, model.intercept, &model.coefficients).map_err(Error::Input)?;
    Ok(lp.probability(|i| values[i]))
}

/// `π̂` for every row of a dataset.
pub fn predict_dataset(model: &FittedModel, data: &Dataset) -> Result<Vec<f64>> {
    let lp = model.compile_for(data)?;
    Ok((0..data.n()).into_par_iter().map(|i| lp.probability(|c| data.value(i, c))).collect())
}

/// `ε_i = π̂_i − π_i`, with `π_i` recomputed from the spec.
pub fn estimation_error(model: &FittedModel, spec: &DgpSpec, data: &Dataset) -> Result<Vec<f64>> {
    let pi_hat = predict_dataset(model, data)?;
    let pi = dgp::true_probs(spec, data)?;
    Ok(pi_hat.iter().zip(&pi).map(|(a, b)| a - b).collect())
}

/// Mean Bernoulli log-loss of predictions against labels.
pub fn log_loss(pi_hat: &[f64], labels: &[u8]) -> f64 {
    let n = pi_hat.len().max(1) as f64;
    pi_hat
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;
    use crate::design::FeatureKind;

    fn toy(xs: &[f64], ys: &[u8]) -> Dataset {
        let n = xs.len();
        Dataset::new(
            vec![Column { schema: FeatureSchema { name: "x".into(), kind: FeatureKind::Continuous }, values: xs.to_vec() }],
            ys.to_vec(),
            None,
            vec![0.5; n],
        )
        .unwrap()
    }

    #[test]
    fn heavy_ridge_shrinks_to_zero() {
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 - 100.0) / 10.0).collect();
        let ys: Vec<u8> = xs.iter().map(|&x| u8::from(x > 1.0)).collect();
        let m = fit(&toy(&xs, &ys), &ModelSpec::new(&["x"]).with_l2(1e6), &OptimizerConfig::default()).unwrap();
        assert!(m.coefficients["x"].abs() < 1e-3);
        assert!(m.convergence.converged);
    }

    #[test]
    fn one_class_labels_warn() {
        let m = fit(&toy(&[0.0, 1.0, 2.0], &[0, 0, 0]), &ModelSpec::new(&["x"]), &OptimizerConfig::default()).unwrap();
        assert!(m.warnings.iter().any(|w| w.contains("one class")));
        assert!(predict(&m, &[("x", 1.0)]).unwrap() < 0.01);
    }

    #[test]
    fn missing_inputs_are_errors() {
        let d = toy(&[0.0, 1.0], &[0, 1]);
        assert!(fit(&d, &ModelSpec::new(&["z"]), &OptimizerConfig::default()).is_err());
        assert!(fit(&d, &ModelSpec::new(&["x"]).with_target(FitTarget::YProxy), &OptimizerConfig::default()).is_err());
        let m = FittedModel::from_coefficients(d.schemas(), 0.0, BTreeMap::new()).unwrap();
        assert!(predict(&m, &[("w", 1.0)]).is_err());
    }

    #[test]
    fn zero_coefficients_predict_half() {
        let d = toy(&[0.0], &[0]);
        let m = FittedModel::from_coefficients(d.schemas(), 0.0, BTreeMap::new()).unwrap();
        assert_eq!(predict(&m, &[("x", 12.0)]).unwrap(), 0.5);
    }

    #[test]
    fn estimation_error_subtracts() {
        // π̂ = 0.8 against π = 0.5
        let d = toy(&[0.0], &[0]);
        let m = FittedModel::from_coefficients(d.schemas(), (0.8f64 / 0.2).ln(), BTreeMap::new()).unwrap();
        let pi_hat = predict_dataset(&m, &d).unwrap()[0];
        assert!((pi_hat - 0.5 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let d = toy(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]);
        let m = fit(&d, &ModelSpec::new(&["x"]).with_l2(0.1), &OptimizerConfig::default()).unwrap();
        assert_eq!(FittedModel::from_json(&m.to_json()).unwrap(), m);
    }

    /// Plain iteratively reweighted least squares for one feature plus
    /// intercept, objective `mean NLL + (λ/2)·b²`.
    fn irls_reference(xs: &[f64], ys: &[u8], l2: f64) -> (f64, f64) {
        let n = xs.len() as f64;
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&x, &y) in xs.iter().zip(ys) {
                let p = 1.0 / (1.0 + (-(a + b * x)).exp());
                let w = p * (1.0 - p);
                g0 += (p - f64::from(y)) / n;
                g1 += (p - f64::from(y)) * x / n;
                h00 += w / n;
                h01 += w * x / n;
                h11 += w * x * x / n;
            }
            g1 += l2 * b;
            h11 += l2;
            let det = h00 * h11 - h01 * h01;
            a -= (h11 * g0 - h01 * g1) / det;
            b -= (h00 * g1 - h01 * g0) / det;
        }
        (a, b)
    }

    #[test]
    fn separable_toy_matches_reference() {
        let xs = [-2.0, -1.0, 1.0, 2.0];
        let ys = [0, 0, 1, 1];
        let m = fit(&toy(&xs, &ys), &ModelSpec::new(&["x"]).with_l2(0.05), &OptimizerConfig::default()).unwrap();
        let (a, b) = irls_reference(&xs, &ys, 0.05);
        assert!(m.coefficients["x"] > 0.0);
        assert!((m.intercept - a).abs() < 1e-7 && (m.coefficients["x"] - b).abs() < 1e-7);
    }

    #[test]
    fn overlapping_data_matches_reference() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let ys: Vec<u8> = xs.iter().enumerate().map(|(i, &x)| u8::from(x + 2.5 * (i as f64 * 1.3).cos() > 0.4)).collect();
        let m = fit(&toy(&xs, &ys), &ModelSpec::new(&["x"]), &OptimizerConfig::default()).unwrap();
        let (a, b) = irls_reference(&xs, &ys, 0.0);
        assert!(m.convergence.converged);
        assert!((m.intercept - a).abs() < 1e-7 && (m.coefficients["x"] - b).abs() < 1e-7);
    }

    #[test]
    fn prediction_increases_with_positive_coefficient() {
        let d = toy(&[0.0], &[0]);
        let m = FittedModel::from_coefficients(d.schemas(), -0.3, BTreeMap::from([("x".to_string(), 0.7)])).unwrap();
        let ps: Vec<f64> = (-10..=10).map(|x| predict(&m, &[("x", x as f64 * 0.5)]).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn log_loss_of_perfect_and_coin() {
        assert!(log_loss(&[1.0, 0.0], &[1, 0]) < 1e-11);
        assert!((log_loss(&[0.5, 0.5], &[1, 0]) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
