//! Parity and disparity statistics.
//!
//! Every group comparison here is one computation, [`stratified_gap`]: for
//! each stratum `s` of legitimate features and each protected group `g`,
//! `d_g(s) = mean(v | s, g) − mean(v | s)`, where the stratum mean pools all
//! groups. A group's aggregate gap is `Σ_s w_s · |d_g(s)|` with `w_s` the
//! stratum's share of all rows. Strata where a group is absent are skipped
//! and the covered weight is reported.
//!
//! Applied to predictions this is (conditional) statistical parity; applied
//! to estimation errors `ε = π̂ − π` it is the conditional estimation
//! disparity ω; applied to target mismatch `γ` it is the group γ-disparity.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::design::FeatureKind;
use crate::dgp::{self, DgpSpec};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Group membership of each row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Groups {
    labels: Vec<String>,
    index: Vec<usize>,
}

impl Groups {
    pub fn new(labels: Vec<String>, index: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = index.iter().find(|&&g| g >= labels.len()) {
            return Err(Error::Input(format!("group index {bad} out of range ({} groups)", labels.len())));
        }
        Ok(Self { labels, index })
    }

    /// Groups given by the levels of a categorical or binary column.
    pub fn from_dataset(data: &Dataset, feature: &str) -> Result<Self> {
        let col = data
            .column(feature)
            .ok_or_else(|| Error::Input(format!("unknown group feature '{feature}'")))?;
        let labels = col
            .schema
            .levels()
            .ok_or_else(|| Error::Input(format!("group feature '{feature}' must be categorical or binary")))?;
        Self::new(labels, col.values.iter().map(|&v| v as usize).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index(&self) -> &[usize] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }
}

/// Assignment of rows to strata of legitimate features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strata {
    pub features: Vec<String>,
    pub bins: usize,
    /// Quantile bin edges of each continuous feature.
    pub edges: BTreeMap<String, Vec<f64>>,
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    #[serde(skip)]
    pub assignment: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Strata {
    /// Every row in one stratum.
    pub fn single(n: usize) -> Self {
        Self {
            features: Vec::new(),
            bins: 1,
            edges: BTreeMap::new(),
            labels: if n > 0 { vec!["all".into()] } else { Vec::new() },
            counts: if n > 0 { vec![n] } else { Vec::new() },
            assignment: vec![0; n],
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.assignment.len()
    }
}

/// Stratifies rows on `features`.
///
/// Continuous features are cut at their empirical `j/k` quantiles
/// (`j = 1..k`); categorical and binary features use their levels. Strata
/// are the level combinations actually observed, numbered in sorted order.
/// With `k = 1` everything collapses to a single stratum.
pub fn build_strata(data: &Dataset, features: &[String], k: usize) -> Result<Strata> {
    if k == 0 {
        return Err(Error::Input("bins per feature must be ≥ 1".into()));
    }
    let n = data.n();
    let mut columns = Vec::with_capacity(features.len());
    for f in features {
        columns.push(data.column(f).ok_or_else(|| Error::Input(format!("unknown strata feature '{f}'")))?);
    }
    if k == 1 || features.is_empty() {
        let mut s = Strata::single(n);
        s.features = features.to_vec();
        s.bins = k;
        return Ok(s);
    }

    let mut edges = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut codes: Vec<Vec<usize>> = vec![Vec::with_capacity(features.len()); n];
    let mut describe: Vec<Box<dyn Fn(usize) -> String + '_>> = Vec::new();
    for col in &columns {
        let name = col.schema.name.clone();
        match &col.schema.kind {
            FeatureKind::Continuous => {
                let mut sorted = col.values.clone();
                sorted.sort_by(f64::total_cmp);
                let mut e: Vec<f64> = Vec::new();
                if n > 0 && sorted[0] < sorted[n - 1] {
                    for j in 1..k {
                        let q = sorted[(j * n) / k];
                        if q > sorted[0] && e.last().is_none_or(|&last| q > last) {
                            e.push(q);
                        }
                    }
                } else if n > 0 {
                    warnings.push(format!("feature '{name}' is constant; collapsed to a single bin"));
                }
                for (row, v) in col.values.iter().enumerate() {
                    codes[row].push(e.partition_point(|edge| edge <= v));
                }
                let nb = e.len() + 1;
                describe.push(Box::new(move |b| format!("{name}[{}/{nb}]", b + 1)));
                edges.insert(col.schema.name.clone(), e);
            }
            _ => {
                for (row, v) in col.values.iter().enumerate() {
                    codes[row].push(*v as usize);
                }
                let schema = col.schema.clone();
                describe.push(Box::new(move |b| format!("{}={}", schema.name, schema.level_label(b as f64))));
            }
        }
    }

    let mut ids: BTreeMap<&[usize], usize> = BTreeMap::new();
    for c in &codes {
        ids.entry(c.as_slice()).or_insert(0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let labels = ids
        .keys()
        .map(|key| key.iter().enumerate().map(|(j, &b)| describe[j](b)).collect::<Vec<_>>().join(" & "))
        .collect();
    let assignment: Vec<usize> = codes.iter().map(|c| ids[c.as_slice()]).collect();
    let mut counts = vec![0; ids.len()];
    for &s in &assignment {
        counts[s] += 1;
    }
    Ok(Strata { features: features.to_vec(), bins: k, edges, labels, counts, assignment, warnings })
}

/// Percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn excludes_zero(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }

    /// Stretches the interval to cover `point`. Percentile intervals of a
    /// skewed statistic can sit entirely on one side of its estimate.
    pub fn covering(mut self, point: f64) -> Self {
        self.lower = self.lower.min(point);
        self.upper = self.upper.max(point);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    fn check(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Input("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Input(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted values.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn percentile_interval(mut values: Vec<f64>, level: f64) -> Option<Interval> {
    values.retain(|v| !v.is_nan());
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some(Interval {
        level,
        lower: quantile_sorted(&values, alpha),
        upper: quantile_sorted(&values, 1.0 - alpha),
        replicates: values.len(),
    })
}

/// Evaluates `statistic` on `replicates` row resamples of `0..n`.
///
/// Replicate `r` draws its rows from its own stream, so the output does not
/// depend on the number of threads.
fn replicate<F>(n: usize, config: &BootstrapConfig, statistic: F) -> Vec<Vec<f64>>
where
    F: Fn(&[usize]) -> Vec<f64> + Sync,
{
    (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, Purpose::Bootstrap, r as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            statistic(&rows)
        })
        .collect()
}

/// Nonparametric percentile interval of a scalar statistic of the rows
/// `0..n`. The statistic receives the resampled row indices.
pub fn bootstrap_ci<F>(n: usize, statistic: F, config: &BootstrapConfig) -> Result<Interval>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    config.check()?;
    if n == 0 {
        return Err(Error::Input("cannot bootstrap an empty sample".into()));
    }
    let values: Vec<f64> = replicate(n, config, |rows| vec![statistic(rows)]).into_iter().map(|v| v[0]).collect();
    percentile_interval(values, config.level)
        .ok_or_else(|| Error::Input("statistic undefined on every replicate".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupGap {
    pub group: String,
    pub n: usize,
    pub mean: Option<f64>,
    /// `Σ_s w_s · |d_g(s)|`.
    pub gap: f64,
    /// `Σ_s w_s · d_g(s)`; negative when the group sits below its strata.
    pub signed_gap: f64,
    pub max_stratum_gap: f64,
    /// Share of rows in strata where the group is present.
    pub coverage: f64,
    /// Bootstrap interval for `signed_gap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumDetail {
    pub stratum: String,
    pub n: usize,
    pub mean: f64,
    pub group_n: Vec<usize>,
    pub group_means: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedGap {
    pub n: usize,
    pub overall_mean: Option<f64>,
    pub groups: Vec<GroupGap>,
    pub strata: Vec<StratumDetail>,
    pub warnings: Vec<String>,
}

impl StratifiedGap {
    pub fn group(&self, label: &str) -> Option<&GroupGap> {
        self.groups.iter().find(|g| g.group == label)
    }

    /// Largest aggregate gap over groups with members.
    pub fn max_gap(&self) -> f64 {
        self.groups.iter().filter(|g| g.n > 0).map(|g| g.gap).fold(0.0, f64::max)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.gap).collect()
    }
}

struct Cells {
    n_groups: usize,
    sum: Vec<f64>,
    count: Vec<usize>,
    stratum_sum: Vec<f64>,
    stratum_count: Vec<usize>,
    /// First value seen in each stratum; sums are taken relative to it.
    shift: Vec<f64>,
    total: usize,
}

fn accumulate(values: &[f64], groups: &Groups, strata: &Strata, rows: impl Iterator<Item = usize>) -> Cells {
    let (s_n, g_n) = (strata.len(), groups.n_groups());
    let mut c = Cells {
        n_groups: g_n,
        sum: vec![0.0; s_n * g_n],
        count: vec![0; s_n * g_n],
        stratum_sum: vec![0.0; s_n],
        stratum_count: vec![0; s_n],
        shift: vec![0.0; s_n],
        total: 0,
    };
    for i in rows {
        let s = strata.assignment[i];
        let cell = s * g_n + groups.index[i];
        if c.stratum_count[s] == 0 {
            c.shift[s] = values[i];
        }
        let v = values[i] - c.shift[s];
        c.sum[cell] += v;
        c.count[cell] += 1;
        c.stratum_sum[s] += v;
        c.stratum_count[s] += 1;
        c.total += 1;
    }
    c
}

struct GapStats {
    gap: f64,
    signed: f64,
    max: f64,
    coverage: f64,
    skipped: usize,
}

fn gap_stats(c: &Cells, g: usize) -> GapStats {
    let mut out = GapStats { gap: 0.0, signed: 0.0, max: 0.0, coverage: 0.0, skipped: 0 };
    let total = c.total as f64;
    for s in 0..c.stratum_count.len() {
        if c.stratum_count[s] == 0 {
            continue;
        }
        let cell = s * c.n_groups + g;
        if c.count[cell] == 0 {
            out.skipped += 1;
            continue;
        }
        let w = c.stratum_count[s] as f64 / total;
        let d = c.sum[cell] / c.count[cell] as f64 - c.stratum_sum[s] / c.stratum_count[s] as f64;
        out.gap += w * d.abs();
        out.signed += w * d;
        out.max = out.max.max(d.abs());
        out.coverage += w;
    }
    out
}

fn check_lengths(values: &[f64], groups: &Groups, strata: &Strata) -> Result<()> {
    if values.len() != groups.len() || values.len() != strata.n_rows() {
        return Err(Error::Input(format!(
            "length mismatch: {} values, {} group labels, {} stratum assignments",
            values.len(),
            groups.len(),
            strata.n_rows()
        )));
    }
    Ok(())
}

/// Stratified group gaps of `values`. See the module docs for the formula.
pub fn stratified_gap(values: &[f64], groups: &Groups, strata: &Strata) -> Result<StratifiedGap> {
    check_lengths(values, groups, strata)?;
    let n = values.len();
    let cells = accumulate(values, groups, strata, 0..n);
    let mut warnings = Vec::new();
    let g_n = groups.n_groups();
    let mut out_groups = Vec::with_capacity(g_n);
    for g in 0..g_n {
        let label = groups.labels[g].clone();
        let group_n: usize = (0..strata.len()).map(|s| cells.count[s * g_n + g]).sum();
        if group_n == 0 {
            warnings.push(format!("group '{label}' has no rows; excluded"));
            out_groups.push(GroupGap {
                group: label,
                n: 0,
                mean: None,
                gap: 0.0,
                signed_gap: 0.0,
                max_stratum_gap: 0.0,
                coverage: 0.0,
                ci: None,
            });
            continue;
        }
        let group_sum: f64 = (0..strata.len())
            .map(|s| cells.sum[s * g_n + g] + cells.count[s * g_n + g] as f64 * cells.shift[s])
            .sum();
        let st = gap_stats(&cells, g);
        if st.skipped > 0 {
            warnings.push(format!(
                "group '{label}' absent from {} of {} strata (coverage {:.4})",
                st.skipped,
                strata.len(),
                st.coverage
            ));
        }
        out_groups.push(GroupGap {
            group: label,
            n: group_n,
            mean: Some(group_sum / group_n as f64),
            gap: st.gap,
            signed_gap: st.signed,
            max_stratum_gap: st.max,
            coverage: st.coverage,
            ci: None,
        });
    }
    let strata_detail = (0..strata.len())
        .map(|s| StratumDetail {
            stratum: strata.labels[s].clone(),
            n: cells.stratum_count[s],
            mean: cells.shift[s] + cells.stratum_sum[s] / cells.stratum_count[s] as f64,
            group_n: (0..g_n).map(|g| cells.count[s * g_n + g]).collect(),
            group_means: (0..g_n)
                .map(|g| {
                    let cell = s * g_n + g;
                    (cells.count[cell] > 0).then(|| cells.shift[s] + cells.sum[cell] / cells.count[cell] as f64)
                })
                .collect(),
        })
        .collect();
    let overall_mean = (n > 0).then(|| {
        (0..strata.len()).map(|s| cells.stratum_sum[s] + cells.stratum_count[s] as f64 * cells.shift[s]).sum::<f64>()
            / n as f64
    });
    Ok(StratifiedGap { n, overall_mean, groups: out_groups, strata: strata_detail, warnings })
}

/// `|mean(π̂ | g) − mean(π̂)|` per group.
pub fn statistical_parity_gap(pi_hat: &[f64], groups: &Groups) -> Result<StratifiedGap> {
    stratified_gap(pi_hat, groups, &Strata::single(pi_hat.len()))
}

/// Statistical parity within strata of legitimate features.
pub fn conditional_statistical_parity_gap(pi_hat: &[f64], groups: &Groups, strata: &Strata) -> Result<StratifiedGap> {
    stratified_gap(pi_hat, groups, strata)
}

/// Conditional estimation disparity ω per group, from estimation errors.
pub fn conditional_estimation_disparity(eps: &[f64], groups: &Groups, strata: &Strata) -> Result<StratifiedGap> {
    stratified_gap(eps, groups, strata)
}

/// A named stratified gap for one protected feature, with bootstrap
/// intervals on each group's signed gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub metric: String,
    pub group_feature: String,
    pub overall_gap: f64,
    #[serde(flatten)]
    pub detail: StratifiedGap,
}

impl ParityReport {
    pub fn group(&self, label: &str) -> Option<&GroupGap> {
        self.detail.group(label)
    }
}

pub fn parity_report(
    metric: &str,
    group_feature: &str,
    values: &[f64],
    groups: &Groups,
    strata: &Strata,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<ParityReport> {
    let mut detail = stratified_gap(values, groups, strata)?;
    if let Some(cfg) = bootstrap {
        cfg.check()?;
        let n = values.len();
        if n > 0 {
            let reps = replicate(n, cfg, |rows| {
                let cells = accumulate(values, groups, strata, rows.iter().copied());
                (0..groups.n_groups())
                    .map(|g| {
                        let st = gap_stats(&cells, g);
                        if st.coverage > 0.0 {
                            st.signed
                        } else {
                            f64::NAN
                        }
                    })
                    .collect()
            });
            for (g, gg) in detail.groups.iter_mut().enumerate() {
                if gg.n == 0 {
                    continue;
                }
                let column: Vec<f64> = reps.iter().map(|r| r[g]).collect();
                gg.ci = percentile_interval(column, cfg.level).map(|ci| ci.covering(gg.signed_gap));
            }
        }
    }
    Ok(ParityReport {
        metric: metric.to_string(),
        group_feature: group_feature.to_string(),
        overall_gap: detail.max_gap(),
        detail,
    })
}

/// `‖p(ỹ | x) − p(y | x)‖₂` for binary outcomes given `P(ỹ = 1)` and `P(y = 1)`.
pub fn gamma_from_probs(p_proxy: f64, p_true: f64) -> f64 {
    let d1 = p_proxy - p_true;
    let d0 = (1.0 - p_proxy) - (1.0 - p_true);
    (d0 * d0 + d1 * d1).sqrt()
}

/// Per-row target mismatch γ between the proxy label and the true outcome,
/// computed analytically from the spec's flip probabilities.
pub fn target_mismatch_gamma(spec: &DgpSpec, data: &Dataset) -> Result<Vec<f64>> {
    let proxy = spec
        .proxy
        .as_ref()
        .ok_or_else(|| Error::NotApplicable("the DGP declares no proxy label".into()))?;
    let col = data
        .column(&proxy.group_feature)
        .ok_or_else(|| Error::Input(format!("dataset lacks proxy group feature '{}'", proxy.group_feature)))?;
    let levels = col
        .schema
        .levels()
        .ok_or_else(|| Error::Input("proxy group feature must be discrete".into()))?;
    let pi = dgp::true_probs(spec, data)?;
    Ok(pi
        .iter()
        .zip(&col.values)
        .map(|(&p, &g)| gamma_from_probs(proxy.proxy_prob(p, &levels[g as usize]), p))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaDisparity {
    pub report: ParityReport,
    pub tolerance: f64,
    pub flagged: bool,
    pub flagged_groups: Vec<String>,
    pub message: String,
}

/// Group γ-disparity. A group is flagged when its gap exceeds `tolerance`
/// and the interval for its signed excess lies above zero.
pub fn gamma_group_disparity(
    gamma: &[f64],
    group_feature: &str,
    groups: &Groups,
    strata: &Strata,
    tolerance: f64,
    bootstrap: &BootstrapConfig,
) -> Result<GammaDisparity> {
    let report = parity_report("target_mismatch_gamma", group_feature, gamma, groups, strata, Some(bootstrap))?;
    let flagged_groups: Vec<String> = report
        .detail
        .groups
        .iter()
        .filter(|g| g.n > 0 && g.gap > tolerance && g.ci.is_some_and(|ci| ci.lower > 0.0))
        .map(|g| g.group.clone())
        .collect();
    let flagged = !flagged_groups.is_empty();
    let message = if flagged {
        format!(
            "use of proxy target may be discriminatory: target mismatch is higher for {} given legitimate features",
            flagged_groups.join(", ")
        )
    } else {
        "no group-level target mismatch beyond tolerance".to_string()
    };
    Ok(GammaDisparity { report, tolerance, flagged, flagged_groups, message })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;
    use crate::design::FeatureSchema;

    fn groups(index: &[usize]) -> Groups {
        Groups::new(vec!["A".into(), "B".into()], index.to_vec()).unwrap()
    }

    fn continuous_dataset(values: Vec<f64>) -> Dataset {
        let n = values.len();
        Dataset::new(
            vec![Column { schema: FeatureSchema { name: "x".into(), kind: FeatureKind::Continuous }, values }],
            vec![0; n],
            None,
            vec![0.5; n],
        )
        .unwrap()
    }

    #[test]
    fn single_bin_is_one_stratum() {
        let d = continuous_dataset((0..100).map(f64::from).collect());
        let s = build_strata(&d, &["x".into()], 1).unwrap();
        assert_eq!(s.counts, vec![100]);
    }

    #[test]
    fn quantile_bins_are_balanced() {
        // uniform grid standing in for a uniform continuous feature
        let n = 10_000;
        let d = continuous_dataset((0..n).map(|i| (i as f64 * 7919.0) % n as f64 / n as f64).collect());
        let s = build_strata(&d, &["x".into()], 5).unwrap();
        assert_eq!(s.len(), 5);
        for &c in &s.counts {
            assert!((c as f64 - n as f64 / 5.0).abs() <= 0.01 * n as f64);
        }
        assert!(s.edges["x"].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn constant_feature_collapses_with_warning() {
        let d = continuous_dataset(vec![3.0; 50]);
        let s = build_strata(&d, &["x".into()], 5).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn zero_bins_rejected() {
        let d = continuous_dataset(vec![1.0, 2.0]);
        assert!(build_strata(&d, &["x".into()], 0).is_err());
        assert!(build_strata(&d, &["nope".into()], 2).is_err());
    }

    #[test]
    fn constant_predictions_have_zero_gap() {
        let r = statistical_parity_gap(&[0.4; 6], &groups(&[0, 0, 1, 1, 1, 0])).unwrap();
        assert!(r.groups.iter().all(|g| g.gap == 0.0));
    }

    #[test]
    fn two_group_means() {
        let r = statistical_parity_gap(&[0.6, 0.6, 0.2, 0.2], &groups(&[0, 0, 1, 1])).unwrap();
        assert!((r.groups[0].gap - 0.2).abs() < 1e-15);
        assert!((r.groups[1].gap - 0.2).abs() < 1e-15);
        assert!((r.groups[1].signed_gap + 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_group_is_excluded_with_warning() {
        let g = Groups::new(vec!["A".into(), "B".into(), "C".into()], vec![0, 1]).unwrap();
        let r = statistical_parity_gap(&[0.1, 0.3], &g).unwrap();
        assert_eq!(r.groups[2].n, 0);
        assert!(r.warnings[0].contains("'C'"));
    }

    #[test]
    fn omega_single_stratum_arithmetic() {
        // group A mean ε 0.10, overall 0.05
        let eps = [0.10, 0.10, 0.0, 0.0];
        let r = conditional_estimation_disparity(&eps, &groups(&[0, 0, 1, 1]), &Strata::single(4)).unwrap();
        assert!((r.groups[0].gap - 0.05).abs() < 1e-15);
    }

    #[test]
    fn missing_cells_reduce_coverage() {
        let strata = Strata {
            features: vec!["s".into()],
            bins: 2,
            edges: BTreeMap::new(),
            labels: vec!["s0".into(), "s1".into()],
            counts: vec![2, 2],
            assignment: vec![0, 0, 1, 1],
            warnings: vec![],
        };
        let r = stratified_gap(&[1.0, 0.0, 0.5, 0.5], &groups(&[0, 1, 0, 0]), &strata).unwrap();
        assert_eq!(r.groups[1].coverage, 0.5);
        // stratum 0: B mean 0, pooled 0.5 → |d| = 0.5, weight 0.5
        assert!((r.groups[1].gap - 0.25).abs() < 1e-15);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn gamma_norm_arithmetic() {
        assert!((gamma_from_probs(0.7, 0.5) - 0.282_842_712_474_619).abs() < 1e-12);
        assert_eq!(gamma_from_probs(0.3, 0.3), 0.0);
    }

    #[test]
    fn bootstrap_edge_cases() {
        let cfg = BootstrapConfig { replicates: 50, level: 0.95, seed: 1 };
        let ci = bootstrap_ci(10, |_| 0.4, &cfg).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.4, 0.4));

        let data: Vec<f64> = (0..20).map(f64::from).collect();
        let mean = |rows: &[usize]| rows.iter().map(|&r| data[r]).sum::<f64>() / rows.len() as f64;
        let one = BootstrapConfig { replicates: 1, level: 0.9, seed: 4 };
        let ci = bootstrap_ci(20, mean, &one).unwrap();
        assert_eq!(ci.lower, ci.upper);
        assert_eq!(ci.replicates, 1);

        let zero = BootstrapConfig { replicates: 0, level: 0.9, seed: 4 };
        assert!(bootstrap_ci(20, mean, &zero).is_err());
        let bad_level = BootstrapConfig { replicates: 10, level: 1.0, seed: 4 };
        assert!(bootstrap_ci(20, mean, &bad_level).is_err());
    }

    #[test]
    fn bootstrap_is_thread_count_independent() {
        let data: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64).collect();
        let mean = |rows: &[usize]| rows.iter().map(|&r| data[r]).sum::<f64>() / rows.len() as f64;
        let cfg = BootstrapConfig { replicates: 200, level: 0.95, seed: 8 };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| bootstrap_ci(500, mean, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn report_intervals_cover_point() {
        let values: Vec<f64> = (0..400).map(|i| if i % 3 == 0 { 0.8 } else { 0.3 }).collect();
        let idx: Vec<usize> = (0..400).map(|i| usize::from(i % 2 == 0)).collect();
        let g = groups(&idx);
        let cfg = BootstrapConfig { replicates: 100, level: 0.95, seed: 2 };
        let r = parity_report("sp", "grp", &values, &g, &Strata::single(400), Some(&cfg)).unwrap();
        for gg in &r.detail.groups {
            let ci = gg.ci.unwrap();
            assert!(ci.lower <= gg.signed_gap && gg.signed_gap <= ci.upper);
        }
    }
}
