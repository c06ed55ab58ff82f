use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use fairaudit::decision::{decide_threshold, decide_utility, selection_rates, DecisionPolicy, UtilityMatrix};
use fairaudit::design::{FeatureKind, FeatureSchema};
use fairaudit::dgp::{self, DgpSpec, Distribution};
use fairaudit::estimation::{self, FittedModel};
use fairaudit::legal_audit::{
    self, classify, Classification, DirectFinding, IndirectFinding, JustificationFinding, JustificationOutcome,
};
use fairaudit::metrics::{self, Groups, Strata};
use fairaudit::scenarios;
use proptest::prelude::*;

fn groups_and_values() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<usize>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..3, n),
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(0usize..4, n),
        )
    })
}

fn build(group_idx: &[usize], strata_idx: &[usize]) -> (Groups, Strata) {
    let groups = Groups::new(vec!["a".into(), "b".into(), "c".into()], group_idx.to_vec()).unwrap();
    let mut strata = Strata::single(strata_idx.len());
    let used: std::collections::BTreeSet<usize> = strata_idx.iter().copied().collect();
    let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    strata.labels = used.iter().map(|s| format!("s{s}")).collect();
    strata.counts = used.iter().map(|s| strata_idx.iter().filter(|&&x| x == *s).count()).collect();
    strata.assignment = strata_idx.iter().map(|s| remap[s]).collect();
    (groups, strata)
}

proptest! {
    #[test]
    fn gaps_are_bounded((g, v, s) in groups_and_values()) {
        let (groups, strata) = build(&g, &s);
        let r = metrics::stratified_gap(&v, &groups, &strata).unwrap();
        for gg in &r.groups {
            prop_assert!(gg.gap >= 0.0);
            prop_assert!(gg.gap + 1e-12 >= gg.signed_gap.abs());
            prop_assert!(gg.max_stratum_gap + 1e-12 >= gg.gap);
            prop_assert!(gg.coverage <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn constant_values_have_zero_gap((g, _v, s) in groups_and_values(), c in -3.0f64..3.0) {
        let (groups, strata) = build(&g, &s);
        let r = metrics::stratified_gap(&vec![c; g.len()], &groups, &strata).unwrap();
        prop_assert!(r.groups.iter().all(|gg| gg.gap == 0.0 && gg.signed_gap == 0.0));
    }

    #[test]
    fn gaps_are_permutation_invariant((g, v, s) in groups_and_values(), seed in any::<u64>()) {
        let n = g.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let (groups, strata) = build(&g, &s);
        let pg: Vec<usize> = perm.iter().map(|&i| g[i]).collect();
        let pv: Vec<f64> = perm.iter().map(|&i| v[i]).collect();
        let ps: Vec<usize> = perm.iter().map(|&i| s[i]).collect();
        let (pgroups, pstrata) = build(&pg, &ps);
        let a = metrics::stratified_gap(&v, &groups, &strata).unwrap();
        let b = metrics::stratified_gap(&pv, &pgroups, &pstrata).unwrap();
        for (x, y) in a.groups.iter().zip(&b.groups) {
            prop_assert!((x.gap - y.gap).abs() < 1e-9);
            prop_assert!((x.signed_gap - y.signed_gap).abs() < 1e-9);
        }
    }

    #[test]
    fn shifting_values_keeps_gaps((g, v, s) in groups_and_values(), c in -10.0f64..10.0) {
        let (groups, strata) = build(&g, &s);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = metrics::stratified_gap(&v, &groups, &strata).unwrap();
        let b = metrics::stratified_gap(&shifted, &groups, &strata).unwrap();
        for (x, y) in a.groups.iter().zip(&b.groups) {
            prop_assert!((x.gap - y.gap).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_is_monotone(p in 0.0f64..=1.0, q in 0.0f64..=1.0, tau in 0.0f64..=1.0) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(decide_threshold(lo, tau) >= decide_threshold(hi, tau));
    }

    #[test]
    fn utility_argmax_is_affine_invariant(
        p in 0.0f64..=1.0,
        values in prop::collection::vec(-5.0f64..5.0, 6),
        alpha in 0.01f64..50.0,
        beta in -50.0f64..50.0,
    ) {
        let u = UtilityMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![values[..3].to_vec(), values[3..].to_vec()],
        ).unwrap();
        prop_assert_eq!(
            decide_utility([1.0 - p, p], &u).unwrap(),
            decide_utility([1.0 - p, p], &u.affine(alpha, beta)).unwrap()
        );
    }

    #[test]
    fn selection_rates_lie_in_unit_interval(g in prop::collection::vec(0usize..3, 1..50), seed in any::<u64>()) {
        let decisions: Vec<usize> = g.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as usize).collect();
        let groups = Groups::new(vec!["a".into(), "b".into(), "c".into()], g).unwrap();
        let r = selection_rates(&decisions, &groups).unwrap();
        prop_assert!(r.groups.iter().filter_map(|x| x.rate).all(|x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn categorical_probabilities_must_sum_to_one(a in 0.01f64..0.9, b in 0.01f64..0.9) {
        let mut spec = scenarios::get("neutral").unwrap().dgp();
        spec.features[0].distribution = Distribution::Categorical {
            levels: vec!["female".into(), "male".into()],
            probabilities: vec![a, b],
        };
        let bad = (a + b - 1.0).abs() > 1e-12;
        let violations = dgp::validate(&spec);
        prop_assert_eq!(bad, violations.iter().any(|v| v.rule.contains("probabilities sum")));
    }

    #[test]
    fn direct_flag_is_never_downgraded(
        inconclusive in any::<bool>(),
        indirect in any::<bool>(),
        indirect_inconclusive in any::<bool>(),
        assessed in any::<bool>(),
        outcome in 0usize..5,
        failed in any::<bool>(),
    ) {
        let outcomes = [
            JustificationOutcome::NotReached,
            JustificationOutcome::NoDefence,
            JustificationOutcome::Justifiable,
            JustificationOutcome::NotJustifiable,
            JustificationOutcome::Inconclusive,
        ];
        let c = classify(
            &DirectFinding { flagged: true, inconclusive, ..Default::default() },
            &IndirectFinding { flagged: indirect, inconclusive: indirect_inconclusive, ..Default::default() },
            &JustificationFinding { assessed, outcome: outcomes[outcome], ..Default::default() },
            failed,
        );
        prop_assert_eq!(c, Classification::DirectDiscriminationRisk);
    }

    #[test]
    fn model_json_round_trips(intercept in -5.0f64..5.0, b in -5.0f64..5.0) {
        let schema = FeatureSchema { name: "x".into(), kind: FeatureKind::Continuous };
        let m = FittedModel::from_coefficients(vec![schema], intercept, BTreeMap::from([("x".to_string(), b)])).unwrap();
        prop_assert_eq!(FittedModel::from_json(&m.to_json()).unwrap(), m);
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let spec = scenarios::get("label_bias").unwrap().dgp();
    assert_eq!(dgp::sample(&spec, 500, 9).unwrap(), dgp::sample(&spec, 500, 9).unwrap());
    assert_ne!(dgp::sample(&spec, 500, 9).unwrap(), dgp::sample(&spec, 500, 10).unwrap());
}

#[test]
fn sampling_is_thread_count_independent() {
    let spec = scenarios::get("finnish_credit").unwrap().dgp();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| dgp::sample(&spec, 2_000, 4));
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| dgp::sample(&spec, 2_000, 4));
    assert_eq!(one.unwrap(), many.unwrap());
}

#[test]
fn flip_rate_is_zero_when_protected_feature_unused() {
    let spec = scenarios::get("neutral").unwrap().dgp();
    let data = dgp::sample(&spec, 1_000, 1).unwrap();
    let model = FittedModel::oracle(&spec).unwrap();
    let r = legal_audit::counterfactual_flip_rate(&model, &DecisionPolicy::Threshold(0.2), &data, "gender").unwrap();
    assert!(!r.in_model);
    assert_eq!(r.rate, 0.0);
}

#[test]
fn fit_recovers_truth_at_scale() {
    let spec = scenarios::get("neutral").unwrap().dgp();
    let data = dgp::sample(&spec, 100_000, 2).unwrap();
    let spec_model = fairaudit::ModelSpec::new(&["income", "debt"]);
    let m = estimation::fit(&data, &spec_model, &Default::default()).unwrap();
    assert!(m.convergence.converged);
    assert_abs_diff_eq!(m.intercept, spec.outcome.intercept, epsilon = 0.05);
    for (k, v) in &spec.outcome.coefficients {
        assert_abs_diff_eq!(m.coefficients[k], *v, epsilon = 0.05);
    }
}

#[test]
fn true_prob_matches_closed_form() {
    let spec: DgpSpec = scenarios::get("neutral").unwrap().dgp();
    let x = [("gender", 1.0), ("income", 0.5), ("debt", -1.0)];
    let z: f64 = -1.4 - 0.8 * 0.5 - 0.6;
    assert_abs_diff_eq!(dgp::true_prob(&spec, &x).unwrap(), 1.0 / (1.0 + (-z).exp()), epsilon = 1e-15);
}
