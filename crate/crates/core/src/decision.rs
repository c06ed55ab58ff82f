//! Decision policies mapping predicted risk to actions.
//!
//! `π̂ = p̂(y = 1 | x)` is read as the risk of the adverse outcome (e.g.
//! default). Action index 1 is the favourable action (e.g. credit granted).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Groups;

/// Index of the favourable action.
pub const FAVOURABLE: usize = 1;

/// `u(y, a)` for `y ∈ {0, 1}`; `values[y][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMatrix {
    pub actions: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl UtilityMatrix {
    pub fn new(actions: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let u = Self { actions, values };
        u.check()?;
        Ok(u)
    }

    pub fn check(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(Error::Input("utility matrix needs at least one action".into()));
        }
        if self.values.len() != 2 || self.values.iter().any(|row| row.len() != self.actions.len()) {
            return Err(Error::Input(format!(
                "utility matrix must have 2 outcome rows of {} actions",
                self.actions.len()
            )));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("utility matrix entries must be finite".into()));
        }
        Ok(())
    }

    pub fn get(&self, y: usize, a: usize) -> f64 {
        self.values[y][a]
    }

    /// `Σ_y u(y, a) · pmf(y)` for every action.
    pub fn expected(&self, pmf: [f64; 2]) -> Vec<f64> {
        (0..self.actions.len()).map(|a| self.values[0][a] * pmf[0] + self.values[1][a] * pmf[1]).collect()
    }

    /// Affine image `α · u + β`.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        Self {
            actions: self.actions.clone(),
            values: self.values.iter().map(|r| r.iter().map(|v| alpha * v + beta).collect()).collect(),
        }
    }
}

/// Favourable action iff `π̂ ≤ τ`.
pub fn decide_threshold(pi_hat: f64, tau: f64) -> usize {
    usize::from(pi_hat <= tau)
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = a;
        }
    }
    best
}

/// Expected-utility optimal action for `pmf = (P(y = 0), P(y = 1))`.
/// Ties go to the smallest action index.
pub fn decide_utility(pmf: [f64; 2], u: &UtilityMatrix) -> Result<usize> {
    u.check()?;
    if pmf.iter().any(|p| !(0.0..=1.0).contains(p)) || (pmf[0] + pmf[1] - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!("malformed pmf ({}, {})", pmf[0], pmf[1])));
    }
    Ok(argmax_first(&u.expected(pmf)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPolicy {
    Threshold(f64),
    Utility(UtilityMatrix),
}

impl DecisionPolicy {
    pub fn check(&self) -> Result<()> {
        match self {
            DecisionPolicy::Threshold(t) if !(0.0..=1.0).contains(t) => {
                Err(Error::Input(format!("threshold {t} outside [0, 1]")))
            }
            DecisionPolicy::Threshold(_) => Ok(()),
            DecisionPolicy::Utility(u) => {
                u.check()?;
                if u.actions.len() <= FAVOURABLE {
                    return Err(Error::Input("utility policy needs a favourable action at index 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Action for predicted risk `π̂`. Assumes a checked policy.
    pub fn decide(&self, pi_hat: f64) -> usize {
        match self {
            DecisionPolicy::Threshold(t) => decide_threshold(pi_hat, *t),
            DecisionPolicy::Utility(u) => argmax_first(&u.expected([1.0 - pi_hat, pi_hat])),
        }
    }

    /// The policy's utility. A threshold `τ` is the two-action matrix paying
    /// `τ − y` for the favourable action and 0 otherwise, whose expected-utility
    /// rule is exactly `π̂ ≤ τ`.
    pub fn utility_matrix(&self) -> UtilityMatrix {
        match self {
            DecisionPolicy::Threshold(t) => UtilityMatrix {
                actions: vec!["deny".into(), "grant".into()],
                values: vec![vec![0.0, *t], vec![0.0, t - 1.0]],
            },
            DecisionPolicy::Utility(u) => u.clone(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DecisionPolicy::Threshold(t) => format!("grant iff predicted risk ≤ {t}"),
            DecisionPolicy::Utility(u) => format!("expected-utility choice among [{}]", u.actions.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: String,
    pub n: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRates {
    pub overall: Option<f64>,
    pub groups: Vec<GroupRate>,
    pub warnings: Vec<String>,
}

/// Favourable-action rate per group and overall.
pub fn selection_rates(decisions: &[usize], groups: &Groups) -> Result<SelectionRates> {
    if decisions.len() != groups.len() {
        return Err(Error::Input(format!("{} decisions for {} group labels", decisions.len(), groups.len())));
    }
    let k = groups.n_groups();
    let mut favourable = vec![0usize; k];
    let mut count = vec![0usize; k];
    for (&d, &g) in decisions.iter().zip(groups.index()) {
        count[g] += 1;
        favourable[g] += usize::from(d == FAVOURABLE);
    }
    let mut warnings = Vec::new();
    let rates = groups
        .labels()
        .iter()
        .enumerate()
        .map(|(g, label)| {
            if count[g] == 0 {
                warnings.push(format!("group '{label}' is empty; rate undefined"));
            }
            GroupRate {
                group: label.clone(),
                n: count[g],
                rate: (count[g] > 0).then(|| favourable[g] as f64 / count[g] as f64),
            }
        })
        .collect();
    let total: usize = favourable.iter().sum();
    Ok(SelectionRates {
        overall: (!decisions.is_empty()).then(|| total as f64 / decisions.len() as f64),
        groups: rates,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> UtilityMatrix {
        UtilityMatrix::new(vec!["a0".into(), "a1".into()], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn threshold_indicator() {
        assert_eq!(decide_threshold(0.3, 0.5), 1);
        assert_eq!(decide_threshold(0.5, 0.5), 1);
        assert_eq!(decide_threshold(0.7, 0.5), 0);
    }

    #[test]
    fn utility_examples() {
        assert_eq!(decide_utility([0.9, 0.1], &identity()).unwrap(), 0);
        let zeros = UtilityMatrix::new(vec!["a".into(), "b".into(), "c".into()], vec![vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(decide_utility([0.5, 0.5], &zeros).unwrap(), 0);
        let lending =
            UtilityMatrix::new(vec!["deny".into(), "approve".into()], vec![vec![0.0, 1.0], vec![0.0, -3.0]]).unwrap();
        let eu = lending.expected([0.8, 0.2]);
        assert!((eu[1] - 0.2).abs() < 1e-15 && eu[0] == 0.0);
        assert_eq!(decide_utility([0.8, 0.2], &lending).unwrap(), 1);
    }

    #[test]
    fn malformed_pmf_rejected() {
        assert!(decide_utility([0.5, 0.6], &identity()).is_err());
        assert!(decide_utility([-0.1, 1.1], &identity()).is_err());
    }

    #[test]
    fn bad_policies_rejected() {
        assert!(DecisionPolicy::Threshold(1.2).check().is_err());
        let one = UtilityMatrix::new(vec!["deny".into()], vec![vec![0.0], vec![0.0]]).unwrap();
        assert!(DecisionPolicy::Utility(one).check().is_err());
        assert!(UtilityMatrix::new(vec!["a".into()], vec![vec![0.0]]).is_err());
        assert!(UtilityMatrix::new(vec!["a".into()], vec![vec![f64::NAN], vec![0.0]]).is_err());
    }

    #[test]
    fn threshold_utility_matches_threshold_rule() {
        for tau in [0.0, 0.2, 0.5, 0.93, 1.0] {
            let p = DecisionPolicy::Threshold(tau);
            let u = p.utility_matrix();
            for i in 0..=200 {
                let pi = i as f64 / 200.0;
                if (pi - tau).abs() < 1e-12 {
                    continue;
                }
                assert_eq!(decide_utility([1.0 - pi, pi], &u).unwrap(), decide_threshold(pi, tau), "τ={tau} π={pi}");
            }
        }
    }

    #[test]
    fn selection_rate_counts() {
        let g = Groups::new(vec!["A".into(), "B".into()], vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let r = selection_rates(&[1, 1, 0, 0, 1, 0, 0, 0], &g).unwrap();
        assert_eq!(r.groups[0].rate, Some(0.5));
        assert_eq!(r.groups[1].rate, Some(0.25));
        let all = selection_rates(&[1; 8], &g).unwrap();
        assert!(all.groups.iter().all(|g| g.rate == Some(1.0)));
        assert_eq!(all.overall, Some(1.0));
    }

    #[test]
    fn selection_rates_permutation_invariant() {
        let g = Groups::new(vec!["A".into(), "B".into()], vec![0, 1, 0, 1, 1]).unwrap();
        let d = [1, 0, 0, 1, 1];
        let perm = [4, 2, 0, 3, 1];
        let g2 = Groups::new(vec!["A".into(), "B".into()], perm.iter().map(|&i| g.index()[i]).collect()).unwrap();
        let d2: Vec<usize> = perm.iter().map(|&i| d[i]).collect();
        assert_eq!(selection_rates(&d, &g).unwrap(), selection_rates(&d2, &g2).unwrap());
    }

    #[test]
    fn empty_group_flagged() {
        let g = Groups::new(vec!["A".into(), "B".into()], vec![0, 0]).unwrap();
        let r = selection_rates(&[1, 0], &g).unwrap();
        assert_eq!(r.groups[1].rate, None);
        assert_eq!(r.warnings.len(), 1);
    }
}
