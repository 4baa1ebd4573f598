//! Tabular MDPs, policies and exact solvers.
//!
//! Everything here is a pure function of its inputs. Policy evaluation is a
//! direct LU solve of `(I - γ P^π) V = R^π`; optimal control is value
//! iteration followed by a policy-iteration polish so returned values are
//! exact up to the linear solve.

mod geometry;
mod solve;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use geometry::{line_segment_residual, monotone_ordered, sample_policy_values, segment_distance};
pub use solve::{
    evaluate_rows, policy_evaluation, q_values, q_values_from, softmax_optimal_policy, value_iteration, ChoiceMdp,
    ChoiceSolution, Mode,
};

/// Tolerance for a distribution to count as normalized.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    /// `rewards[s][a]`
    pub rewards: Vec<Vec<f64>>,
    /// `transitions[s][a][s']`
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Optional state embeddings used to derive neighborhoods.
    pub features: Option<Vec<Vec<f64>>>,
    pub labels: Option<Vec<String>>,
    pub start_state: Option<usize>,
}

/// A single broken invariant of a [`FiniteMdp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    EmptySpace { what: String },
    GammaOutOfRange { gamma: f64 },
    RewardShape { state: Option<usize>, expected: usize, found: usize },
    NonFiniteReward { state: usize, action: usize },
    TransitionCount { expected: usize, found: usize },
    TransitionShape { state: usize, action: Option<usize>, expected: usize, found: usize },
    NegativeProbability { state: usize, action: usize, next: usize, value: f64 },
    RowSum { state: usize, action: usize, sum: f64 },
    FeatureShape { state: Option<usize>, expected: usize, found: usize },
    LabelCount { expected: usize, found: usize },
    StartState { start: usize, num_states: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySpace { what } => write!(f, "{what} must be positive"),
            Violation::GammaOutOfRange { gamma } => write!(f, "gamma out of range [0, 1): {gamma}"),
            Violation::RewardShape { state: None, expected, found } => {
                write!(f, "rewards: expected {expected} rows, found {found}")
            }
            Violation::RewardShape { state: Some(s), expected, found } => {
                write!(f, "rewards[{s}]: expected {expected} entries, found {found}")
            }
            Violation::NonFiniteReward { state, action } => {
                write!(f, "rewards[{state}][{action}] is not finite")
            }
            Violation::TransitionCount { expected, found } => {
                write!(f, "transitions: expected {expected} rows, found {found}")
            }
            Violation::TransitionShape { state, action: None, expected, found } => {
                write!(f, "transitions[{state}]: expected {expected} actions, found {found}")
            }
            Violation::TransitionShape { state, action: Some(a), expected, found } => {
                write!(f, "transitions[{state}][{a}]: expected {expected} entries, found {found}")
            }
            Violation::NegativeProbability { state, action, next, value } => {
                write!(f, "transitions[{state}][{action}][{next}] = {value} is negative or not finite")
            }
            Violation::RowSum { state, action, sum } => {
                write!(f, "transitions[{state}][{action}] sums to {sum}, not 1")
            }
            Violation::FeatureShape { state: None, expected, found } => {
                write!(f, "features: expected {expected} rows, found {found}")
            }
            Violation::FeatureShape { state: Some(s), expected, found } => {
                write!(f, "features[{s}]: expected {expected} coordinates, found {found}")
            }
            Violation::LabelCount { expected, found } => {
                write!(f, "labels: expected {expected} entries, found {found}")
            }
            Violation::StartState { start, num_states } => {
                write!(f, "start_state {start} out of range for {num_states} states")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of `mdp` and reports all violations.
pub fn validate_mdp(mdp: &FiniteMdp) -> ValidationReport {
    let mut violations = Vec::new();
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    if ns == 0 {
        violations.push(Violation::EmptySpace { what: "num_states".into() });
    }
    if na == 0 {
        violations.push(Violation::EmptySpace { what: "num_actions".into() });
    }
    if !(mdp.gamma >= 0.0 && mdp.gamma < 1.0) {
        violations.push(Violation::GammaOutOfRange { gamma: mdp.gamma });
    }

    if mdp.rewards.len() != ns {
        violations.push(Violation::RewardShape { state: None, expected: ns, found: mdp.rewards.len() });
    }
    for (s, row) in mdp.rewards.iter().enumerate() {
        if row.len() != na {
            violations.push(Violation::RewardShape { state: Some(s), expected: na, found: row.len() });
            continue;
        }
        for (a, r) in row.iter().enumerate() {
            if !r.is_finite() {
                violations.push(Violation::NonFiniteReward { state: s, action: a });
            }
        }
    }

    if mdp.transitions.len() != ns {
        violations.push(Violation::TransitionCount { expected: ns, found: mdp.transitions.len() });
    }
    for (s, per_action) in mdp.transitions.iter().enumerate() {
        if per_action.len() != na {
            violations.push(Violation::TransitionShape {
                state: s,
                action: None,
                expected: na,
                found: per_action.len(),
            });
            continue;
        }
        for (a, row) in per_action.iter().enumerate() {
            if row.len() != ns {
                violations.push(Violation::TransitionShape {
                    state: s,
                    action: Some(a),
                    expected: ns,
                    found: row.len(),
                });
                continue;
            }
            for (next, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    violations.push(Violation::NegativeProbability { state: s, action: a, next, value: p });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                violations.push(Violation::RowSum { state: s, action: a, sum });
            }
        }
    }

    if let Some(features) = &mdp.features {
        if features.len() != ns {
            violations.push(Violation::FeatureShape { state: None, expected: ns, found: features.len() });
        } else if let Some(first) = features.first() {
            let d = first.len();
            for (s, f) in features.iter().enumerate() {
                if f.len() != d {
                    violations.push(Violation::FeatureShape { state: Some(s), expected: d, found: f.len() });
                }
            }
        }
    }
    if let Some(labels) = &mdp.labels {
        if labels.len() != ns {
            violations.push(Violation::LabelCount { expected: ns, found: labels.len() });
        }
    }
    if let Some(start) = mdp.start_state {
        if start >= ns {
            violations.push(Violation::StartState { start, num_states: ns });
        }
    }
    ValidationReport { violations }
}

impl FiniteMdp {
    /// Builds and validates an MDP without features, labels or start state.
    pub fn new(gamma: f64, rewards: Vec<Vec<f64>>, transitions: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_states = rewards.len();
        let num_actions = rewards.first().map_or(0, Vec::len);
        let mdp = FiniteMdp {
            num_states,
            num_actions,
            gamma,
            rewards,
            transitions,
            features: None,
            labels: None,
            start_state: None,
        };
        mdp.validated()
    }

    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        self.features = Some(features);
        self.validated()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.labels = Some(labels);
        self.validated()
    }

    pub fn with_start_state(mut self, start: usize) -> Result<Self> {
        self.start_state = Some(start);
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let report = validate_mdp(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// Largest absolute reward, the scale of the `max|R| / (1 - γ)` value bound.
    pub fn reward_bound(&self) -> f64 {
        self.rewards.iter().flatten().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    pub fn value_bound(&self) -> f64 {
        self.reward_bound() / (1.0 - self.gamma)
    }

    /// Expected one-step reward of playing the action distribution `row` at `s`.
    pub fn mixed_reward(&self, s: usize, row: &[f64]) -> f64 {
        row.iter().zip(&self.rewards[s]).map(|(p, r)| p * r).sum()
    }

    /// Next-state distribution of playing the action distribution `row` at `s`.
    pub fn mixed_transition(&self, s: usize, row: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.num_states];
        for (a, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (n, &q) in next.iter_mut().zip(&self.transitions[s][a]) {
                *n += p * q;
            }
        }
        next
    }

    pub fn label(&self, s: usize) -> String {
        self.labels.as_ref().and_then(|l| l.get(s).cloned()).unwrap_or_else(|| format!("s{s}"))
    }
}

/// A stationary stochastic policy stored as a row-stochastic `S x A` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    probs: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let width = probs.first().map_or(0, Vec::len);
        if probs.is_empty() || width == 0 {
            return Err(Error::InvalidPolicy("policy table is empty".into()));
        }
        for (s, row) in probs.iter().enumerate() {
            check_distribution(row).map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
            if row.len() != width {
                return Err(Error::InvalidPolicy(format!("row {s} has {} entries, expected {width}", row.len())));
            }
        }
        Ok(Policy { probs })
    }

    /// One-hot policy playing `actions[s]` at each state.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let probs = actions
            .iter()
            .map(|&a| {
                if a >= num_actions {
                    return Err(Error::InvalidPolicy(format!("action {a} out of range")));
                }
                Ok(one_hot(a, num_actions))
            })
            .collect::<Result<Vec<_>>>()?;
        Policy::new(probs)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy { probs: vec![vec![1.0 / num_actions as f64; num_actions]; num_states] }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.probs
    }

    /// Greedy action at `s`, lowest index on ties.
    pub fn argmax_action(&self, s: usize) -> usize {
        argmax(&self.probs[s])
    }

    /// The deterministic view `π_D(s) = argmax_a π(a|s)`.
    pub fn deterministic_view(&self) -> Policy {
        let n = self.num_actions();
        Policy { probs: (0..self.num_states()).map(|s| one_hot(self.argmax_action(s), n)).collect() }
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|row| row.iter().all(|&p| p == 0.0 || p == 1.0))
    }

    /// Replaces row `s`, validating the new distribution.
    pub fn with_row(mut self, s: usize, row: Vec<f64>) -> Result<Self> {
        if row.len() != self.num_actions() {
            return Err(Error::DimensionMismatch(format!("row has {} entries", row.len())));
        }
        check_distribution(&row).map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        self.probs[s] = row;
        Ok(self)
    }

    pub(crate) fn check_against(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.num_states() != mdp.num_states || self.num_actions() != mdp.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.num_states(),
                self.num_actions(),
                mdp.num_states,
                mdp.num_actions
            )));
        }
        Ok(())
    }
}

/// Value of a policy at every state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self ⪯ other + tol` element-wise.
    pub fn dominated_by(&self, other: &ValueVector, tol: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + tol)
    }

    pub fn max_abs_diff(&self, other: &ValueVector) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl std::ops::Index<usize> for ValueVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if let Some((i, p)) = row.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite()) {
        return Err(format!("entry {i} = {p} is negative or not finite"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

pub fn one_hot(a: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = 1.0;
    v
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}
