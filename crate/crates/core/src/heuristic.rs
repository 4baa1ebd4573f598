//! The four per-state heuristic attack objectives.
//!
//! Each attack scores every admissible choice at a state independently and
//! keeps the best one, so the result is the exact optimizer of the heuristic's
//! own objective. Ties go to the lowest neighbor index.

use serde::{Deserialize, Serialize};

use crate::adversary::ball::{maximize_on_boundary, minimize_linear_in_ball};
use crate::adversary::{NeighborhoodModel, PerturbedPolicy, PolicyBallModel, StateAdversary};
use crate::error::Result;
use crate::mdp::{argmax, argmin, q_values, value_iteration, FiniteMdp, Mode, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstTarget {
    CurrentPolicyQ,
    WorstPolicyQ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    #[default]
    Kl,
    Tv,
}

/// How MinBest picks the action it suppresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BestAction {
    #[default]
    QArgmax,
    PolicyArgmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeuristicKind {
    MinBest {
        #[serde(default)]
        best: BestAction,
    },
    MaxWorst {
        target: WorstTarget,
    },
    MinQ,
    MaxDiff {
        #[serde(default)]
        divergence: Divergence,
    },
}

impl HeuristicKind {
    pub const MIN_BEST: HeuristicKind = HeuristicKind::MinBest { best: BestAction::QArgmax };
    pub const MAX_WORST: HeuristicKind = HeuristicKind::MaxWorst { target: WorstTarget::CurrentPolicyQ };
    pub const MAX_DIFF: HeuristicKind = HeuristicKind::MaxDiff { divergence: Divergence::Kl };

    pub fn name(&self) -> &'static str {
        match self {
            HeuristicKind::MinBest { best: BestAction::QArgmax } => "minbest",
            HeuristicKind::MinBest { best: BestAction::PolicyArgmax } => "minbest_pi",
            HeuristicKind::MaxWorst { target: WorstTarget::CurrentPolicyQ } => "maxworst",
            HeuristicKind::MaxWorst { target: WorstTarget::WorstPolicyQ } => "maxworst_worst",
            HeuristicKind::MinQ => "minq",
            HeuristicKind::MaxDiff { divergence: Divergence::Kl } => "maxdiff",
            HeuristicKind::MaxDiff { divergence: Divergence::Tv } => "maxdiff_tv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::all().into_iter().find(|k| k.name() == name)
    }

    pub fn all() -> [HeuristicKind; 7] {
        [
            HeuristicKind::MIN_BEST,
            HeuristicKind::MinBest { best: BestAction::PolicyArgmax },
            HeuristicKind::MAX_WORST,
            HeuristicKind::MaxWorst { target: WorstTarget::WorstPolicyQ },
            HeuristicKind::MinQ,
            HeuristicKind::MAX_DIFF,
            HeuristicKind::MaxDiff { divergence: Divergence::Tv },
        ]
    }
}

/// `D(p ‖ q)`. KL is `+∞` when `p` has mass where `q` has none, and is never
/// reported as zero for distinct rows.
pub fn divergence(kind: Divergence, p: &[f64], q: &[f64]) -> f64 {
    if p == q {
        return 0.0;
    }
    let d = match kind {
        Divergence::Tv => 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        Divergence::Kl => {
            let mut total = 0.0;
            for (&a, &b) in p.iter().zip(q) {
                if a > 0.0 {
                    if b <= 0.0 {
                        return f64::INFINITY;
                    }
                    total += a * (a.ln() - b.ln());
                }
            }
            total
        }
    };
    d.max(f64::MIN_POSITIVE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
enum Score {
    /// `⟨c_s, row⟩` with one cost vector per state.
    Linear(Vec<Vec<f64>>),
    Divergence(Divergence, Vec<Vec<f64>>),
}

/// A heuristic's per-state objective, scored on candidate rows.
#[derive(Clone, Debug)]
pub struct StateObjective {
    sense: Sense,
    score: Score,
}

impl StateObjective {
    pub fn new(mdp: &FiniteMdp, pi: &Policy, kind: HeuristicKind) -> Result<Self> {
        let n = mdp.num_actions;
        let unit = |a: usize, sign: f64| {
            let mut c = vec![0.0; n];
            c[a] = sign;
            c
        };
        let obj = match kind {
            HeuristicKind::MinBest { best } => {
                let targets: Vec<usize> = match best {
                    BestAction::QArgmax => q_values(mdp, pi)?.iter().map(|q| argmax(q)).collect(),
                    BestAction::PolicyArgmax => (0..mdp.num_states).map(|s| pi.argmax_action(s)).collect(),
                };
                StateObjective {
                    sense: Sense::Minimize,
                    score: Score::Linear(targets.into_iter().map(|a| unit(a, 1.0)).collect()),
                }
            }
            HeuristicKind::MaxWorst { target } => {
                let q = match target {
                    WorstTarget::CurrentPolicyQ => q_values(mdp, pi)?,
                    WorstTarget::WorstPolicyQ => q_values(mdp, &value_iteration(mdp, Mode::Min)?.0)?,
                };
                StateObjective {
                    sense: Sense::Maximize,
                    score: Score::Linear(q.iter().map(|row| unit(argmin(row), 1.0)).collect()),
                }
            }
            HeuristicKind::MinQ => StateObjective { sense: Sense::Minimize, score: Score::Linear(q_values(mdp, pi)?) },
            HeuristicKind::MaxDiff { divergence } => {
                StateObjective { sense: Sense::Maximize, score: Score::Divergence(divergence, pi.rows().to_vec()) }
            }
        };
        Ok(obj)
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// The same objective with its direction reversed.
    pub fn flipped(mut self) -> Self {
        self.sense = match self.sense {
            Sense::Minimize => Sense::Maximize,
            Sense::Maximize => Sense::Minimize,
        };
        self
    }

    pub fn score(&self, s: usize, row: &[f64]) -> f64 {
        match &self.score {
            Score::Linear(c) => c[s].iter().zip(row).map(|(a, b)| a * b).sum(),
            Score::Divergence(kind, base) => divergence(*kind, row, &base[s]),
        }
    }

    /// Strictly better under the objective's sense.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.sense {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }

    /// Best neighbor of `s`, lowest index on ties.
    pub fn choose(&self, pi: &Policy, model: &NeighborhoodModel, s: usize) -> usize {
        let mut best = model.neighbors(s)[0];
        let mut best_score = self.score(s, pi.row(best));
        for &t in &model.neighbors(s)[1..] {
            let v = self.score(s, pi.row(t));
            if self.better(v, best_score) {
                best = t;
                best_score = v;
            }
        }
        best
    }

    pub fn adversary(&self, pi: &Policy, model: &NeighborhoodModel) -> StateAdversary {
        StateAdversary { map: (0..model.num_states()).map(|s| self.choose(pi, model, s)).collect() }
    }

    /// Neighbors of `s` whose score equals the best score within `tol`.
    pub fn solution_set(&self, pi: &Policy, model: &NeighborhoodModel, s: usize, tol: f64) -> Vec<usize> {
        let best = self.score(s, pi.row(self.choose(pi, model, s)));
        model
            .neighbors(s)
            .iter()
            .copied()
            .filter(|&t| {
                let v = self.score(s, pi.row(t));
                v == best || (v - best).abs() <= tol
            })
            .collect()
    }

    fn ball_row(&self, s: usize, p: &[f64], radius: f64) -> Vec<f64> {
        match (&self.score, self.sense) {
            (Score::Linear(c), Sense::Minimize) => minimize_linear_in_ball(p, &c[s], radius),
            (Score::Linear(c), Sense::Maximize) => {
                minimize_linear_in_ball(p, &c[s].iter().map(|x| -x).collect::<Vec<_>>(), radius)
            }
            (_, sense) => {
                let sign = if sense == Sense::Maximize { 1.0 } else { -1.0 };
                maximize_on_boundary(p, radius, &|x| sign * self.score(s, x))
            }
        }
    }
}

fn check_sizes(mdp: &FiniteMdp, pi: &Policy, num_states: usize) -> Result<()> {
    pi.check_against(mdp)?;
    if num_states != mdp.num_states {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "adversary model covers {num_states} states, MDP has {}",
            mdp.num_states
        )));
    }
    Ok(())
}

/// Runs `kind` over a neighborhood model.
pub fn heuristic_attack(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    kind: HeuristicKind,
) -> Result<StateAdversary> {
    check_sizes(mdp, pi, model.num_states())?;
    Ok(StateObjective::new(mdp, pi, kind)?.adversary(pi, model))
}

pub fn minbest_attack(mdp: &FiniteMdp, pi: &Policy, model: &NeighborhoodModel) -> Result<StateAdversary> {
    heuristic_attack(mdp, pi, model, HeuristicKind::MIN_BEST)
}

pub fn maxworst_attack(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    target: WorstTarget,
) -> Result<StateAdversary> {
    heuristic_attack(mdp, pi, model, HeuristicKind::MaxWorst { target })
}

pub fn minq_attack(mdp: &FiniteMdp, pi: &Policy, model: &NeighborhoodModel) -> Result<StateAdversary> {
    heuristic_attack(mdp, pi, model, HeuristicKind::MinQ)
}

pub fn maxdiff_attack(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    divergence: Divergence,
) -> Result<StateAdversary> {
    heuristic_attack(mdp, pi, model, HeuristicKind::MaxDiff { divergence })
}

/// Runs `kind` as a direct perturbation inside per-state policy balls.
pub fn policy_ball_heuristics(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &PolicyBallModel,
    kind: HeuristicKind,
) -> Result<PerturbedPolicy> {
    check_sizes(mdp, pi, model.num_states())?;
    let obj = StateObjective::new(mdp, pi, kind)?;
    let rows = (0..mdp.num_states)
        .map(|s| {
            let p = pi.row(s);
            if model.is_perturbable(s) {
                obj.ball_row(s, p, model.radius(s))
            } else {
                p.to_vec()
            }
        })
        .collect();
    PerturbedPolicy::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::perturbed_policy;
    use crate::mdp::policy_evaluation;
    use crate::verify::fixtures;

    #[test]
    fn zero_budget_is_identity_for_every_kind() {
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let model = NeighborhoodModel::identity(2);
        for kind in HeuristicKind::all() {
            assert!(heuristic_attack(&mdp, &pi, &model, kind).unwrap().is_identity());
        }
    }

    #[test]
    fn zero_radius_leaves_rows_unchanged() {
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let model = PolicyBallModel::new(vec![0.0, 0.0]).unwrap();
        for kind in HeuristicKind::all() {
            assert_eq!(policy_ball_heuristics(&mdp, &pi, &model, kind).unwrap().rows(), pi.rows());
        }
    }

    #[test]
    fn kl_conventions() {
        assert_eq!(divergence(Divergence::Kl, &[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(divergence(Divergence::Kl, &[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert!(divergence(Divergence::Kl, &[1.0, 0.0], &[0.5, 0.5]).is_finite());
        assert!((divergence(Divergence::Tv, &[1.0, 0.0], &[0.5, 0.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn maxdiff_never_keeps_an_identical_row() {
        let pi = Policy::new(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5 + 1e-12, 0.5 - 1e-12]]).unwrap();
        let mdp = FiniteMdp::new(0.5, vec![vec![0.0, 0.0]; 3], vec![vec![vec![1.0, 0.0, 0.0]; 2]; 3]).unwrap();
        let model = NeighborhoodModel::from_sets(vec![vec![0, 1, 2], vec![1], vec![2]]).unwrap();
        let h = maxdiff_attack(&mdp, &pi, &model, Divergence::Kl).unwrap();
        assert_eq!(h.map[0], 2);
    }

    #[test]
    fn infinite_kl_wins() {
        let pi = Policy::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.9, 0.1]]).unwrap();
        let mdp = FiniteMdp::new(0.5, vec![vec![0.0, 0.0]; 3], vec![vec![vec![1.0, 0.0, 0.0]; 2]; 3]).unwrap();
        let model = NeighborhoodModel::from_sets(vec![vec![0, 1, 2], vec![1], vec![2]]).unwrap();
        assert_eq!(maxdiff_attack(&mdp, &pi, &model, Divergence::Kl).unwrap().map[0], 1);
    }

    #[test]
    fn minq_equals_maxworst_for_deterministic_victims() {
        let mdp = FiniteMdp::new(
            0.8,
            vec![vec![-0.1, 1.0], vec![0.4, 0.1]],
            vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.05, 0.95], vec![0.3, 0.7]]],
        )
        .unwrap();
        let model = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1]]).unwrap();
        for actions in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let pi = Policy::deterministic(&actions, 2).unwrap();
            assert_eq!(
                minq_attack(&mdp, &pi, &model).unwrap(),
                maxworst_attack(&mdp, &pi, &model, WorstTarget::CurrentPolicyQ).unwrap()
            );
        }
    }

    #[test]
    fn minq_differs_from_maxworst_when_the_worst_action_is_unreachable() {
        let mdp = fixtures::m_ex_mdp();
        let pi = Policy::deterministic(&[2, 0], 3).unwrap();
        let model = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert_ne!(
            minq_attack(&mdp, &pi, &model).unwrap(),
            maxworst_attack(&mdp, &pi, &model, WorstTarget::CurrentPolicyQ).unwrap()
        );
    }

    #[test]
    fn constant_q_leaves_minq_ball_row_unchanged() {
        let mdp = FiniteMdp::new(0.5, vec![vec![1.0, 1.0, 1.0]], vec![vec![vec![1.0]; 3]]).unwrap();
        let pi = Policy::new(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let model = PolicyBallModel::new(vec![0.2]).unwrap();
        let out = policy_ball_heuristics(&mdp, &pi, &model, HeuristicKind::MinQ).unwrap();
        assert_eq!(out.rows(), pi.rows());
    }

    #[test]
    fn heuristic_values_never_beat_clean_by_being_inadmissible() {
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let model = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1]]).unwrap();
        for kind in HeuristicKind::all() {
            let h = heuristic_attack(&mdp, &pi, &model, kind).unwrap();
            assert!(model.is_admissible(&h));
            policy_evaluation(&mdp, &perturbed_policy(&pi, &h, &model).unwrap().to_policy()).unwrap();
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in HeuristicKind::all() {
            assert_eq!(HeuristicKind::from_name(kind.name()), Some(kind));
        }
    }
}
