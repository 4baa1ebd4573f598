use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adversary_choice;
use crate::adversary::ball::planar_direction;
use crate::adversary::{policy_ball_extreme, AdversaryModel, PerturbedPolicy, StateAdversary};
use crate::error::{Error, Result};
use crate::mdp::{evaluate_rows, ChoiceMdp, FiniteMdp, Mode, Policy, ValueVector};
use crate::rng::{l2, unit_zero_sum};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_DIRECTION_NET_K: usize = 64;

const DIRECTION_SUM_TOL: f64 = 1e-9;

/// What the director proposes at a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectorAction {
    /// Zero-sum perturbing direction (stochastic victims).
    Direction(Vec<f64>),
    /// Action the victim should be pushed toward (deterministic victims).
    Target(usize),
    /// A neighbor chosen directly, as an end-to-end state attacker does.
    Neighbor(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PamdpSpec {
    pub lambda: f64,
    pub direction_net_k: usize,
    pub seed: u64,
}

impl Default for PamdpSpec {
    fn default() -> Self {
        PamdpSpec { lambda: DEFAULT_LAMBDA, direction_net_k: DEFAULT_DIRECTION_NET_K, seed: 0 }
    }
}

impl PamdpSpec {
    pub fn new(lambda: f64, direction_net_k: usize, seed: u64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidModel(format!("lambda must be positive, got {lambda}")));
        }
        Ok(PamdpSpec { lambda, direction_net_k, seed })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorChoice {
    pub row: Vec<f64>,
    /// Realizing neighbor, for neighborhood models.
    pub neighbor: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectorPolicy {
    pub actions: Vec<DirectorAction>,
    pub perturbed: PerturbedPolicy,
    pub adversary: Option<StateAdversary>,
    pub values: ValueVector,
}

fn unit_direction(d: &[f64], num_actions: usize) -> Result<Vec<f64>> {
    if d.len() != num_actions {
        return Err(Error::InvalidDirection(format!("expected {num_actions} coordinates, got {}", d.len())));
    }
    let sum: f64 = d.iter().sum();
    if !(sum.abs() <= DIRECTION_SUM_TOL) {
        return Err(Error::InvalidDirection(format!("coordinates sum to {sum}, expected 0")));
    }
    let norm = l2(d);
    Ok(if norm > 1e-15 { d.iter().map(|x| x / norm).collect() } else { vec![0.0; d.len()] })
}

type RowScore<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

/// Margin by which `target` leads every other action in `row`.
fn margin(row: &[f64], target: usize) -> f64 {
    let rest = row.iter().enumerate().filter(|(a, _)| *a != target).map(|(_, &p)| p).fold(f64::NEG_INFINITY, f64::max);
    if rest == f64::NEG_INFINITY {
        row[target]
    } else {
        row[target] - rest
    }
}

/// Realizes a director action at `s` as an admissible perturbed row.
///
/// Ball models move to the extreme point along the direction. Neighborhood
/// models pick the neighbor maximizing `‖Δ‖ + λ·cos(Δ, d)` for directions, or
/// the target's margin for target actions. Ties go to the lowest index.
pub fn actor_solve(
    pi: &Policy,
    model: &AdversaryModel,
    s: usize,
    action: &DirectorAction,
    lambda: f64,
) -> Result<ActorChoice> {
    let p = pi.row(s);
    match model {
        AdversaryModel::PolicyBall(m) => match action {
            DirectorAction::Direction(d) => {
                Ok(ActorChoice { row: policy_ball_extreme(p, d, m.radius(s))?, neighbor: None })
            }
            _ => Err(Error::InvalidDirection("policy-ball actors take zero-sum directions".into())),
        },
        AdversaryModel::StateNeighborhood(m) => {
            let score: RowScore = match action {
                DirectorAction::Direction(d) => {
                    let u = unit_direction(d, p.len())?;
                    Box::new(move |row: &[f64]| {
                        let delta: Vec<f64> = row.iter().zip(p).map(|(a, b)| a - b).collect();
                        let norm = l2(&delta);
                        if norm <= 0.0 {
                            0.0
                        } else {
                            norm + lambda * delta.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / norm
                        }
                    })
                }
                DirectorAction::Target(a) => {
                    let a = *a;
                    if a >= p.len() {
                        return Err(Error::InvalidDirection(format!("target action {a} out of range")));
                    }
                    Box::new(move |row: &[f64]| margin(row, a))
                }
                DirectorAction::Neighbor(i) => {
                    let t = *m.neighbors(s).get(*i).ok_or(Error::Inadmissible { state: s, target: *i })?;
                    return Ok(ActorChoice { row: pi.row(t).to_vec(), neighbor: Some(t) });
                }
            };
            let mut best = m.neighbors(s)[0];
            let mut best_score = score(pi.row(best));
            for &t in &m.neighbors(s)[1..] {
                let v = score(pi.row(t));
                if v > best_score {
                    best = t;
                    best_score = v;
                }
            }
            Ok(ActorChoice { row: pi.row(best).to_vec(), neighbor: Some(best) })
        }
    }
}

/// Finite set of unit zero-sum directions in `R^num_actions`: every
/// `(e_a - e_b)/√2` for `a ≠ b` plus `k` more. Three actions get `k` evenly
/// spaced angles from a seeded offset; four or more get `k` seeded random
/// directions. Two actions have only the two pairwise directions.
pub fn direction_net(num_actions: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    if num_actions < 2 {
        return vec![vec![0.0; num_actions]];
    }
    let mut net = Vec::new();
    for a in 0..num_actions {
        for b in 0..num_actions {
            if a != b {
                let mut d = vec![0.0; num_actions];
                d[a] = FRAC_1_SQRT_2;
                d[b] = -FRAC_1_SQRT_2;
                net.push(d);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match num_actions {
        2 => {}
        3 => {
            let offset = rng.random::<f64>() * TAU / k.max(1) as f64;
            net.extend((0..k).map(|i| planar_direction(offset + i as f64 * TAU / k as f64)));
        }
        n => net.extend((0..k).map(|_| unit_zero_sum(&mut rng, n))),
    }
    net
}

/// Builds the finite director MDP, resolves each director action through the
/// actor, and solves it exactly.
///
/// Deterministic victims under a neighborhood model get target actions;
/// everything else gets the direction net.
pub fn solve_pamdp_exact(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &AdversaryModel,
    spec: &PamdpSpec,
) -> Result<DirectorPolicy> {
    pi.check_against(mdp)?;
    if model.num_states() != mdp.num_states {
        return Err(Error::DimensionMismatch("adversary model and MDP sizes differ".into()));
    }
    if !(spec.lambda > 0.0) {
        return Err(Error::InvalidModel(format!("lambda must be positive, got {}", spec.lambda)));
    }
    let targets = matches!(model, AdversaryModel::StateNeighborhood(_)) && pi.is_deterministic();
    let director_actions: Vec<DirectorAction> = if targets {
        (0..mdp.num_actions).map(DirectorAction::Target).collect()
    } else {
        direction_net(mdp.num_actions, spec.direction_net_k, spec.seed)
            .into_iter()
            .map(DirectorAction::Direction)
            .collect()
    };

    let mut resolved: Vec<Vec<ActorChoice>> = Vec::with_capacity(mdp.num_states);
    let mut choices = Vec::with_capacity(mdp.num_states);
    for s in 0..mdp.num_states {
        let per_state =
            director_actions.iter().map(|d| actor_solve(pi, model, s, d, spec.lambda)).collect::<Result<Vec<_>>>()?;
        choices.push(per_state.iter().map(|c| adversary_choice(mdp, s, &c.row)).collect());
        resolved.push(per_state);
    }
    let sol = ChoiceMdp { gamma: mdp.gamma, choices }.solve(Mode::Max)?;

    let picked: Vec<&ActorChoice> = sol.choice.iter().enumerate().map(|(s, &k)| &resolved[s][k]).collect();
    let rows: Vec<Vec<f64>> = picked.iter().map(|c| c.row.clone()).collect();
    let adversary = match model {
        AdversaryModel::StateNeighborhood(_) => {
            Some(StateAdversary { map: picked.iter().map(|c| c.neighbor.expect("neighborhood actor")).collect() })
        }
        AdversaryModel::PolicyBall(_) => None,
    };
    let values = evaluate_rows(mdp, &rows)?;
    Ok(DirectorPolicy {
        actions: sol.choice.iter().map(|&k| director_actions[k].clone()).collect(),
        perturbed: PerturbedPolicy::from_rows(rows)?,
        adversary,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{NeighborhoodModel, PolicyBallModel};
    use crate::mdp::policy_evaluation;
    use crate::verify::fixtures;

    #[test]
    fn identical_neighbors_return_the_row() {
        let pi = Policy::new(vec![vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        let model =
            AdversaryModel::StateNeighborhood(NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1]]).unwrap());
        let s = FRAC_1_SQRT_2;
        for action in [DirectorAction::Direction(vec![s, -s]), DirectorAction::Target(0)] {
            let out = actor_solve(&pi, &model, 0, &action, 1.0).unwrap();
            assert_eq!(out.row, vec![0.2, 0.8]);
        }
    }

    #[test]
    fn target_actor_finds_a_positive_margin() {
        let pi = Policy::deterministic(&[0, 1, 2], 3).unwrap();
        let model = AdversaryModel::StateNeighborhood(
            NeighborhoodModel::from_sets(vec![vec![0, 1, 2], vec![1], vec![2]]).unwrap(),
        );
        let out = actor_solve(&pi, &model, 0, &DirectorAction::Target(2), 1.0).unwrap();
        assert_eq!(out.neighbor, Some(2));
        assert!(margin(&out.row, 2) > 0.0);
    }

    #[test]
    fn invalid_actions_are_rejected() {
        let pi = fixtures::m_ex_policy();
        let model = AdversaryModel::StateNeighborhood(NeighborhoodModel::identity(2));
        assert!(actor_solve(&pi, &model, 0, &DirectorAction::Target(3), 1.0).is_err());
        assert!(actor_solve(&pi, &model, 0, &DirectorAction::Direction(vec![1.0, 0.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn net_directions_are_unit_and_zero_sum() {
        for n in [2, 3, 4, 5] {
            let net = direction_net(n, 16, 9);
            assert!(net.len() >= n * (n - 1));
            for d in &net {
                assert!(d.iter().sum::<f64>().abs() < 1e-12);
                assert!((l2(d) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(direction_net(3, 360, 1), direction_net(3, 360, 1));
    }

    #[test]
    fn zero_budget_gives_the_clean_value() {
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let v = policy_evaluation(&mdp, &pi).unwrap();
        for model in [
            AdversaryModel::StateNeighborhood(NeighborhoodModel::identity(2)),
            AdversaryModel::PolicyBall(PolicyBallModel::new(vec![0.0, 0.0]).unwrap()),
        ] {
            let out = solve_pamdp_exact(&mdp, &pi, &model, &PamdpSpec::default()).unwrap();
            assert!(out.values.max_abs_diff(&v) < 1e-12);
            assert_eq!(out.perturbed.rows(), pi.rows());
        }
    }

    #[test]
    fn lambda_must_be_positive() {
        assert!(PamdpSpec::new(0.0, 8, 0).is_err());
        assert!(PamdpSpec::new(1.0, 8, 0).is_ok());
    }
}
