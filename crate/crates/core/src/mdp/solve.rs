use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{argmax, FiniteMdp, Policy, ValueVector};
use crate::error::{Error, Result};

/// Bellman residual at which value iteration stops.
pub const BELLMAN_TOL: f64 = 1e-12;
/// Required residual of the direct policy-evaluation solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

const MAX_VI_ITERS: usize = 1_000_000;
const MAX_POLISH_ITERS: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Max,
    Min,
}

/// An MDP whose action set may differ per state; each choice is already
/// resolved into an expected reward and a next-state distribution.
///
/// This is the common shape of the original MDP, the policy perturbation MDP
/// and the director MDPs, so they all share one solver.
#[derive(Clone, Debug)]
pub struct ChoiceMdp {
    pub gamma: f64,
    /// `choices[s][k] = (reward, next-state distribution)`
    pub choices: Vec<Vec<(f64, Vec<f64>)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceSolution {
    pub choice: Vec<usize>,
    pub values: ValueVector,
}

impl ChoiceMdp {
    pub fn from_mdp(mdp: &FiniteMdp) -> Self {
        let choices = (0..mdp.num_states)
            .map(|s| (0..mdp.num_actions).map(|a| (mdp.rewards[s][a], mdp.transitions[s][a].clone())).collect())
            .collect();
        ChoiceMdp { gamma: mdp.gamma, choices }
    }

    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    fn backup(&self, s: usize, k: usize, v: &[f64]) -> f64 {
        let (r, next) = &self.choices[s][k];
        r + self.gamma * next.iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
    }

    /// Greedy choice at `s` w.r.t. `v`; a later choice must beat the current
    /// best by more than `tol` to win, so ties go to the lowest index.
    fn greedy(&self, s: usize, v: &[f64], mode: Mode, tol: f64) -> (usize, f64) {
        let mut best = 0;
        let mut best_q = self.backup(s, 0, v);
        for k in 1..self.choices[s].len() {
            let q = self.backup(s, k, v);
            let better = match mode {
                Mode::Max => q > best_q + tol,
                Mode::Min => q < best_q - tol,
            };
            if better {
                best = k;
                best_q = q;
            }
        }
        (best, best_q)
    }

    /// Exact value of a fixed choice per state.
    pub fn evaluate(&self, choice: &[usize]) -> Result<ValueVector> {
        let n = self.num_states();
        let rewards: Vec<f64> = (0..n).map(|s| self.choices[s][choice[s]].0).collect();
        let trans: Vec<&[f64]> = (0..n).map(|s| self.choices[s][choice[s]].1.as_slice()).collect();
        solve_bellman(self.gamma, &rewards, &trans)
    }

    /// Value iteration to a sup-norm residual below [`BELLMAN_TOL`], then a
    /// policy-iteration polish: the greedy choice is evaluated exactly and
    /// improved until stable. Ties go to the lowest choice index.
    pub fn solve(&self, mode: Mode) -> Result<ChoiceSolution> {
        let n = self.num_states();
        let mut v = vec![0.0; n];
        if self.gamma > 0.0 {
            for _ in 0..MAX_VI_ITERS {
                let next: Vec<f64> = (0..n).map(|s| self.greedy(s, &v, mode, 0.0).1).collect();
                let residual = next.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                v = next;
                if residual < BELLMAN_TOL {
                    break;
                }
            }
        }

        let scale = 1.0 + v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let tie_tol = 1e-11 * scale;
        let mut choice: Vec<usize> = (0..n).map(|s| self.greedy(s, &v, mode, tie_tol).0).collect();
        let mut values = self.evaluate(&choice)?;
        for _ in 0..MAX_POLISH_ITERS {
            let improved: Vec<usize> = (0..n)
                .map(|s| {
                    let current = self.backup(s, choice[s], &values.0);
                    let (k, q) = self.greedy(s, &values.0, mode, tie_tol);
                    let strictly_better = match mode {
                        Mode::Max => q > current + tie_tol,
                        Mode::Min => q < current - tie_tol,
                    };
                    if strictly_better {
                        k
                    } else {
                        choice[s]
                    }
                })
                .collect();
            if improved == choice {
                break;
            }
            choice = improved;
            values = self.evaluate(&choice)?;
        }
        Ok(ChoiceSolution { choice, values })
    }
}

/// Solves `(I - γ P) V = r` by LU with partial pivoting and checks the residual.
fn solve_bellman(gamma: f64, rewards: &[f64], trans: &[&[f64]]) -> Result<ValueVector> {
    let n = rewards.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - gamma * trans[i][j]
    });
    let b = DVector::from_column_slice(rewards);
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::Singular(f64::INFINITY))?;
    let scale = 1.0 + b.amax();
    let mut residual = (&a * &x - &b).amax();
    if residual >= SOLVE_RESIDUAL_TOL * scale {
        // one step of iterative refinement
        let r = &b - &a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
        residual = (&a * &x - &b).amax();
        if residual >= SOLVE_RESIDUAL_TOL * scale {
            return Err(Error::Singular(residual));
        }
    }
    Ok(ValueVector(x.iter().copied().collect()))
}

/// Exact value of executing the per-state action distributions `rows`.
pub fn evaluate_rows(mdp: &FiniteMdp, rows: &[Vec<f64>]) -> Result<ValueVector> {
    if rows.len() != mdp.num_states || rows.iter().any(|r| r.len() != mdp.num_actions) {
        return Err(Error::DimensionMismatch(format!(
            "row table does not match {}x{} MDP",
            mdp.num_states, mdp.num_actions
        )));
    }
    let rewards: Vec<f64> = rows.iter().enumerate().map(|(s, row)| mdp.mixed_reward(s, row)).collect();
    let trans: Vec<Vec<f64>> = rows.iter().enumerate().map(|(s, row)| mdp.mixed_transition(s, row)).collect();
    let refs: Vec<&[f64]> = trans.iter().map(Vec::as_slice).collect();
    solve_bellman(mdp.gamma, &rewards, &refs)
}

/// `V^π`, the unique solution of `(I - γ P^π) V = R^π`.
pub fn policy_evaluation(mdp: &FiniteMdp, pi: &Policy) -> Result<ValueVector> {
    pi.check_against(mdp)?;
    evaluate_rows(mdp, pi.rows())
}

/// One Bellman backup of `v`: `Q(s,a) = R(s,a) + γ Σ P(s'|s,a) v(s')`.
pub fn q_values_from(mdp: &FiniteMdp, v: &ValueVector) -> Vec<Vec<f64>> {
    (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| {
                    let next: f64 = mdp.transitions[s][a].iter().zip(&v.0).map(|(p, x)| p * x).sum();
                    mdp.rewards[s][a] + mdp.gamma * next
                })
                .collect()
        })
        .collect()
}

/// `Q^π` as an `S x A` table.
pub fn q_values(mdp: &FiniteMdp, pi: &Policy) -> Result<Vec<Vec<f64>>> {
    let v = policy_evaluation(mdp, pi)?;
    Ok(q_values_from(mdp, &v))
}

/// Deterministic optimal (`Max`) or pessimal (`Min`) policy and its value.
pub fn value_iteration(mdp: &FiniteMdp, mode: Mode) -> Result<(Policy, ValueVector)> {
    let sol = ChoiceMdp::from_mdp(mdp).solve(mode)?;
    let pi = Policy::deterministic(&sol.choice, mdp.num_actions)?;
    Ok((pi, sol.values))
}

/// Softmax of the optimal Q table at temperature `tau`.
pub fn softmax_optimal_policy(mdp: &FiniteMdp, tau: f64) -> Result<Policy> {
    let (_, v) = value_iteration(mdp, Mode::Max)?;
    let q = q_values_from(mdp, &v);
    let rows = q
        .iter()
        .map(|row| {
            let m = row[argmax(row)];
            let w: Vec<f64> = row.iter().map(|x| ((x - m) / tau).exp()).collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        })
        .collect();
    Policy::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::fixtures;

    fn all_deterministic(mdp: &FiniteMdp) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..mdp.num_states {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..mdp.num_actions).map(move |a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn zero_discount_value_is_expected_reward() {
        let mut mdp = fixtures::m_ex_mdp();
        mdp.gamma = 0.0;
        let pi = fixtures::m_ex_policy();
        let v = policy_evaluation(&mdp, &pi).unwrap();
        for s in 0..2 {
            let expect: f64 = (0..3).map(|a| pi.row(s)[a] * mdp.rewards[s][a]).sum();
            assert_eq!(v[s], expect);
        }
        assert_eq!(q_values(&mdp, &pi).unwrap(), mdp.rewards);
    }

    #[test]
    fn geometric_series() {
        let mdp = FiniteMdp::new(0.5, vec![vec![1.0]], vec![vec![vec![1.0]]]).unwrap();
        let v = policy_evaluation(&mdp, &Policy::uniform(1, 1)).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn m_ex_base_policy_values() {
        // frozen from an independent 2x2 Cramer's-rule solve
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let v = policy_evaluation(&mdp, &pi).unwrap();
        assert!((v[0] - fixtures::M_EX_BASE_VALUES[0]).abs() < 1e-12, "{v:?}");
        assert!((v[1] - fixtures::M_EX_BASE_VALUES[1]).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn m_ex_q_table_is_one_backup() {
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let q = q_values(&mdp, &pi).unwrap();
        let v = fixtures::M_EX_BASE_VALUES;
        for s in 0..2 {
            for (a, qa) in q[s].iter().enumerate() {
                let p = &mdp.transitions[s][a];
                let expect = mdp.rewards[s][a] + 0.8 * (p[0] * v[0] + p[1] * v[1]);
                assert!((qa - expect).abs() < 1e-12);
            }
            let mix: f64 = (0..3).map(|a| pi.row(s)[a] * q[s][a]).sum();
            assert!((mix - v[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn value_iteration_matches_exhaustive_search_on_m_ex() {
        let mdp = fixtures::m_ex_mdp();
        let values: Vec<ValueVector> = all_deterministic(&mdp)
            .iter()
            .map(|acts| policy_evaluation(&mdp, &Policy::deterministic(acts, 3).unwrap()).unwrap())
            .collect();
        assert_eq!(values.len(), 9);
        let (_, vmax) = value_iteration(&mdp, Mode::Max).unwrap();
        let (_, vmin) = value_iteration(&mdp, Mode::Min).unwrap();
        for s in 0..2 {
            let hi = values.iter().map(|v| v[s]).fold(f64::MIN, f64::max);
            let lo = values.iter().map(|v| v[s]).fold(f64::MAX, f64::min);
            assert!((vmax[s] - hi).abs() < 1e-10);
            assert!((vmin[s] - lo).abs() < 1e-10);
        }
        // the max/min vertices are attained by single deterministic policies
        assert!(values.iter().any(|v| v.max_abs_diff(&vmax) < 1e-10));
        assert!(values.iter().any(|v| v.max_abs_diff(&vmin) < 1e-10));
    }

    #[test]
    fn single_action_mdp_has_only_one_policy() {
        let mdp =
            FiniteMdp::new(0.9, vec![vec![1.0], vec![-2.0]], vec![vec![vec![0.5, 0.5]], vec![vec![0.1, 0.9]]]).unwrap();
        let (pi, v) = value_iteration(&mdp, Mode::Max).unwrap();
        assert_eq!(pi, Policy::uniform(2, 1));
        let direct = policy_evaluation(&mdp, &pi).unwrap();
        assert!(v.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn ties_go_to_the_lowest_action() {
        let mdp = FiniteMdp::new(0.5, vec![vec![1.0, 1.0, 0.0]], vec![vec![vec![1.0]; 3]]).unwrap();
        let (pi, _) = value_iteration(&mdp, Mode::Max).unwrap();
        assert_eq!(pi.argmax_action(0), 0);
        let (pi, _) = value_iteration(&mdp, Mode::Min).unwrap();
        assert_eq!(pi.argmax_action(0), 2);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mdp = fixtures::m_ex_mdp();
        assert!(matches!(policy_evaluation(&mdp, &Policy::uniform(3, 3)), Err(Error::DimensionMismatch(_))));
        assert!(matches!(q_values(&mdp, &Policy::uniform(2, 2)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn softmax_policy_is_stochastic_and_prefers_optimal_action() {
        let mdp = fixtures::m_ex_mdp();
        let (opt, _) = value_iteration(&mdp, Mode::Max).unwrap();
        let soft = softmax_optimal_policy(&mdp, 0.5).unwrap();
        for s in 0..2 {
            assert_eq!(soft.argmax_action(s), opt.argmax_action(s));
            assert!(soft.row(s).iter().all(|&p| p > 0.0));
        }
    }
}
