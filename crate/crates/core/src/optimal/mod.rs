//! Exact and learned optimal adversaries.

mod learn;
mod pamdp;

pub use learn::{
    paad_qlearning, paad_qlearning_with, sarl_qlearning, sarl_qlearning_with, LearnOutcome, QLearningConfig,
};
pub use pamdp::{
    actor_solve, direction_net, solve_pamdp_exact, ActorChoice, DirectorAction, DirectorPolicy, PamdpSpec,
    DEFAULT_DIRECTION_NET_K, DEFAULT_LAMBDA,
};

use crate::adversary::{perturbed_policy, NeighborhoodModel, StateAdversary};
use crate::error::{Error, Result};
use crate::mdp::{evaluate_rows, ChoiceMdp, FiniteMdp, Mode, Policy, ValueVector};

/// Relative tolerance for matching a value vector against the element-wise
/// minimum during brute force.
const ELEMENTWISE_TOL: f64 = 1e-10;

/// The MDP whose actions are the admissible perturbed rows at each state and
/// whose reward is the negated victim reward.
#[derive(Clone, Debug)]
pub struct PerturbationMdp {
    /// Deduplicated admissible rows per state.
    pub rows: Vec<Vec<Vec<f64>>>,
    /// Lowest-index neighbor realizing each row.
    pub realizers: Vec<Vec<usize>>,
    pub choices: ChoiceMdp,
}

impl PerturbationMdp {
    pub fn num_choices(&self, s: usize) -> usize {
        self.rows[s].len()
    }
}

/// Mixed reward and transition of playing `row` at `s`, with the reward sign
/// flipped for the adversary.
pub(crate) fn adversary_choice(mdp: &FiniteMdp, s: usize, row: &[f64]) -> (f64, Vec<f64>) {
    (-mdp.mixed_reward(s, row), mdp.mixed_transition(s, row))
}

pub fn build_perturbation_mdp(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    cap: u128,
) -> Result<PerturbationMdp> {
    pi.check_against(mdp)?;
    if model.num_states() != mdp.num_states {
        return Err(Error::DimensionMismatch("adversary model and MDP sizes differ".into()));
    }
    let total: u128 = model.neighbor_sets().iter().map(|n| n.len() as u128).sum();
    if total > cap {
        return Err(Error::CapExceeded { count: total, cap });
    }
    let mut rows = Vec::with_capacity(mdp.num_states);
    let mut realizers = Vec::with_capacity(mdp.num_states);
    let mut choices = Vec::with_capacity(mdp.num_states);
    for s in 0..mdp.num_states {
        let mut state_rows: Vec<Vec<f64>> = Vec::new();
        let mut state_realizers = Vec::new();
        for &t in model.neighbors(s) {
            let row = pi.row(t);
            if !state_rows.iter().any(|r| r.as_slice() == row) {
                state_rows.push(row.to_vec());
                state_realizers.push(t);
            }
        }
        choices.push(state_rows.iter().map(|r| adversary_choice(mdp, s, r)).collect());
        rows.push(state_rows);
        realizers.push(state_realizers);
    }
    Ok(PerturbationMdp { rows, realizers, choices: ChoiceMdp { gamma: mdp.gamma, choices } })
}

/// Solves the perturbation MDP and maps each chosen row back to its
/// lowest-index realizing neighbor. The returned value is the victim's exact
/// value under that adversary.
pub fn solve_optimal_adversary(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    cap: u128,
) -> Result<(StateAdversary, ValueVector)> {
    let pmdp = build_perturbation_mdp(mdp, pi, model, cap)?;
    let sol = pmdp.choices.solve(Mode::Max)?;
    let h = StateAdversary { map: sol.choice.iter().enumerate().map(|(s, &k)| pmdp.realizers[s][k]).collect() };
    let v = evaluate_rows(mdp, perturbed_policy(pi, &h, model)?.rows())?;
    Ok((h, v))
}

/// Evaluates every admissible adversary and returns the first one, in
/// enumeration order, whose value is the element-wise minimum.
pub fn brute_force_optimal(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    cap: u128,
) -> Result<(StateAdversary, ValueVector)> {
    pi.check_against(mdp)?;
    let candidates: Vec<Vec<Vec<f64>>> =
        (0..mdp.num_states).map(|s| model.neighbors(s).iter().map(|&t| pi.row(t).to_vec()).collect()).collect();
    if model.adversary_count() > cap {
        return Err(Error::CapExceeded { count: model.adversary_count(), cap });
    }
    let (choice, v) = brute_force_rows(mdp, &candidates)?;
    let h = StateAdversary { map: choice.iter().enumerate().map(|(s, &i)| model.neighbors(s)[i]).collect() };
    Ok((h, v))
}

fn for_each_choice(sizes: &[usize], mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut cursor = vec![0; sizes.len()];
    loop {
        f(&cursor)?;
        let mut s = cursor.len();
        loop {
            if s == 0 {
                return Ok(());
            }
            s -= 1;
            cursor[s] += 1;
            if cursor[s] < sizes[s] {
                break;
            }
            cursor[s] = 0;
        }
    }
}

/// Exhaustive search over one candidate row per state. Returns the first
/// combination, in lexicographic order, attaining the element-wise minimum of
/// the victim's value, or an error if no single combination attains it.
pub fn brute_force_rows(mdp: &FiniteMdp, candidates: &[Vec<Vec<f64>>]) -> Result<(Vec<usize>, ValueVector)> {
    if candidates.len() != mdp.num_states || candidates.iter().any(Vec::is_empty) {
        return Err(Error::DimensionMismatch("need at least one candidate row per state".into()));
    }
    let sizes: Vec<usize> = candidates.iter().map(Vec::len).collect();
    let rows_for = |choice: &[usize]| -> Vec<Vec<f64>> {
        choice.iter().enumerate().map(|(s, &i)| candidates[s][i].clone()).collect()
    };
    let mut lower = vec![f64::INFINITY; mdp.num_states];
    for_each_choice(&sizes, |choice| {
        let v = evaluate_rows(mdp, &rows_for(choice))?;
        lower.iter_mut().zip(&v.0).for_each(|(m, x)| *m = m.min(*x));
        Ok(())
    })?;
    let tol = ELEMENTWISE_TOL * (1.0 + lower.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    let mut found: Option<(Vec<usize>, ValueVector)> = None;
    let mut shortfall = f64::INFINITY;
    for_each_choice(&sizes, |choice| {
        if found.is_some() {
            return Ok(());
        }
        let v = evaluate_rows(mdp, &rows_for(choice))?;
        let gap = v.0.iter().zip(&lower).fold(0.0_f64, |m, (x, l)| m.max(x - l));
        shortfall = shortfall.min(gap);
        if gap <= tol {
            found = Some((choice.to_vec(), v));
        }
        Ok(())
    })?;
    found.ok_or(Error::NoElementwiseMinimum { shortfall })
}
