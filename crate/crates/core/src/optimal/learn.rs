use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pamdp::{actor_solve, DirectorAction, DirectorPolicy};
use crate::adversary::{perturbed_policy, AdversaryModel, NeighborhoodModel, StateAdversary};
use crate::error::{Error, Result};
use crate::mdp::{evaluate_rows, FiniteMdp, Policy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLearningConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
}

impl QLearningConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        QLearningConfig { episodes, horizon: 50, learning_rate: 0.1, epsilon_start: 0.1, epsilon_end: 0.01, seed }
    }

    fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let frac = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub policy: DirectorPolicy,
    /// Mean victim value over states under the greedy adversary after each
    /// episode.
    pub curve: Vec<f64>,
}

impl LearnOutcome {
    /// First episode (1-based) whose attained value is within `frac` of
    /// `optimum`, if any.
    pub fn episodes_to_within(&self, optimum: f64, frac: f64) -> Option<usize> {
        let threshold = optimum + frac * optimum.abs();
        self.curve.iter().position(|&v| v <= threshold).map(|i| i + 1)
    }
}

fn sample(rng: &mut ChaCha8Rng, dist: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn greedy(q: &[f64], valid: usize) -> usize {
    let mut best = 0;
    for i in 1..valid {
        if q[i] > q[best] {
            best = i;
        }
    }
    best
}

/// The adversary's learning problem: at each state it picks one of
/// `valid[s]` options, which `resolve` maps to a neighbor.
struct Learner<'a> {
    mdp: &'a FiniteMdp,
    pi: &'a Policy,
    model: &'a NeighborhoodModel,
    valid: Vec<usize>,
    resolve: Vec<Vec<usize>>,
}

impl Learner<'_> {
    fn adversary(&self, q: &[Vec<f64>]) -> StateAdversary {
        StateAdversary {
            map: (0..self.mdp.num_states).map(|s| self.resolve[s][greedy(&q[s], self.valid[s])]).collect(),
        }
    }

    fn attained(&self, q: &[Vec<f64>]) -> Result<f64> {
        let h = self.adversary(q);
        Ok(evaluate_rows(self.mdp, perturbed_policy(self.pi, &h, self.model)?.rows())?.mean())
    }

    fn run(&self, config: &QLearningConfig) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let n = self.mdp.num_states;
        let width = self.valid.iter().copied().max().unwrap_or(1);
        let mut q = vec![vec![0.0; width]; n];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut curve = Vec::with_capacity(config.episodes);
        for episode in 0..config.episodes {
            let eps = config.epsilon(episode);
            let mut s = rng.random_range(0..n);
            for _ in 0..config.horizon {
                let k = if rng.random::<f64>() < eps {
                    rng.random_range(0..self.valid[s])
                } else {
                    greedy(&q[s], self.valid[s])
                };
                let shown = self.resolve[s][k];
                let a = sample(&mut rng, self.pi.row(shown));
                let next = sample(&mut rng, &self.mdp.transitions[s][a]);
                let reward = -self.mdp.rewards[s][a];
                let target = reward + self.mdp.gamma * q[next][greedy(&q[next], self.valid[next])];
                q[s][k] += config.learning_rate * (target - q[s][k]);
                s = next;
            }
            curve.push(self.attained(&q)?);
        }
        Ok((q, curve))
    }
}

fn finish(
    learner: &Learner<'_>,
    q: &[Vec<f64>],
    curve: Vec<f64>,
    action: impl Fn(usize, usize) -> DirectorAction,
) -> Result<LearnOutcome> {
    let h = learner.adversary(q);
    let perturbed = perturbed_policy(learner.pi, &h, learner.model)?;
    let values = evaluate_rows(learner.mdp, perturbed.rows())?;
    let actions = (0..learner.mdp.num_states).map(|s| action(s, greedy(&q[s], learner.valid[s]))).collect();
    Ok(LearnOutcome { policy: DirectorPolicy { actions, perturbed, adversary: Some(h), values }, curve })
}

fn check(mdp: &FiniteMdp, pi: &Policy, model: &NeighborhoodModel) -> Result<()> {
    pi.check_against(mdp)?;
    if model.num_states() != mdp.num_states {
        return Err(Error::DimensionMismatch("adversary model and MDP sizes differ".into()));
    }
    Ok(())
}

/// Q-learning directly over neighbor choices.
pub fn sarl_qlearning_with(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    config: &QLearningConfig,
) -> Result<LearnOutcome> {
    check(mdp, pi, model)?;
    let learner = Learner {
        mdp,
        pi,
        model,
        valid: model.neighbor_sets().iter().map(Vec::len).collect(),
        resolve: model.neighbor_sets().to_vec(),
    };
    let (q, curve) = learner.run(config)?;
    finish(&learner, &q, curve, |_, i| DirectorAction::Neighbor(i))
}

/// Q-learning over target actions, with the margin actor choosing the
/// neighbor that realizes each target.
pub fn paad_qlearning_with(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    config: &QLearningConfig,
) -> Result<LearnOutcome> {
    check(mdp, pi, model)?;
    let wrapped = AdversaryModel::StateNeighborhood(model.clone());
    let resolve = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| Ok(actor_solve(pi, &wrapped, s, &DirectorAction::Target(a), 1.0)?.neighbor.expect("neighbor")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let learner = Learner { mdp, pi, model, valid: vec![mdp.num_actions; mdp.num_states], resolve };
    let (q, curve) = learner.run(config)?;
    finish(&learner, &q, curve, |_, a| DirectorAction::Target(a))
}

pub fn sarl_qlearning(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    episodes: usize,
    seed: u64,
) -> Result<LearnOutcome> {
    sarl_qlearning_with(mdp, pi, model, &QLearningConfig::new(episodes, seed))
}

pub fn paad_qlearning(
    mdp: &FiniteMdp,
    pi: &Policy,
    model: &NeighborhoodModel,
    episodes: usize,
    seed: u64,
) -> Result<LearnOutcome> {
    paad_qlearning_with(mdp, pi, model, &QLearningConfig::new(episodes, seed))
}
