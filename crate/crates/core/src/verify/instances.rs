//! Seeded random instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{AdversaryModel, NeighborhoodModel, PolicyBallModel};
use crate::mdp::{FiniteMdp, Policy};
use crate::rng::dirichlet_flat;

/// Everything needed to replay a check on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct Instance {
    pub seed: u64,
    pub mdp: FiniteMdp,
    pub policy: Vec<Vec<f64>>,
    pub model: AdversaryModel,
}

impl Instance {
    pub fn pi(&self) -> Policy {
        Policy::new(self.policy.clone()).expect("instance rows are distributions")
    }

    pub fn neighborhood(&self) -> &NeighborhoodModel {
        self.model.as_neighborhood().expect("neighborhood instance")
    }

    pub fn ball(&self) -> &PolicyBallModel {
        self.model.as_policy_ball().expect("policy-ball instance")
    }
}

fn random_mdp(rng: &mut ChaCha8Rng, num_states: usize, num_actions: usize) -> FiniteMdp {
    let gamma = rng.random_range(0.5..0.95);
    let rewards = (0..num_states).map(|_| (0..num_actions).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let transitions =
        (0..num_states).map(|_| (0..num_actions).map(|_| dirichlet_flat(rng, num_states)).collect()).collect();
    FiniteMdp::new(gamma, rewards, transitions).expect("random MDP is valid")
}

/// Neighbor sets holding each state plus up to `max_neighbors - 1` others.
fn random_sets(rng: &mut ChaCha8Rng, num_states: usize, max_neighbors: usize) -> NeighborhoodModel {
    let sets = (0..num_states)
        .map(|s| {
            let mut others: Vec<usize> = (0..num_states).filter(|&t| t != s).collect();
            others.shuffle(rng);
            let extra = rng.random_range(0..max_neighbors.min(num_states));
            let mut set = vec![s];
            set.extend(others.into_iter().take(extra));
            set
        })
        .collect();
    NeighborhoodModel::from_sets(sets).expect("sets contain their own state")
}

/// Up to five states, up to four actions, at most three neighbors per state.
/// The victim is deterministic when `deterministic` is set.
pub fn neighborhood_instance(seed: u64, deterministic: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_states = rng.random_range(2..=5);
    let num_actions = rng.random_range(2..=4);
    let mdp = random_mdp(&mut rng, num_states, num_actions);
    let policy: Vec<Vec<f64>> = if deterministic {
        (0..num_states)
            .map(|_| {
                let mut row = vec![0.0; num_actions];
                row[rng.random_range(0..num_actions)] = 1.0;
                row
            })
            .collect()
    } else {
        (0..num_states).map(|_| dirichlet_flat(&mut rng, num_actions)).collect()
    };
    let model = AdversaryModel::StateNeighborhood(random_sets(&mut rng, num_states, 3));
    Instance { seed, mdp, policy, model }
}

/// Two to four states and actions with interior victim rows and a ball at
/// one or two states.
pub fn ball_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_states = rng.random_range(2..=4);
    let num_actions = rng.random_range(2..=4);
    let mdp = random_mdp(&mut rng, num_states, num_actions);
    let uniform = 1.0 / num_actions as f64;
    let policy = (0..num_states)
        .map(|_| dirichlet_flat(&mut rng, num_actions).into_iter().map(|p| 0.5 * p + 0.5 * uniform).collect())
        .collect();
    let mut states: Vec<usize> = (0..num_states).collect();
    states.shuffle(&mut rng);
    let count = rng.random_range(1..=2);
    let radius = rng.random_range(0.05..0.3);
    let model = AdversaryModel::PolicyBall(
        PolicyBallModel::at_states(num_states, &states[..count], radius).expect("valid radius"),
    );
    Instance { seed, mdp, policy, model }
}

/// The same instance with a zero budget.
pub fn zero_budget(instance: &Instance) -> Instance {
    let n = instance.mdp.num_states;
    let model = match instance.model {
        AdversaryModel::StateNeighborhood(_) => AdversaryModel::StateNeighborhood(NeighborhoodModel::identity(n)),
        AdversaryModel::PolicyBall(_) => {
            AdversaryModel::PolicyBall(PolicyBallModel::new(vec![0.0; n]).expect("zero radii"))
        }
    };
    Instance { model, ..instance.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_their_bounds() {
        for seed in 0..200 {
            let inst = neighborhood_instance(seed, true);
            assert!((2..=5).contains(&inst.mdp.num_states));
            assert!((2..=4).contains(&inst.mdp.num_actions));
            assert!(inst.neighborhood().max_neighbors() <= 3);
            assert!(inst.pi().is_deterministic());
            let ball = ball_instance(seed);
            assert!((1..=2).contains(&(0..ball.mdp.num_states).filter(|&s| ball.ball().is_perturbable(s)).count()));
        }
    }

    #[test]
    fn instances_are_reproducible() {
        assert_eq!(
            serde_json::to_string(&neighborhood_instance(3, false)).unwrap(),
            serde_json::to_string(&neighborhood_instance(3, false)).unwrap()
        );
    }
}
