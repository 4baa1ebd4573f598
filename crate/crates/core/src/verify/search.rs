//! Rejection search for counterexample constants.
//!
//! Rewards are drawn uniformly from `[-1, 1]` and budgets from
//! `{0.05, 0.1, 0.2}`; discount and victim rows are held at the frozen
//! values. The first draw satisfying every constraint is returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixtures::{BranchParams, ThreeArmParams, TwoStepParams, BRANCH, THREE_ARM, TWO_STEP};

const BUDGETS: [f64; 3] = [0.05, 0.1, 0.2];

fn reward(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

fn budget(rng: &mut ChaCha8Rng) -> f64 {
    BUDGETS[rng.random_range(0..BUDGETS.len())]
}

/// Searches two-step constants; `with_divergence` also requires the KL
/// condition.
pub fn search_two_step(seed: u64, tries: usize, with_divergence: bool) -> Option<TwoStepParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..tries).find_map(|_| {
        let p = TwoStepParams {
            eps1: budget(&mut rng),
            eps2: budget(&mut rng),
            r1: reward(&mut rng),
            r2: reward(&mut rng),
            r3: reward(&mut rng),
            ..TWO_STEP
        };
        let ok = p.constraints().iter().all(|c| c.holds()) && (!with_divergence || p.divergence_constraint().holds());
        ok.then_some(p)
    })
}

pub fn search_branch(seed: u64, tries: usize) -> Option<BranchParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..tries).find_map(|_| {
        let p = BranchParams {
            eps0: budget(&mut rng),
            eps1: budget(&mut rng),
            eps2: budget(&mut rng),
            r1: reward(&mut rng),
            r2: reward(&mut rng),
            r3: reward(&mut rng),
            r4: reward(&mut rng),
            ..BRANCH
        };
        p.constraints().iter().all(|c| c.holds()).then_some(p)
    })
}

pub fn search_three_arm(seed: u64, tries: usize) -> Option<ThreeArmParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..tries).find_map(|_| {
        let p = ThreeArmParams {
            eps: budget(&mut rng),
            r1: reward(&mut rng),
            r2: reward(&mut rng),
            r3: reward(&mut rng),
            ..THREE_ARM
        };
        p.constraints().iter().all(|c| c.holds()).then_some(p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{perturbed_policy, DEFAULT_ENUM_CAP};
    use crate::heuristic::heuristic_attack;
    use crate::mdp::policy_evaluation;
    use crate::optimal::brute_force_optimal;
    use crate::verify::fixtures::{maxworst_fixture_from, maxworst_tie_fixture_from, minbest_fixture_from, Fixture};

    fn gap(f: &Fixture) -> f64 {
        let h = heuristic_attack(&f.mdp, &f.pi, &f.model, f.attack).unwrap();
        let v = policy_evaluation(&f.mdp, &perturbed_policy(&f.pi, &h, &f.model).unwrap().to_policy()).unwrap();
        let (_, opt) = brute_force_optimal(&f.mdp, &f.pi, &f.model, DEFAULT_ENUM_CAP).unwrap();
        v[f.start_state] - opt[f.start_state]
    }

    #[test]
    fn searches_are_reproducible() {
        assert_eq!(search_two_step(7, 100_000, false), search_two_step(7, 100_000, false));
        assert_eq!(search_branch(7, 100_000), search_branch(7, 100_000));
        assert_eq!(search_three_arm(7, 100_000), search_three_arm(7, 100_000));
    }

    #[test]
    fn searched_constants_produce_gaps() {
        for seed in 0..5 {
            let p = search_two_step(seed, 100_000, false).expect("two-step constants exist");
            let f = minbest_fixture_from(&p);
            assert!(f.violated().is_empty());
            assert!((gap(&f) - p.minbest_gap()).abs() < 1e-10);
            assert!(gap(&f) > 1e-6);

            let p = search_branch(seed, 100_000).expect("branch constants exist");
            let f = maxworst_fixture_from(&p);
            assert!(f.violated().is_empty());
            assert!((gap(&f) - p.root_gap()).abs() < 1e-10);

            let p = search_three_arm(seed, 100_000).expect("three-arm constants exist");
            assert!(maxworst_tie_fixture_from(&p).violated().is_empty());
        }
    }

    #[test]
    fn divergence_search_finds_constants() {
        let p = search_two_step(1, 100_000, true).expect("constants exist");
        assert!(p.divergence_constraint().holds());
    }
}
