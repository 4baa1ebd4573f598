//! Claim-to-check harness.
//!
//! Each [`CheckId`] names one verifiable claim. [`run_checks`] executes a
//! selection with per-check seeds derived from a master seed, so a report is
//! a pure function of `(ids, seed, config)`.

pub mod checks;
pub mod fixtures;
pub mod instances;
pub mod search;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::mdp::sample_policy_values;
use crate::rng::derive_seed;

/// Outcome of one check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub claim: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub seeds: Vec<u64>,
    /// Replayable descriptions of every failing case.
    pub failures: Vec<serde_json::Value>,
}

impl CheckReport {
    pub fn new(name: &str, claim: &str, tolerance: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            claim: claim.to_string(),
            passed: true,
            measured: BTreeMap::new(),
            tolerance,
            seeds: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        self.measured.insert(key.to_string(), value);
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

/// One row of the claim table in a report header.
#[derive(Clone, Debug, Serialize)]
pub struct ClaimEntry {
    pub check: &'static str,
    pub claim: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub master_seed: u64,
    pub claims: Vec<ClaimEntry>,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

/// Sizes for the randomized checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub instances: usize,
    pub polytope_samples: usize,
    pub polytope_pairs: usize,
    pub chain_seeds: usize,
    pub chain_episodes: usize,
    /// Appends a check that always fails.
    pub force_fail: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            instances: 100,
            polytope_samples: 100_000,
            polytope_pairs: 50,
            chain_seeds: 20,
            chain_episodes: 2000,
            force_fail: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    HeuristicSuboptimality,
    SolutionSet,
    PamdpOptimality,
    PerturbationMdp,
    DiskOrdering,
    BoundaryTheorem,
    PolytopeStructure,
    Efficiency,
    ZeroBudget,
    HeuristicInvariants,
    MutationSensitivity,
}

impl CheckId {
    pub const ALL: [CheckId; 11] = [
        CheckId::HeuristicSuboptimality,
        CheckId::SolutionSet,
        CheckId::PamdpOptimality,
        CheckId::PerturbationMdp,
        CheckId::DiskOrdering,
        CheckId::BoundaryTheorem,
        CheckId::PolytopeStructure,
        CheckId::Efficiency,
        CheckId::ZeroBudget,
        CheckId::HeuristicInvariants,
        CheckId::MutationSensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::HeuristicSuboptimality => "heuristic_suboptimality",
            CheckId::SolutionSet => "heuristic_solution_set",
            CheckId::PamdpOptimality => "pamdp_optimality",
            CheckId::PerturbationMdp => "perturbation_mdp_equivalence",
            CheckId::DiskOrdering => "disk_ordering",
            CheckId::BoundaryTheorem => "boundary_theorem",
            CheckId::PolytopeStructure => "polytope_structure",
            CheckId::Efficiency => "efficiency_ordering",
            CheckId::ZeroBudget => "zero_budget_identity",
            CheckId::HeuristicInvariants => "heuristic_invariants",
            CheckId::MutationSensitivity => "mutation_sensitivity",
        }
    }

    pub fn claim(self) -> &'static str {
        match self {
            CheckId::HeuristicSuboptimality => {
                "MinBest, MaxWorst, MinQ and MaxDiff are not optimal attack formulations"
            }
            CheckId::SolutionSet => "the worst-policy MaxWorst solution set can contain non-optimal members",
            CheckId::PamdpOptimality => "the director/actor construction induces an optimal state adversary",
            CheckId::PerturbationMdp => "an optimal policy of the perturbation MDP is an optimal policy adversary",
            CheckId::DiskOrdering => "the director/actor attack beats the heuristics on the small example",
            CheckId::BoundaryTheorem => "an optimal policy adversary exists on the outermost boundary",
            CheckId::PolytopeStructure => "policy values form a polytope with line-segment edges",
            CheckId::Efficiency => "learning over target actions converges faster than over state perturbations",
            CheckId::ZeroBudget => "with no budget every attack leaves the victim unchanged",
            CheckId::HeuristicInvariants => "heuristic adversaries are admissible and dominated by the optimum",
            CheckId::MutationSensitivity => "a sign-flipped MinBest is detected",
        }
    }

    pub fn from_name(name: &str) -> Option<CheckId> {
        CheckId::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Runs one check with its own seed. Fixture checks ignore the seed.
pub fn run_check(id: CheckId, seed: u64, cfg: &RunConfig) -> Vec<CheckReport> {
    match id {
        CheckId::HeuristicSuboptimality => {
            fixtures::gap_fixtures().iter().map(checks::check_heuristic_suboptimality).collect()
        }
        CheckId::SolutionSet => vec![checks::check_solution_set_gap()],
        CheckId::PamdpOptimality => vec![checks::check_pamdp_optimality(cfg.instances, seed)],
        CheckId::PerturbationMdp => vec![checks::check_perturbation_mdp(cfg.instances, seed)],
        CheckId::DiskOrdering => vec![checks::check_disk_ordering(seed)],
        CheckId::BoundaryTheorem => vec![checks::check_boundary_theorem(cfg.instances, seed)],
        CheckId::PolytopeStructure => vec![checks::check_polytope_structure(
            &fixtures::m_ex_mdp(),
            cfg.polytope_samples,
            cfg.polytope_pairs,
            seed,
        )],
        CheckId::Efficiency => vec![checks::check_efficiency(cfg.chain_seeds, cfg.chain_episodes, seed)],
        CheckId::ZeroBudget => vec![checks::check_zero_budget(cfg.instances / 5, seed)],
        CheckId::HeuristicInvariants => vec![checks::check_heuristic_invariants(cfg.instances, seed)],
        CheckId::MutationSensitivity => vec![checks::check_mutation_sensitivity(cfg.instances / 5, seed)],
    }
}

/// Runs the given checks in order, each with [`check_seed`] of its position.
pub fn run_checks(ids: &[CheckId], master_seed: u64, cfg: &RunConfig) -> Report {
    let checks = ids.iter().enumerate().map(|(i, &id)| run_check(id, check_seed(master_seed, i), cfg)).collect();
    assemble(ids, master_seed, cfg, checks)
}

/// Seed of the check at position `index`.
pub fn check_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, index as u64)
}

/// Builds a report from per-check results given in `ids` order.
pub fn assemble(ids: &[CheckId], master_seed: u64, cfg: &RunConfig, results: Vec<Vec<CheckReport>>) -> Report {
    let mut checks: Vec<CheckReport> = results.into_iter().flatten().collect();
    if cfg.force_fail {
        checks.push(checks::forced_failure());
    }
    let passed = checks.iter().all(|c| c.passed);
    Report {
        master_seed,
        claims: ids.iter().map(|&id| ClaimEntry { check: id.name(), claim: id.claim() }).collect(),
        checks,
        passed,
    }
}

pub fn run_all(master_seed: u64) -> Report {
    run_checks(&CheckId::ALL, master_seed, &RunConfig::default())
}

/// Value points of `n` random policies on the two-state example, for plotting.
pub fn m_ex_point_cloud(n: usize, seed: u64) -> crate::Result<Vec<Vec<f64>>> {
    Ok(sample_policy_values(&fixtures::m_ex_mdp(), n, seed)?.into_iter().map(|(_, v)| v.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_selection_passes() {
        let report = run_checks(&[], 1, &RunConfig::default());
        assert!(report.passed);
        assert!(report.checks.is_empty());
    }

    #[test]
    fn forced_failure_fails_the_report() {
        let cfg = RunConfig { force_fail: true, ..RunConfig::default() };
        let report = run_checks(&[], 1, &cfg);
        assert!(!report.passed);
        assert_eq!(report.checks.len(), 1);
        assert!(!report.checks[0].failures.is_empty());
    }

    #[test]
    fn check_names_round_trip() {
        for id in CheckId::ALL {
            assert_eq!(CheckId::from_name(id.name()), Some(id));
        }
    }
}
