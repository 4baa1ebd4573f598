use std::collections::BTreeSet;
use std::time::Instant;

use advmdp::adversary::{enumerate_adversaries, perturbed_policy, sample_admissible, AdversaryModel, PerturbedPolicy};
use advmdp::heuristic::{heuristic_attack, policy_ball_heuristics, HeuristicKind};
use advmdp::mdp::{evaluate_rows, policy_evaluation, sample_policy_values, value_iteration, FiniteMdp, Mode};
use advmdp::optimal::{
    brute_force_optimal, paad_qlearning, sarl_qlearning, solve_optimal_adversary, solve_pamdp_exact, LearnOutcome,
    PamdpSpec,
};
use advmdp::rng::derive_seed;
use advmdp::verify::checks::{median_episodes, THRESHOLD_FRACTION};
use advmdp::verify::{assemble, check_seed, run_check, CheckId, Report, RunConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files::{load_mdp, Experiment};
use crate::output::{real, Table};

/// Default cap on enumerated adversaries.
pub const DEFAULT_CAP: u128 = advmdp::adversary::DEFAULT_ENUM_CAP;
pub const CAP_ENV: &str = "ADVMDP_ENUM_CAP";

/// The enumeration cap, overridden by `ADVMDP_ENUM_CAP` when set.
pub fn enum_cap() -> CliResult<u128> {
    match std::env::var(CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{CAP_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_CAP),
    }
}

pub const EXACT_ATTACKS: [&str; 3] = ["optimal", "brute_force", "paad_exact"];
pub const LEARNED_ATTACKS: [&str; 2] = ["sarl", "paad"];

fn known_attacks() -> Vec<&'static str> {
    HeuristicKind::all().iter().map(|k| k.name()).chain(EXACT_ATTACKS).chain(LEARNED_ATTACKS).collect()
}

fn check_attack_names(names: &[String]) -> CliResult<()> {
    let known = known_attacks();
    match names.iter().find(|n| !known.contains(&n.as_str())) {
        Some(bad) => Err(CliError::Input(format!("unknown attack {bad:?}; known: {}", known.join(", ")))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveOutput {
    pub mode: Mode,
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
}

pub fn cmd_solve(mdp_ref: &str, mode: Mode) -> CliResult<SolveOutput> {
    let (mdp, _) = load_mdp(mdp_ref)?;
    let (pi, v) = value_iteration(&mdp, mode)?;
    Ok(SolveOutput { mode, values: v.0, policy: (0..mdp.num_states).map(|s| pi.argmax_action(s)).collect() })
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackRecord {
    pub attack: String,
    pub values: Vec<f64>,
    /// Neighbor chosen per state, for neighborhood models.
    pub adversary: Option<Vec<usize>>,
    pub rows: Vec<Vec<f64>>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackOutput {
    pub clean_values: Vec<f64>,
    pub attacks: Vec<AttackRecord>,
}

impl AttackOutput {
    /// Columns `attack,state,value,clean_value`, one row per attack and state.
    pub fn csv(&self) -> CliResult<String> {
        let mut t = Table::new(["attack", "state", "value", "clean_value"])?;
        for rec in &self.attacks {
            for (s, v) in rec.values.iter().enumerate() {
                t.row([rec.attack.clone(), s.to_string(), real(*v), real(self.clean_values[s])])?;
            }
        }
        t.into_string()
    }

    pub fn json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("attack output serializes");
        text.push('\n');
        text
    }
}

fn episodes(exp: &Experiment) -> CliResult<usize> {
    exp.config.episodes.ok_or_else(|| CliError::Input("\"episodes\" is required for learned attacks".into()))
}

fn pamdp_spec(exp: &Experiment) -> CliResult<PamdpSpec> {
    Ok(PamdpSpec::new(exp.config.lambda, exp.config.direction_net_k, exp.config.seed)?)
}

fn run_attack(exp: &Experiment, name: &str, cap: u128) -> CliResult<(Option<Vec<usize>>, PerturbedPolicy)> {
    let (mdp, pi) = (&exp.mdp, &exp.pi);
    if let Some(kind) = HeuristicKind::from_name(name) {
        return Ok(match &exp.model {
            AdversaryModel::StateNeighborhood(m) => {
                let h = heuristic_attack(mdp, pi, m, kind)?;
                let rows = perturbed_policy(pi, &h, m)?;
                (Some(h.map), rows)
            }
            AdversaryModel::PolicyBall(m) => (None, policy_ball_heuristics(mdp, pi, m, kind)?),
        });
    }
    if name == "paad_exact" {
        let out = solve_pamdp_exact(mdp, pi, &exp.model, &pamdp_spec(exp)?)?;
        return Ok((out.adversary.map(|h| h.map), out.perturbed));
    }
    let m = exp.model.as_neighborhood()?;
    let h = match name {
        "optimal" => solve_optimal_adversary(mdp, pi, m, cap)?.0,
        "brute_force" => brute_force_optimal(mdp, pi, m, cap)?.0,
        "sarl" => learned_adversary(sarl_qlearning(mdp, pi, m, episodes(exp)?, exp.config.seed)?)?,
        "paad" => learned_adversary(paad_qlearning(mdp, pi, m, episodes(exp)?, exp.config.seed)?)?,
        other => return Err(CliError::Input(format!("unknown attack {other:?}"))),
    };
    let rows = perturbed_policy(pi, &h, m)?;
    Ok((Some(h.map), rows))
}

fn learned_adversary(out: LearnOutcome) -> CliResult<advmdp::adversary::StateAdversary> {
    out.policy.adversary.ok_or_else(|| CliError::Input("learned attacks need a state_neighborhood adversary".into()))
}

pub fn cmd_attack(exp: &Experiment, cap: u128) -> CliResult<AttackOutput> {
    check_attack_names(&exp.config.attacks)?;
    let clean = policy_evaluation(&exp.mdp, &exp.pi)?;
    let mut attacks = Vec::new();
    for name in &exp.config.attacks {
        let start = Instant::now();
        let (adversary, rows) = run_attack(exp, name, cap)?;
        let values = evaluate_rows(&exp.mdp, rows.rows())?;
        attacks.push(AttackRecord {
            attack: name.clone(),
            values: values.0,
            adversary,
            rows: rows.rows().to_vec(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(AttackOutput { clean_values: clean.0, attacks })
}

/// Runs the selected checks concurrently and assembles them in order.
pub fn cmd_verify(seed: u64, ids: &[CheckId], cfg: &RunConfig) -> Report {
    let results: Vec<_> = ids.par_iter().enumerate().map(|(i, &id)| run_check(id, check_seed(seed, i), cfg)).collect();
    assemble(ids, seed, cfg, results)
}

pub fn report_json(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

fn value_table(mdp: &FiniteMdp, points: impl IntoIterator<Item = Vec<f64>>) -> CliResult<String> {
    let mut t = Table::new((0..mdp.num_states).map(|s| format!("v_s{s}")))?;
    for p in points {
        t.row(p.iter().map(|x| real(*x)))?;
    }
    t.into_string()
}

#[derive(Clone, Debug)]
pub struct PolytopeOutput {
    pub policies: String,
    /// Values of admissible perturbed policies, when an adversary is given.
    pub adversarial: Option<String>,
}

/// Values of `n` random policies and, with an experiment, of the victim's
/// admissible perturbations: every one when there are at most `n`, else `n`
/// samples.
pub fn cmd_polytope(
    mdp: &FiniteMdp,
    n: usize,
    seed: u64,
    exp: Option<&Experiment>,
    cap: u128,
) -> CliResult<PolytopeOutput> {
    let points = sample_policy_values(mdp, n, seed)?.into_iter().map(|(_, v)| v.0);
    let policies = value_table(mdp, points)?;
    let adversarial = match exp {
        None => None,
        Some(exp) => {
            let rows: Vec<PerturbedPolicy> = match &exp.model {
                AdversaryModel::StateNeighborhood(m) if m.adversary_count() <= n as u128 => {
                    enumerate_adversaries(m, cap)?
                        .map(|h| perturbed_policy(&exp.pi, &h, m))
                        .collect::<advmdp::Result<_>>()?
                }
                model => sample_admissible(model, &exp.pi, n, derive_seed(seed, 1))?,
            };
            let values: Vec<Vec<f64>> =
                rows.iter().map(|r| evaluate_rows(&exp.mdp, r.rows()).map(|v| v.0)).collect::<advmdp::Result<_>>()?;
            Some(value_table(&exp.mdp, values)?)
        }
    };
    Ok(PolytopeOutput { policies, adversarial })
}

#[derive(Clone, Debug)]
pub struct LearnCurveOutput {
    pub curves: String,
    pub summary: String,
    pub optimum: f64,
    /// Median episodes to the threshold per attacker, in attacker order.
    pub medians: Vec<(String, f64)>,
}

/// Learning curves for the configured learned attackers over every seed.
pub fn cmd_learncurve(exp: &Experiment, cap: u128) -> CliResult<LearnCurveOutput> {
    let attackers: Vec<String> = if exp.config.attacks.is_empty() {
        LEARNED_ATTACKS.iter().map(|s| s.to_string()).collect()
    } else {
        exp.config.attacks.clone()
    };
    if let Some(bad) = attackers.iter().find(|a| !LEARNED_ATTACKS.contains(&a.as_str())) {
        return Err(CliError::Input(format!(
            "learncurve supports only learned attackers ({}), got {bad:?}",
            LEARNED_ATTACKS.join(", ")
        )));
    }
    let seeds = &exp.config.seeds;
    if seeds.is_empty() {
        return Err(CliError::Input("\"seeds\" must list at least one seed".into()));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(CliError::Input(format!("duplicate seed {dup} in \"seeds\"")));
    }
    let episodes = episodes(exp)?;
    let model = exp.model.as_neighborhood()?;
    let optimum = solve_optimal_adversary(&exp.mdp, &exp.pi, model, cap)?.1.mean();

    let jobs: Vec<(String, u64)> = attackers.iter().flat_map(|a| seeds.iter().map(move |&s| (a.clone(), s))).collect();
    let curves: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|(attacker, seed)| {
            let out = match attacker.as_str() {
                "sarl" => sarl_qlearning(&exp.mdp, &exp.pi, model, episodes, *seed),
                _ => paad_qlearning(&exp.mdp, &exp.pi, model, episodes, *seed),
            }?;
            Ok(out.curve)
        })
        .collect::<advmdp::Result<_>>()?;

    let mut table = Table::new(["attacker", "seed", "episode", "attained_value"])?;
    for ((attacker, seed), curve) in jobs.iter().zip(&curves) {
        for (i, v) in curve.iter().enumerate() {
            table.row([attacker.clone(), seed.to_string(), (i + 1).to_string(), real(*v)])?;
        }
    }
    let mut summary = Table::new(["attacker", "median_episodes_to_threshold", "seeds_reaching", "seeds", "optimum"])?;
    let threshold = optimum + THRESHOLD_FRACTION * optimum.abs();
    let mut medians = Vec::new();
    for attacker in &attackers {
        let hits: Vec<Option<usize>> = jobs
            .iter()
            .zip(&curves)
            .filter(|((a, _), _)| a == attacker)
            .map(|(_, c)| c.iter().position(|&v| v <= threshold).map(|i| i + 1))
            .collect();
        let median = median_episodes(&hits, episodes);
        summary.row([
            attacker.clone(),
            real(median),
            hits.iter().filter(|h| h.is_some()).count().to_string(),
            hits.len().to_string(),
            real(optimum),
        ])?;
        medians.push((attacker.clone(), median));
    }
    Ok(LearnCurveOutput { curves: table.into_string()?, summary: summary.into_string()?, optimum, medians })
}
