use serde_json::json;

use super::fixtures::{self, Fixture};
use super::instances::{ball_instance, neighborhood_instance, zero_budget, Instance};
use super::CheckReport;
use crate::adversary::ball::zero_sum_basis;
use crate::adversary::{
    outermost_boundary_member, perturbed_policy, ray_extent, AdversaryModel, NeighborhoodModel, PerturbedPolicy,
    PolicyBallModel, StateAdversary, DEFAULT_ENUM_CAP,
};
use crate::error::Result;
use crate::heuristic::{heuristic_attack, policy_ball_heuristics, HeuristicKind, StateObjective};
use crate::mdp::{
    evaluate_rows, line_segment_residual, monotone_ordered, policy_evaluation, sample_policy_values, segment_distance,
    value_iteration, FiniteMdp, Mode, Policy, ValueVector,
};
use crate::optimal::{
    brute_force_optimal, brute_force_rows, direction_net, paad_qlearning, sarl_qlearning, solve_optimal_adversary,
    solve_pamdp_exact, PamdpSpec,
};
use crate::rng::derive_seed;

/// Strict-gap threshold for non-optimality witnesses.
pub const GAP_TOL: f64 = 1e-6;
/// Agreement tolerance between exact solvers.
pub const EXACT_TOL: f64 = 1e-8;
/// Identity tolerance under a zero budget.
pub const IDENTITY_TOL: f64 = 1e-12;

fn value_under(mdp: &FiniteMdp, pi: &Policy, h: &StateAdversary, model: &NeighborhoodModel) -> Result<ValueVector> {
    evaluate_rows(mdp, perturbed_policy(pi, h, model)?.rows())
}

fn failed(report: &mut CheckReport, detail: serde_json::Value) {
    report.passed = false;
    report.failures.push(detail);
}

fn error_detail(e: &crate::error::Error) -> serde_json::Value {
    json!({ "error": e.to_string() })
}

/// A heuristic's victim value at the fixture's start state exceeds the
/// brute-force optimum by more than [`GAP_TOL`].
pub fn check_heuristic_suboptimality(fixture: &Fixture) -> CheckReport {
    check_heuristic_suboptimality_with(fixture, &|f: &Fixture| heuristic_attack(&f.mdp, &f.pi, &f.model, f.attack))
}

pub fn check_heuristic_suboptimality_with(
    fixture: &Fixture,
    attack: &dyn Fn(&Fixture) -> Result<StateAdversary>,
) -> CheckReport {
    let mut report = CheckReport::new(&format!("heuristic_suboptimality/{}", fixture.name), fixture.claim, GAP_TOL);
    let violated = fixture.violated();
    if !violated.is_empty() {
        failed(&mut report, json!({ "violated_constraints": violated }));
        return report;
    }
    let outcome = (|| -> Result<(f64, f64)> {
        let h = attack(fixture)?;
        let v = value_under(&fixture.mdp, &fixture.pi, &h, &fixture.model)?;
        let (_, opt) = brute_force_optimal(&fixture.mdp, &fixture.pi, &fixture.model, DEFAULT_ENUM_CAP)?;
        Ok((v[fixture.start_state], opt[fixture.start_state]))
    })();
    match outcome {
        Ok((heuristic, optimum)) => {
            let gap = heuristic - optimum;
            report.measure("heuristic_value", heuristic);
            report.measure("optimal_value", optimum);
            report.measure("gap", gap);
            if !(gap > GAP_TOL) {
                failed(&mut report, json!({ "fixture": fixture.name, "gap": gap }));
            }
        }
        Err(e) => failed(&mut report, error_detail(&e)),
    }
    report
}

/// The worst-policy MaxWorst objective ties between two neighbors whose
/// values differ by the closed-form amount, and the worse one is not optimal.
pub fn check_solution_set_gap() -> CheckReport {
    let f = fixtures::maxworst_tie_fixture();
    let mut report = CheckReport::new("heuristic_solution_set/maxworst_worst", f.claim, GAP_TOL);
    let expected = fixtures::THREE_ARM.tie_gap();
    let outcome = (|| -> Result<(Vec<f64>, f64)> {
        let objective = StateObjective::new(&f.mdp, &f.pi, f.attack)?;
        let set = objective.solution_set(&f.pi, &f.model, f.start_state, 1e-12);
        let mut values = Vec::new();
        for t in set {
            let mut h = StateAdversary::identity(f.mdp.num_states);
            h.map[f.start_state] = t;
            values.push(value_under(&f.mdp, &f.pi, &h, &f.model)?[f.start_state]);
        }
        let (_, opt) = brute_force_optimal(&f.mdp, &f.pi, &f.model, DEFAULT_ENUM_CAP)?;
        Ok((values, opt[f.start_state]))
    })();
    match outcome {
        Ok((values, optimum)) => {
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            report.measure("solution_count", values.len() as f64);
            report.measure("value_spread", hi - lo);
            report.measure("expected_spread", expected);
            report.measure("optimal_value", optimum);
            report.measure("worst_member_gap", hi - optimum);
            if values.len() < 2 || (hi - lo - expected).abs() > 1e-10 || !(hi - optimum > GAP_TOL) {
                failed(&mut report, json!({ "values": values, "optimum": optimum }));
            }
        }
        Err(e) => failed(&mut report, error_detail(&e)),
    }
    report
}

/// Exact director/actor solve matches brute force on random deterministic
/// victims.
pub fn check_pamdp_optimality(count: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new(
        "pamdp_optimality",
        "the director/actor construction induces an optimal state adversary",
        EXACT_TOL,
    );
    let mut worst = 0.0_f64;
    let mut passed = 0;
    for i in 0..count {
        let inst = neighborhood_instance(derive_seed(seed, i as u64), true);
        report.seeds.push(inst.seed);
        let outcome = (|| -> Result<f64> {
            let (_, brute) = brute_force_optimal(&inst.mdp, &inst.pi(), inst.neighborhood(), DEFAULT_ENUM_CAP)?;
            let paad = solve_pamdp_exact(&inst.mdp, &inst.pi(), &inst.model, &PamdpSpec::default())?;
            if let Some(h) = &paad.adversary {
                inst.neighborhood().check(h)?;
            }
            Ok(paad.values.max_abs_diff(&brute))
        })();
        match outcome {
            Ok(diff) if diff <= EXACT_TOL => {
                passed += 1;
                worst = worst.max(diff);
            }
            Ok(diff) => {
                worst = worst.max(diff);
                failed(&mut report, json!({ "instance": inst, "max_abs_diff": diff }));
            }
            Err(e) => failed(&mut report, json!({ "instance": inst, "error": e.to_string() })),
        }
    }
    report.measure("instances", count as f64);
    report.measure("agreeing", passed as f64);
    report.measure("max_abs_diff", worst);
    report
}

/// Solving the perturbation MDP matches brute force on the same instances,
/// and its negated optimal value is the victim's minimal value.
pub fn check_perturbation_mdp(count: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new(
        "perturbation_mdp_equivalence",
        "an optimal policy of the perturbation MDP is an optimal policy adversary",
        EXACT_TOL,
    );
    let mut worst = 0.0_f64;
    let mut passed = 0;
    for i in 0..count {
        let inst = neighborhood_instance(derive_seed(seed, i as u64), true);
        report.seeds.push(inst.seed);
        let outcome = (|| -> Result<f64> {
            let pi = inst.pi();
            let (_, brute) = brute_force_optimal(&inst.mdp, &pi, inst.neighborhood(), DEFAULT_ENUM_CAP)?;
            let (h, v) = solve_optimal_adversary(&inst.mdp, &pi, inst.neighborhood(), DEFAULT_ENUM_CAP)?;
            inst.neighborhood().check(&h)?;
            let pmdp = crate::optimal::build_perturbation_mdp(&inst.mdp, &pi, inst.neighborhood(), DEFAULT_ENUM_CAP)?;
            let negated = pmdp.choices.solve(Mode::Max)?.values;
            let sign = negated.0.iter().zip(&brute.0).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
            Ok(v.max_abs_diff(&brute).max(sign))
        })();
        match outcome {
            Ok(diff) if diff <= EXACT_TOL => {
                passed += 1;
                worst = worst.max(diff);
            }
            Ok(diff) => {
                worst = worst.max(diff);
                failed(&mut report, json!({ "instance": inst, "max_abs_diff": diff }));
            }
            Err(e) => failed(&mut report, json!({ "instance": inst, "error": e.to_string() })),
        }
    }
    report.measure("instances", count as f64);
    report.measure("agreeing", passed as f64);
    report.measure("max_abs_diff", worst);
    report
}

/// Heuristic attacks on random instances: admissible, never better for the
/// adversary than the optimum, and each chosen neighbor attains the per-state
/// optimum of its own objective.
pub fn check_heuristic_invariants(count: usize, seed: u64) -> CheckReport {
    let attack = |mdp: &FiniteMdp, pi: &Policy, model: &NeighborhoodModel, kind: HeuristicKind| {
        heuristic_attack(mdp, pi, model, kind)
    };
    check_heuristic_invariants_with(count, seed, &attack, "heuristic_invariants")
}

pub type AttackFn<'a> = dyn Fn(&FiniteMdp, &Policy, &NeighborhoodModel, HeuristicKind) -> Result<StateAdversary> + 'a;

pub fn check_heuristic_invariants_with(count: usize, seed: u64, attack: &AttackFn<'_>, name: &str) -> CheckReport {
    let mut report = CheckReport::new(
        name,
        "heuristic adversaries are admissible, dominated by the optimum, and optimal for their own objective",
        1e-10,
    );
    let mut dominance_failures = 0;
    let mut rescan_failures = 0;
    for i in 0..count {
        let inst = neighborhood_instance(derive_seed(seed, i as u64), i % 2 == 0);
        report.seeds.push(inst.seed);
        let pi = inst.pi();
        let model = inst.neighborhood();
        let outcome = (|| -> Result<()> {
            let (_, opt) = brute_force_optimal(&inst.mdp, &pi, model, DEFAULT_ENUM_CAP)?;
            for kind in HeuristicKind::all() {
                let h = attack(&inst.mdp, &pi, model, kind)?;
                model.check(&h)?;
                let v = value_under(&inst.mdp, &pi, &h, model)?;
                if !opt.dominated_by(&v, 1e-10) {
                    dominance_failures += 1;
                    failed(&mut report, json!({ "instance": inst, "kind": kind.name(), "invariant": "dominance" }));
                }
                let objective = StateObjective::new(&inst.mdp, &pi, kind)?;
                for s in 0..inst.mdp.num_states {
                    let chosen = objective.score(s, pi.row(h.map[s]));
                    let beaten =
                        model.neighbors(s).iter().any(|&t| objective.better(objective.score(s, pi.row(t)), chosen));
                    if beaten {
                        rescan_failures += 1;
                        failed(
                            &mut report,
                            json!({ "instance": inst, "kind": kind.name(), "state": s, "invariant": "per-state optimum" }),
                        );
                        break;
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            failed(&mut report, json!({ "instance": inst, "error": e.to_string() }));
        }
    }
    report.measure("instances", count as f64);
    report.measure("dominance_failures", dominance_failures as f64);
    report.measure("rescan_failures", rescan_failures as f64);
    report
}

/// Outcome of running the suite against a MinBest whose objective sense has
/// been reversed.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationOutcome {
    pub gap_check_passed: bool,
    pub dominance_failures: usize,
    pub rescan_failures: usize,
}

pub fn mutation_outcome(count: usize, seed: u64) -> MutationOutcome {
    let flipped =
        |mdp: &FiniteMdp, pi: &Policy, model: &NeighborhoodModel, kind: HeuristicKind| -> Result<StateAdversary> {
            let objective = StateObjective::new(mdp, pi, kind)?;
            Ok(match kind {
                HeuristicKind::MinBest { .. } => objective.flipped().adversary(pi, model),
                _ => objective.adversary(pi, model),
            })
        };
    let fixture = fixtures::minbest_fixture();
    let gap = check_heuristic_suboptimality_with(&fixture, &|f: &Fixture| flipped(&f.mdp, &f.pi, &f.model, f.attack));
    let inv = check_heuristic_invariants_with(count, seed, &flipped, "mutation");
    MutationOutcome {
        gap_check_passed: gap.passed,
        dominance_failures: inv.measured["dominance_failures"] as usize,
        rescan_failures: inv.measured["rescan_failures"] as usize,
    }
}

/// The suite notices a MinBest with its objective reversed.
pub fn check_mutation_sensitivity(count: usize, seed: u64) -> CheckReport {
    let mut report =
        CheckReport::new("mutation_sensitivity", "a sign-flipped MinBest is caught by the invariant suite", 0.0);
    let out = mutation_outcome(count, seed);
    report.seeds.push(seed);
    report.measure("gap_check_passed", if out.gap_check_passed { 1.0 } else { 0.0 });
    report.measure("dominance_failures", out.dominance_failures as f64);
    report.measure("rescan_failures", out.rescan_failures as f64);
    if out.rescan_failures == 0 {
        failed(&mut report, json!({ "reason": "mutation went unnoticed" }));
    }
    report
}

/// `1 + |rings| · |directions|` candidate rows at one state: the row itself,
/// then points at the given fractions of each ray's extent.
pub fn ball_candidates(p: &[f64], radius: f64, directions: &[Vec<f64>], rings: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![p.to_vec()];
    if radius <= 0.0 {
        return out;
    }
    for &frac in rings {
        for u in directions {
            let t = frac * ray_extent(p, u, radius);
            out.push(p.iter().zip(u).map(|(a, b)| (a + t * b).max(0.0)).collect());
        }
    }
    out
}

pub const BOUNDARY_RINGS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Some element-wise minimizer over a polar candidate net passes the
/// outermost-boundary test.
fn boundary_holds(mdp: &FiniteMdp, pi: &Policy, model: &PolicyBallModel, net_k: usize, seed: u64) -> Result<bool> {
    let directions = direction_net(mdp.num_actions, net_k, seed);
    let candidates: Vec<Vec<Vec<f64>>> = (0..mdp.num_states)
        .map(|s| ball_candidates(pi.row(s), model.radius(s), &directions, &BOUNDARY_RINGS))
        .collect();
    let (_, best) = brute_force_rows(mdp, &candidates)?;
    let tol = 1e-10 * (1.0 + best.0.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    let wrapped = AdversaryModel::PolicyBall(model.clone());
    let sizes: Vec<usize> = candidates.iter().map(Vec::len).collect();
    let mut cursor = vec![0usize; sizes.len()];
    loop {
        let rows: Vec<Vec<f64>> = cursor.iter().enumerate().map(|(s, &i)| candidates[s][i].clone()).collect();
        let v = evaluate_rows(mdp, &rows)?;
        if v.0.iter().zip(&best.0).all(|(a, b)| a - b <= tol)
            && outermost_boundary_member(&wrapped, pi, &PerturbedPolicy::from_rows(rows)?)?
        {
            return Ok(true);
        }
        let mut s = cursor.len();
        loop {
            if s == 0 {
                return Ok(false);
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

/// Value at `state` minimized over a square grid of the given spacing inside
/// the disk around the victim's row. Only three-action rows are supported.
pub fn disk_grid_minimum(
    mdp: &FiniteMdp,
    pi: &Policy,
    state: usize,
    radius: f64,
    spacing: f64,
) -> Result<(Vec<f64>, f64)> {
    let basis = zero_sum_basis(3);
    let p = pi.row(state);
    let steps = (radius / spacing).floor() as i64;
    let mut rows = pi.rows().to_vec();
    let mut best = (p.to_vec(), f64::INFINITY);
    for i in -steps..=steps {
        for j in -steps..=steps {
            let (u, v) = (i as f64 * spacing, j as f64 * spacing);
            if u * u + v * v > radius * radius {
                continue;
            }
            let x: Vec<f64> = (0..3).map(|a| p[a] + u * basis[0][a] + v * basis[1][a]).collect();
            if x.iter().any(|&c| c < 0.0) {
                continue;
            }
            rows[state] = x.clone();
            let val = evaluate_rows(mdp, &rows)?[state];
            if val < best.1 {
                best = (x, val);
            }
        }
    }
    Ok(best)
}

/// Direction-net size for the small-MDP comparison.
pub const DISK_NET_K: usize = 360;
/// Required separation between the exact director solve and each heuristic.
pub const DISK_HEURISTIC_GAP: f64 = 1e-4;
/// Allowed distance from the grid optimum.
pub const DISK_GRID_TOL: f64 = 1e-3;

/// Values at the first state of the two-state example under each perturbation
/// of its radius-0.2 ball.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskComparison {
    pub grid_value: f64,
    pub grid_row: Vec<f64>,
    pub paad_value: f64,
    pub paad_row: Vec<f64>,
    pub heuristics: Vec<(&'static str, f64, Vec<f64>)>,
    /// Largest distance of any attained value vector from the segment
    /// spanned by the two extreme ones.
    pub segment_residual: f64,
}

pub fn disk_comparison(seed: u64) -> Result<DiskComparison> {
    let mdp = fixtures::m_ex_mdp();
    let pi = fixtures::m_ex_policy();
    let model = fixtures::m_ex_disk_model();
    let (grid_row, grid_value) = disk_grid_minimum(&mdp, &pi, 0, fixtures::M_EX_DISK_RADIUS, 1e-3)?;
    let spec = PamdpSpec { direction_net_k: DISK_NET_K, seed, ..PamdpSpec::default() };
    let paad = solve_pamdp_exact(&mdp, &pi, &AdversaryModel::PolicyBall(model.clone()), &spec)?;
    let mut vectors = vec![paad.values.clone()];
    let mut heuristics = Vec::new();
    for kind in [HeuristicKind::MIN_BEST, HeuristicKind::MAX_WORST, HeuristicKind::MinQ, HeuristicKind::MAX_DIFF] {
        let out = policy_ball_heuristics(&mdp, &pi, &model, kind)?;
        let v = evaluate_rows(&mdp, out.rows())?;
        heuristics.push((kind.name(), v[0], out.row(0).to_vec()));
        vectors.push(v);
    }
    let lo = vectors.iter().min_by(|a, b| a[0].total_cmp(&b[0])).expect("nonempty").clone();
    let hi = vectors.iter().max_by(|a, b| a[0].total_cmp(&b[0])).expect("nonempty").clone();
    let segment_residual = vectors.iter().map(|v| segment_distance(&v.0, &lo.0, &hi.0)).fold(0.0, f64::max);
    Ok(DiskComparison {
        grid_value,
        grid_row,
        paad_value: paad.values[0],
        paad_row: paad.perturbed.row(0).to_vec(),
        heuristics,
        segment_residual,
    })
}

/// The exact director solve on the two-state disk is within
/// [`DISK_GRID_TOL`] of the grid optimum and beats MinBest, MaxWorst and
/// MaxDiff by more than [`DISK_HEURISTIC_GAP`].
pub fn check_disk_ordering(seed: u64) -> CheckReport {
    let mut report = CheckReport::new(
        "disk_ordering",
        "the director/actor attack achieves the lowest victim value among the attacks on the small example",
        DISK_GRID_TOL,
    );
    report.seeds.push(seed);
    match disk_comparison(seed) {
        Ok(cmp) => {
            report.measure("grid_value", cmp.grid_value);
            report.measure("paad_value", cmp.paad_value);
            report.measure("paad_minus_grid", cmp.paad_value - cmp.grid_value);
            report.measure("segment_residual", cmp.segment_residual);
            let mut ok = (cmp.paad_value - cmp.grid_value).abs() <= DISK_GRID_TOL;
            for (name, value, _) in &cmp.heuristics {
                report.measure(&format!("{name}_value"), *value);
                report.measure(&format!("{name}_gap"), value - cmp.paad_value);
                if *name != "minq" && !(value - cmp.paad_value > DISK_HEURISTIC_GAP) {
                    ok = false;
                }
            }
            if !ok {
                failed(&mut report, json!({ "paad_row": cmp.paad_row, "grid_row": cmp.grid_row }));
            }
        }
        Err(e) => failed(&mut report, error_detail(&e)),
    }
    report
}

/// Some optimal perturbed policy lies on the outermost boundary, on the
/// two-state disk and on random ball instances.
pub fn check_boundary_theorem(count: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new(
        "boundary_theorem",
        "an optimal policy adversary exists on the outermost boundary of the admissible set",
        1e-9,
    );
    let net_k = 16;
    let mut holding = 0;
    let disk = (|| -> Result<bool> {
        let mdp = fixtures::m_ex_mdp();
        let pi = fixtures::m_ex_policy();
        let model = fixtures::m_ex_disk_model();
        let polar = boundary_holds(&mdp, &pi, &model, 72, seed)?;
        let (row, _) = disk_grid_minimum(&mdp, &pi, 0, fixtures::M_EX_DISK_RADIUS, 1e-3)?;
        let dist = crate::rng::l2(&row.iter().zip(pi.row(0)).map(|(a, b)| a - b).collect::<Vec<_>>());
        Ok(polar && fixtures::M_EX_DISK_RADIUS - dist <= 2e-3)
    })();
    match disk {
        Ok(true) => holding += 1,
        Ok(false) => failed(&mut report, json!({ "instance": "m_ex disk" })),
        Err(e) => failed(&mut report, error_detail(&e)),
    }
    for i in 0..count {
        let inst = ball_instance(derive_seed(seed, i as u64));
        report.seeds.push(inst.seed);
        match boundary_holds(&inst.mdp, &inst.pi(), inst.ball(), net_k, inst.seed) {
            Ok(true) => holding += 1,
            Ok(false) => failed(&mut report, json!({ "instance": inst })),
            Err(e) => failed(&mut report, json!({ "instance": inst, "error": e.to_string() })),
        }
    }
    report.measure("instances", (count + 1) as f64);
    report.measure("holding", holding as f64);
    report
}

/// Sampled values stay inside the solver box; single-state interpolation
/// traces a segment with monotone endpoints.
pub fn check_polytope_structure(mdp: &FiniteMdp, n: usize, pairs: usize, seed: u64) -> CheckReport {
    let mut report =
        CheckReport::new("polytope_structure", "policy values form a polytope with line-segment edges", 1e-8);
    report.seeds.push(seed);
    let outcome = (|| -> Result<()> {
        let (_, hi) = value_iteration(mdp, Mode::Max)?;
        let (_, lo) = value_iteration(mdp, Mode::Min)?;
        let mut outside = 0usize;
        for (_, v) in sample_policy_values(mdp, n, derive_seed(seed, 0))? {
            if !(lo.dominated_by(&v, 1e-10) && v.dominated_by(&hi, 1e-10)) {
                outside += 1;
            }
        }
        report.measure("samples", n as f64);
        report.measure("outside_box", outside as f64);
        if outside > 0 {
            failed(&mut report, json!({ "outside_box": outside }));
        }

        let samples = sample_policy_values(mdp, pairs, derive_seed(seed, 2))?;
        let alternates = sample_policy_values(mdp, pairs, derive_seed(seed, 3))?;
        let mut worst = 0.0_f64;
        let mut non_monotone = 0usize;
        for (i, ((pi0, _), (alt, _))) in samples.iter().zip(&alternates).enumerate() {
            let s = (derive_seed(seed, 4 + i as u64) % mdp.num_states as u64) as usize;
            let pi1 = pi0.clone().with_row(s, alt.row(s).to_vec())?;
            worst = worst.max(line_segment_residual(mdp, pi0, &pi1, 11)?);
            if !monotone_ordered(&policy_evaluation(mdp, pi0)?, &policy_evaluation(mdp, &pi1)?, 1e-10) {
                non_monotone += 1;
            }
        }
        report.measure("pairs", pairs as f64);
        report.measure("max_segment_residual", worst);
        report.measure("non_monotone_pairs", non_monotone as f64);
        if !(worst < 1e-8) || non_monotone > 0 {
            failed(&mut report, json!({ "max_segment_residual": worst, "non_monotone_pairs": non_monotone }));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        failed(&mut report, error_detail(&e));
    }
    report
}

/// Every attack under a zero budget returns the identity perturbation and the
/// clean value.
pub fn check_zero_budget(count: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new(
        "zero_budget_identity",
        "with no perturbation budget every attack leaves the victim unchanged",
        IDENTITY_TOL,
    );
    let mut worst = 0.0_f64;
    let mut instances: Vec<Instance> = vec![
        Instance {
            seed,
            mdp: fixtures::m_ex_mdp(),
            policy: fixtures::m_ex_policy().into_rows(),
            model: AdversaryModel::StateNeighborhood(NeighborhoodModel::identity(2)),
        },
        Instance {
            seed,
            mdp: fixtures::m_ex_mdp(),
            policy: fixtures::m_ex_policy().into_rows(),
            model: AdversaryModel::PolicyBall(PolicyBallModel::new(vec![0.0, 0.0]).expect("zero radii")),
        },
    ];
    for i in 0..count {
        let s = derive_seed(seed, i as u64);
        instances.push(zero_budget(&neighborhood_instance(s, i % 2 == 0)));
        instances.push(zero_budget(&ball_instance(s)));
    }
    for inst in &instances {
        report.seeds.push(inst.seed);
        let outcome = (|| -> Result<bool> {
            let pi = inst.pi();
            let clean = policy_evaluation(&inst.mdp, &pi)?;
            let mut identity = true;
            let mut values: Vec<ValueVector> = Vec::new();
            match &inst.model {
                AdversaryModel::StateNeighborhood(m) => {
                    let mut maps = Vec::new();
                    for kind in HeuristicKind::all() {
                        maps.push(heuristic_attack(&inst.mdp, &pi, m, kind)?);
                    }
                    maps.push(solve_optimal_adversary(&inst.mdp, &pi, m, DEFAULT_ENUM_CAP)?.0);
                    maps.push(brute_force_optimal(&inst.mdp, &pi, m, DEFAULT_ENUM_CAP)?.0);
                    let paad = solve_pamdp_exact(&inst.mdp, &pi, &inst.model, &PamdpSpec::default())?;
                    maps.push(paad.adversary.clone().expect("neighborhood adversary"));
                    maps.push(sarl_qlearning(&inst.mdp, &pi, m, 3, inst.seed)?.policy.adversary.expect("adversary"));
                    maps.push(paad_qlearning(&inst.mdp, &pi, m, 3, inst.seed)?.policy.adversary.expect("adversary"));
                    for h in maps {
                        identity &= h.is_identity();
                        values.push(value_under(&inst.mdp, &pi, &h, m)?);
                    }
                }
                AdversaryModel::PolicyBall(m) => {
                    let mut rows = Vec::new();
                    for kind in HeuristicKind::all() {
                        rows.push(policy_ball_heuristics(&inst.mdp, &pi, m, kind)?);
                    }
                    rows.push(solve_pamdp_exact(&inst.mdp, &pi, &inst.model, &PamdpSpec::default())?.perturbed);
                    for out in rows {
                        identity &= out.rows() == pi.rows();
                        values.push(evaluate_rows(&inst.mdp, out.rows())?);
                    }
                }
            }
            for v in &values {
                worst = worst.max(v.max_abs_diff(&clean));
            }
            Ok(identity && values.iter().all(|v| v.max_abs_diff(&clean) <= IDENTITY_TOL))
        })();
        match outcome {
            Ok(true) => {}
            Ok(false) => failed(&mut report, json!({ "instance": inst })),
            Err(e) => failed(&mut report, json!({ "instance": inst, "error": e.to_string() })),
        }
    }
    report.measure("instances", instances.len() as f64);
    report.measure("max_abs_diff", worst);
    report
}

/// Efficiency comparison on the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyComparison {
    pub optimum: f64,
    /// Episodes to reach the threshold per seed, `None` when never reached.
    pub sarl: Vec<Option<usize>>,
    pub paad: Vec<Option<usize>>,
    pub sarl_final: Vec<f64>,
    pub paad_final: Vec<f64>,
}

/// Median with unreached seeds counted as `episodes + 1`.
pub fn median_episodes(hits: &[Option<usize>], episodes: usize) -> f64 {
    let mut xs: Vec<f64> = hits.iter().map(|h| h.unwrap_or(episodes + 1) as f64).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub const THRESHOLD_FRACTION: f64 = 0.05;

pub fn efficiency_comparison(seeds: &[u64], episodes: usize) -> Result<EfficiencyComparison> {
    let (mdp, pi, model) = fixtures::chain_instance();
    let (_, opt) = solve_optimal_adversary(&mdp, &pi, &model, DEFAULT_ENUM_CAP)?;
    let optimum = opt.mean();
    let mut out = EfficiencyComparison { optimum, sarl: vec![], paad: vec![], sarl_final: vec![], paad_final: vec![] };
    for &seed in seeds {
        let s = sarl_qlearning(&mdp, &pi, &model, episodes, seed)?;
        let p = paad_qlearning(&mdp, &pi, &model, episodes, seed)?;
        out.sarl.push(s.episodes_to_within(optimum, THRESHOLD_FRACTION));
        out.paad.push(p.episodes_to_within(optimum, THRESHOLD_FRACTION));
        out.sarl_final.push(s.curve.last().copied().unwrap_or(f64::NAN));
        out.paad_final.push(p.curve.last().copied().unwrap_or(f64::NAN));
    }
    Ok(out)
}

/// The target-action learner reaches the threshold in fewer episodes than the
/// neighbor-choice learner, by median over seeds.
pub fn check_efficiency(seeds: usize, episodes: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new(
        "efficiency_ordering",
        "learning over target actions converges faster than learning over state perturbations",
        THRESHOLD_FRACTION,
    );
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| derive_seed(seed, i)).collect();
    report.seeds = seed_list.clone();
    match efficiency_comparison(&seed_list, episodes) {
        Ok(cmp) => {
            let sarl = median_episodes(&cmp.sarl, episodes);
            let paad = median_episodes(&cmp.paad, episodes);
            report.measure("optimal_mean_value", cmp.optimum);
            report.measure("sarl_median_episodes", sarl);
            report.measure("paad_median_episodes", paad);
            report.measure("sarl_reached", cmp.sarl.iter().filter(|h| h.is_some()).count() as f64);
            report.measure("paad_reached", cmp.paad.iter().filter(|h| h.is_some()).count() as f64);
            let below = cmp.sarl_final.iter().chain(&cmp.paad_final).filter(|&&v| v < cmp.optimum - 1e-8).count();
            report.measure("runs_below_optimum", below as f64);
            if !(paad < sarl) || below > 0 {
                failed(&mut report, json!({ "sarl": cmp.sarl, "paad": cmp.paad }));
            }
        }
        Err(e) => failed(&mut report, error_detail(&e)),
    }
    report
}

/// A check that always fails, for exercising failure paths.
pub fn forced_failure() -> CheckReport {
    let mut report = CheckReport::new("forced_failure", "failure-path hook", 0.0);
    failed(&mut report, json!({ "reason": "forced" }));
    report
}
