use advmdp::adversary::{
    outermost_boundary_member, perturbed_policy, AdversaryModel, NeighborhoodModel, DEFAULT_ENUM_CAP,
};
use advmdp::mdp::{FiniteMdp, Policy};
use advmdp::optimal::brute_force_optimal;
use advmdp::verify::checks::{self, disk_comparison, mutation_outcome};
use advmdp::verify::fixtures::{self, gap_fixtures};
use advmdp::verify::{run_checks, CheckId, RunConfig};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn every_fixture_shows_its_frozen_gap() {
    let expected = [("minbest", 0.036), ("maxworst", 0.0576), ("minq", 0.0576), ("maxdiff", 0.072)];
    let fixtures = gap_fixtures();
    assert_eq!(fixtures.len(), expected.len());
    for (f, (name, gap)) in fixtures.iter().zip(expected) {
        assert_eq!(f.name, name);
        let report = checks::check_heuristic_suboptimality(f);
        assert!(report.passed, "{name}: {:?}", report.measured);
        assert!(close(report.measured["gap"], gap, 1e-12), "{name}: {}", report.measured["gap"]);
    }
}

#[test]
fn worst_policy_solution_set_spreads_by_the_closed_form() {
    let report = checks::check_solution_set_gap();
    assert!(report.passed);
    assert!(close(report.measured["value_spread"], fixtures::THREE_ARM.tie_gap(), 1e-12));
}

#[test]
fn disk_comparison_matches_frozen_values() {
    let cmp = disk_comparison(0).unwrap();
    assert!(close(cmp.grid_value, 1.3787914794135405, 1e-12));
    assert!(close(cmp.paad_value, 1.3787112457324644, 1e-9));
    let frozen = [
        ("minbest", 1.397538892342079),
        ("maxworst", 1.411259384633586),
        ("minq", 1.379818538238045),
        ("maxdiff", 1.690947021023124),
    ];
    for ((name, value, row), (want_name, want)) in cmp.heuristics.iter().zip(frozen) {
        assert_eq!(*name, want_name);
        assert!(close(*value, want, 1e-9), "{name}: {value}");
        let dist = row.iter().zip(fixtures::m_ex_policy().row(0)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist <= fixtures::M_EX_DISK_RADIUS + 1e-9);
    }
    assert!(cmp.segment_residual < 1e-9);
}

#[test]
fn disk_optimum_does_not_depend_much_on_the_net_seed() {
    let values: Vec<f64> = (0..5).map(|s| disk_comparison(s).unwrap().paad_value).collect();
    let spread =
        values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    assert!(spread < 1e-4, "{values:?}");
}

#[test]
fn reversed_minbest_passes_the_gap_check_but_fails_the_rescan() {
    let out = mutation_outcome(20, 3);
    assert!(out.gap_check_passed);
    assert!(out.rescan_failures > 0);
}

#[test]
fn discrete_neighborhood_minimizer_can_sit_inside() {
    // Moving state 0 to state 1's row only helps the victim, so the identity is
    // the unique minimizer, yet a strictly farther admissible row exists.
    let mdp = FiniteMdp::new(
        0.9,
        vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        vec![vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![0.0, 1.0]]],
    )
    .unwrap();
    let pi = Policy::new(vec![vec![0.2, 0.8], vec![0.9, 0.1]]).unwrap();
    let model = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![1]]).unwrap();
    let (h, _) = brute_force_optimal(&mdp, &pi, &model, DEFAULT_ENUM_CAP).unwrap();
    assert!(h.is_identity());
    let rows = perturbed_policy(&pi, &h, &model).unwrap();
    let wrapped = AdversaryModel::StateNeighborhood(model);
    assert!(!outermost_boundary_member(&wrapped, &pi, &rows).unwrap());
}

#[test]
fn reports_are_deterministic() {
    let cfg = RunConfig {
        instances: 10,
        polytope_samples: 500,
        polytope_pairs: 5,
        chain_seeds: 2,
        chain_episodes: 50,
        force_fail: false,
    };
    let ids = [CheckId::PamdpOptimality, CheckId::BoundaryTheorem, CheckId::PolytopeStructure, CheckId::ZeroBudget];
    let a = serde_json::to_string(&run_checks(&ids, 11, &cfg)).unwrap();
    let b = serde_json::to_string(&run_checks(&ids, 11, &cfg)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_state_polytope_is_a_segment() {
    let mdp = FiniteMdp::new(0.5, vec![vec![1.0, -1.0, 0.0]], vec![vec![vec![1.0]; 3]]).unwrap();
    let report = checks::check_polytope_structure(&mdp, 200, 10, 4);
    assert!(report.passed, "{:?}", report.failures);
}
