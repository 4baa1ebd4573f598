//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use advmdp::verify::checks;
use advmdp::verify::fixtures::{self, gap_fixtures};
use advmdp::verify::CheckReport;

const SEED: u64 = 20_240_101;

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_report(r: &CheckReport, keys: &[&str]) -> Outcome {
    let detail =
        keys.iter().filter_map(|k| r.measured.get(*k).map(|v| format!("{k}={v:.6e}"))).collect::<Vec<_>>().join(" ");
    Outcome { passed: r.passed, detail }
}

fn within(limit: Duration, o: Outcome, elapsed: Duration) -> Outcome {
    if elapsed > limit {
        Outcome { passed: false, detail: format!("{} (over the {:?} budget)", o.detail, limit) }
    } else {
        o
    }
}

fn heuristic_gaps() -> Outcome {
    let reports: Vec<CheckReport> = gap_fixtures().iter().map(checks::check_heuristic_suboptimality).collect();
    Outcome {
        passed: reports.len() == 4 && reports.iter().all(|r| r.passed),
        detail: reports
            .iter()
            .map(|r| format!("{}={:.4e}", r.name, r.measured.get("gap").copied().unwrap_or(f64::NAN)))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn all_agree(r: &CheckReport) -> Outcome {
    let mut o = from_report(r, &["agreeing", "max_abs_diff"]);
    o.passed &= r.measured.get("agreeing") == Some(&100.0);
    o
}

fn disk() -> Outcome {
    from_report(
        &checks::check_disk_ordering(SEED),
        &["grid_value", "paad_value", "minbest_gap", "maxworst_gap", "maxdiff_gap", "minq_gap"],
    )
}

fn boundary() -> Outcome {
    from_report(&checks::check_boundary_theorem(100, SEED), &["instances", "holding"])
}

fn polytope() -> Outcome {
    from_report(
        &checks::check_polytope_structure(&fixtures::m_ex_mdp(), 100_000, 50, SEED),
        &["samples", "outside_box", "max_segment_residual", "non_monotone_pairs"],
    )
}

fn efficiency() -> Outcome {
    from_report(
        &checks::check_efficiency(20, 2000, SEED),
        &["paad_median_episodes", "sarl_median_episodes", "paad_reached", "sarl_reached"],
    )
}

fn zero_budget() -> Outcome {
    from_report(&checks::check_zero_budget(50, SEED), &["instances", "max_abs_diff"])
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_all_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let configs = workspace().join("configs");
    let cfg = |name: &str| configs.join(name).display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["verify".into(), "--seed".into(), SEED.to_string(), "--out".into(), "report.json".into()],
        vec!["attack".into(), "--config".into(), cfg("m_ex_attack.json"), "--out".into(), "attack.csv".into()],
        vec!["attack".into(), "--config".into(), cfg("m_ex_disk.json"), "--out".into(), "disk.csv".into()],
        vec![
            "polytope".into(),
            "--config".into(),
            cfg("m_ex_disk.json"),
            "-n".into(),
            "10000".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            "poly.csv".into(),
        ],
        vec!["learncurve".into(), "--config".into(), cfg("chain_learncurve.json"), "--out".into(), "curve.csv".into()],
    ];
    for args in &runs {
        let status = Command::new(env!("CARGO_BIN_EXE_advmdp"))
            .args(args)
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !status.success() {
            return Err(format!("{} exited with {status}", args[0]));
        }
    }
    let files = ["report.json", "attack.csv", "disk.csv", "poly.csv", "poly_adv.csv", "curve.csv", "curve_summary.csv"];
    files
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map(|b| (f.to_string(), b)).map_err(|e| format!("{f}: {e}")))
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (run_all_outputs(a.path()), run_all_outputs(b.path())) {
        (Ok(x), Ok(y)) => {
            let differing: Vec<&str> =
                x.iter().zip(&y).filter(|(p, q)| p.1 != q.1).map(|(p, _)| p.0.as_str()).collect();
            Outcome {
                passed: differing.is_empty(),
                detail: if differing.is_empty() {
                    format!("{} files identical", x.len())
                } else {
                    format!("differing: {}", differing.join(", "))
                },
            }
        }
        (Err(e), _) | (_, Err(e)) => Outcome { passed: false, detail: e },
    }
}

fn main() {
    type Criterion = (&'static str, Option<Duration>, Box<dyn Fn() -> Outcome>);
    let criteria: Vec<Criterion> = vec![
        ("heuristic non-optimality", Some(Duration::from_secs(5)), Box::new(heuristic_gaps)),
        (
            "director/actor optimality",
            Some(Duration::from_secs(60)),
            Box::new(|| all_agree(&checks::check_pamdp_optimality(100, SEED))),
        ),
        ("perturbation-MDP equivalence", None, Box::new(|| all_agree(&checks::check_perturbation_mdp(100, SEED)))),
        ("small-MDP ordering", Some(Duration::from_secs(10)), Box::new(disk)),
        ("boundary theorem", None, Box::new(boundary)),
        ("polytope and line structure", None, Box::new(polytope)),
        ("efficiency ordering", Some(Duration::from_secs(300)), Box::new(efficiency)),
        ("degenerate-budget identity", None, Box::new(zero_budget)),
        ("determinism", None, Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = f();
        let elapsed = start.elapsed();
        if let Some(limit) = budget {
            outcome = within(*limit, outcome, elapsed);
        }
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.2}s) {}",
            i + 1,
            if outcome.passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
