use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use advmdp::verify::fixtures;
use advmdp_cli::files::{load_mdp, mdp_to_json, parse_mdp};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advmdp"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> String {
    workspace().join("configs").join(name).display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn field(line: &str, i: usize) -> f64 {
    line.split(',').nth(i).unwrap().parse().unwrap()
}

#[test]
fn bundled_fixture_files_match_the_library() {
    for name in fixtures::NAMES {
        let path = workspace().join("fixtures").join(format!("{name}.json"));
        let text = std::fs::read_to_string(&path).unwrap();
        let (mdp, _) = fixtures::by_name(name).unwrap();
        assert_eq!(parse_mdp(&text, &path).unwrap(), mdp, "{name}");
        assert_eq!(text, mdp_to_json(&mdp), "{name}");
    }
}

#[test]
fn mdp_files_round_trip_bit_for_bit() {
    let (mdp, _) = load_mdp("fixture:chain").unwrap();
    let back = parse_mdp(&mdp_to_json(&mdp), Path::new("chain")).unwrap();
    for (a, b) in mdp.rewards.iter().flatten().zip(back.rewards.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in mdp.transitions.iter().flatten().flatten().zip(back.transitions.iter().flatten().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn solve_prints_values_and_actions() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--mdp", "fixture:m_ex", "--mode", "max"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["values"].as_array().unwrap().len(), 2);
    assert_eq!(json["policy"].as_array().unwrap().len(), 2);
}

#[test]
fn input_errors_exit_two_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let missing_gamma =
        write(dir.path(), "g.json", r#"{"num_states":1,"num_actions":1,"rewards":[[1.0]],"transitions":[[[1.0]]]}"#);
    let out = run(&["solve", "--mdp", &missing_gamma], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let malformed = write(dir.path(), "m.json", "{\"num_states\": 1,\n  \"gamma\": }");
    let out = run(&["solve", "--mdp", &malformed], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"num_states":1,"num_actions":1,"gamma":0.5,"rewards":[[1.0]],"transitions":[[[1.0]]],"discount":1}"#,
    );
    let out = run(&["solve", "--mdp", &unknown], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("discount"));

    let bad_row = write(
        dir.path(),
        "r.json",
        r#"{"num_states":1,"num_actions":1,"gamma":0.5,"rewards":[[1.0]],"transitions":[[[0.5]]]}"#,
    );
    let out = run(&["solve", "--mdp", &bad_row], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("transitions[0][0]"));

    let out = run(&["solve"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn attack_on_m_ex_gives_one_row_per_attack_and_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["attack", "--config", &config("m_ex_attack.json"), "--out", "a.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "a.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "attack,state,value,clean_value");
    assert_eq!(lines.len(), 1 + 6 * 2);
    assert!(!csv.contains('\r'));
    let value = |attack: &str, s: usize| {
        lines.iter().find(|l| l.starts_with(&format!("{attack},{s},"))).map(|l| field(l, 2)).unwrap()
    };
    for s in 0..2 {
        assert!((value("optimal", s) - value("paad_exact", s)).abs() <= 1e-8);
    }
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "a.json")).unwrap();
    assert_eq!(json["attacks"].as_array().unwrap().len(), 6);
}

#[test]
fn empty_attack_list_writes_a_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp":"fixture:m_ex","adversary":{"flavor":"policy_ball","radius":0.1},"attacks":[],"seed":1}"#,
    );
    let out = run(&["attack", "--config", &cfg, "--out", "e.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "e.csv"), "attack,state,value,clean_value\n");
}

#[test]
fn zero_budget_attacks_keep_the_clean_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp":"fixture:m_ex","adversary":{"flavor":"state_neighborhood","epsilon":0.0},
            "victim_policy":"fixture",
            "attacks":["minbest","maxworst","minq","maxdiff","optimal","brute_force","paad_exact","sarl","paad"],
            "episodes":5,"seed":3}"#,
    );
    let out = run(&["attack", "--config", &cfg, "--out", "z.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for line in read(dir.path(), "z.csv").lines().skip(1) {
        assert_eq!(field(line, 2), field(line, 3), "{line}");
    }
}

#[test]
fn unknown_attack_and_unknown_config_key_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp":"fixture:m_ex","adversary":{"flavor":"policy_ball","radius":0.1},"attacks":["fgsm"],"seed":1}"#,
    );
    let out = run(&["attack", "--config", &cfg, "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fgsm"));

    let cfg = write(
        dir.path(),
        "d.json",
        r#"{"mdp":"fixture:m_ex","adversary":{"flavor":"policy_ball","radius":0.1},"seed":1,"temperature":2}"#,
    );
    let out = run(&["attack", "--config", &cfg, "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("temperature"));
}

#[test]
fn enumeration_cap_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["attack", "--config", &config("minbest_counterexample.json"), "--out", "m.csv"])
        .env("ADVMDP_ENUM_CAP", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("enumeration of 15 adversaries"));
}

#[test]
fn polytope_writes_points_and_admissible_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["polytope", "--config", &config("m_ex_disk.json"), "-n", "200", "--seed", "5", "--out", "p.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "p.csv").lines().count(), 201);
    assert_eq!(read(dir.path(), "p_adv.csv").lines().count(), 201);

    let out = run(&["polytope", "--mdp", "fixture:m_ex", "-n", "0", "--out", "e.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "e.csv"), "v_s0,v_s1\n");
}

#[test]
fn learncurve_rejects_duplicate_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp":"fixture:chain","adversary":{"flavor":"state_neighborhood","epsilon":4.0},
            "seeds":[1,2,1],"episodes":3,"seed":0}"#,
    );
    let out = run(&["learncurve", "--config", &cfg, "--out", "l.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate seed 1"));
}

#[test]
fn one_episode_gives_curves_of_length_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mdp":"fixture:chain","adversary":{"flavor":"state_neighborhood","epsilon":4.0},
            "seeds":[4,9],"episodes":1,"seed":0}"#,
    );
    let out = run(&["learncurve", "--config", &cfg, "--out", "l.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let curves = read(dir.path(), "l.csv");
    assert_eq!(curves.lines().count(), 1 + 2 * 2);
    assert!(curves.lines().skip(1).all(|l| l.split(',').nth(2) == Some("1")));
    assert_eq!(read(dir.path(), "l_summary.csv").lines().count(), 3);
}

#[test]
fn verify_exit_codes_follow_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--check", "heuristic_suboptimality", "--out", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify", "--check", "heuristic_solution_set", "--force-fail", "--out", "f.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "f.json")).unwrap();
    let failing: Vec<_> = report["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert_eq!(failing.len(), 1);
    assert!(!failing[0]["failures"].as_array().unwrap().is_empty());
    let out = run(&["verify", "--check", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
