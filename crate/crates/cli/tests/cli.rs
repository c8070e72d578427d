use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn betti(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betti"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn b1_of_the_genus_two_surface() {
    let v = json(&betti(&[
        "b1",
        data("surface2.pres").to_str().unwrap(),
        "--primes",
        "2,3",
    ]));
    assert_eq!(v["invariants"]["free_rank"], 4);
}

#[test]
fn b1_of_the_free_product_of_cyclic_groups() {
    let v = json(&betti(&[
        "b1",
        data("h_p2q3.pres").to_str().unwrap(),
        "--primes",
        "2,3",
    ]));
    assert_eq!(v["invariants"]["betti_mod"]["2"], 1);
    assert_eq!(v["invariants"]["betti_mod"]["3"], 2);
    assert_eq!(v["p_deficiency"]["2"], serde_json::json!({"num": -1, "den": 2}));
}

#[test]
fn malformed_input_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.pres");
    std::fs::write(&path, "< x, y |\n x^2 q >").unwrap();
    let out = betti(&["b1", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert_eq!(betti(&["b1", "/no/such/file.pres"]).status.code(), Some(2));
    assert_eq!(
        betti(&["b1", data("f2.pres").to_str().unwrap(), "--primes", "4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(betti(&["gradient"]).status.code(), Some(2));
}

#[test]
fn free_group_derived_series_report() {
    let f2 = data("f2.pres");
    let v = json(&betti(&[
        "chain",
        f2.to_str().unwrap(),
        "--derived-p",
        "2",
        "--depth",
        "2",
        "--b1-l2",
        "1",
    ]));
    let rows = v["report"]["rows"].as_array().unwrap();
    let ratios: Vec<&Value> = rows.iter().map(|r| &r["ratios"]["b1_mod"]["2"]).collect();
    let expect = [(2, 1), (5, 4), (129, 128)];
    for (r, (n, d)) in ratios.iter().zip(expect) {
        assert_eq!(**r, serde_json::json!({"num": n, "den": d}));
    }
    for r in rows {
        let gap = &r["ref_gap"]["b1_mod"]["2"];
        assert_eq!(gap["num"], 1);
        assert_eq!(gap["den"], r["index"]);
    }
    assert_eq!(v["checks"]["fp_monotone"]["2"]["monotone"], true);
}

#[test]
fn spec_given_as_json() {
    let f2 = data("f2.pres");
    let spec = r#"{"kind":"cyclic","weights":[1,1],"moduli":[3,9]}"#;
    let v = json(&betti(&[
        "chain",
        f2.to_str().unwrap(),
        "--spec",
        spec,
        "--primes",
        "3",
    ]));
    let indices: Vec<u64> = v["report"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["index"].as_u64().unwrap())
        .collect();
    assert_eq!(indices, vec![1, 3, 9]);
}

#[test]
fn budget_exceeded_is_a_marked_success() {
    let f2 = data("f2.pres");
    let v = json(&betti(&[
        "chain",
        f2.to_str().unwrap(),
        "--derived-p",
        "2",
        "--depth",
        "3",
    ]));
    assert_eq!(v["report"]["truncation"]["reason"], "index_budget");
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 3);
    let v = json(&betti(&[
        "--matrix-budget",
        "10",
        "chain",
        f2.to_str().unwrap(),
        "--derived-p",
        "2",
        "--depth",
        "2",
    ]));
    assert_eq!(v["report"]["truncation"]["reason"], "matrix_budget");
}

#[test]
fn counterexample_matches_closed_forms() {
    let v = json(&betti(&["counterexample", "-p", "2", "-q", "3", "--moduli", "2,4,8"]));
    assert!(v["closed_form"].as_array().unwrap().iter().all(|b| b == true));
    assert!(v["strictly_increasing"].as_array().unwrap().iter().all(|b| b == true));
    let csv = betti(&["--format", "csv", "counterexample", "--moduli", "2,4"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("# decimal columns are display-only"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn groupring_oracle_default_suite() {
    let v = json(&betti(&["oracle-groupring", "--per-group", "60"]));
    assert_eq!(v["violations"], 0);
    assert_eq!(v["demos_match_catalog"], true);
}

#[test]
fn regularity_certificate() {
    let v = json(&betti(&["regularity", data("xx4.pres").to_str().unwrap(), "-p", "2"]));
    assert_eq!(v["certificate"]["status"], "certified");
    assert!(v["certificate"]["witness"].is_object());
}

#[test]
fn construct_first_stage_and_determinism() {
    let args = [
        "--seed",
        "7",
        "construct",
        "-d",
        "2",
        "-p",
        "2",
        "--epsilon",
        "0.9",
        "--stages",
        "1",
    ];
    let a = betti(&args);
    let b = betti(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["completed_stages"], 1);
    let checks = v["stages"][0]["checks"].as_object().unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.values().all(|c| c == true));
    assert_eq!(v["verification"]["nesting"], true);
}

#[test]
fn construct_state_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let log = dir.path().join("log.jsonl");
    let out = betti(&[
        "construct",
        "--stages",
        "1",
        "--state",
        state.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    json(&out);
    let lines = std::fs::read_to_string(&log).unwrap();
    assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
    let v = json(&betti(&[
        "construct",
        "--stages",
        "2",
        "--resume",
        state.to_str().unwrap(),
    ]));
    assert_eq!(v["completed_stages"], 1);
    assert_eq!(v["failure"]["stage"], 2);
}

#[test]
fn csv_is_refused_where_unsupported() {
    let out = betti(&[
        "--format",
        "csv",
        "regularity",
        data("xx4.pres").to_str().unwrap(),
        "-p",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tampered_state_fails_verification_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    json(&betti(&[
        "construct",
        "--stages",
        "1",
        "--state",
        state.to_str().unwrap(),
    ]));
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&state).unwrap()).unwrap();
    v["relator_sets"][0][0] = serde_json::json!([1, 1]);
    std::fs::write(&state, v.to_string()).unwrap();
    let out = betti(&["construct", "--stages", "1", "--resume", state.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
