use std::process::{Command, Output};

fn decomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decomp"))
        .args(args)
        .env_remove("DECOMP_LLM_ENDPOINT")
        .env_remove("WOLFRAMSCRIPT")
        .output()
        .expect("spawn decomp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn prove_fenchel_young_prints_proof_verified() {
    let o = decomp(&["prove", "question_fenchel_young"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "Proof verified"));
    assert!(out.contains("proved with C = 2 over 2 piece(s)"));
}

#[test]
fn series_verb_proves_double_series() {
    let o = decomp(&["series", "series_double_ladder"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("Proof verified"));
}

#[test]
fn false_claim_exits_one_with_counterexample() {
    let o = decomp(&["prove", "question_x_squared"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("counterexample"));
    assert!(!out.contains("Proof verified"));
}

#[test]
fn undecided_claim_exits_two() {
    // True only with C larger than the grid; too large for the falsifier.
    let o = decomp(&["prove", "--stmt", r"\log x \ll 1, x \geq 1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn operational_errors_exit_above_two() {
    let o = decomp(&["prove", "no_such_problem"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown problem id"));
    // Series given to the inequality verb.
    assert_eq!(decomp(&["prove", "series_p_two"]).status.code(), Some(3));
    assert_eq!(decomp(&["prove", "--stmt", r"x \ll"]).status.code(), Some(3));
    assert_eq!(decomp(&["prove", "question_x_squared", "--grid-max", "0"]).status.code(), Some(3));
}

#[test]
fn grid_max_limits_the_constant() {
    // Needs C = 4, so a grid capped at 2 cannot prove it.
    let o = decomp(&["prove", "question_shifted_square", "--grid-max", "2"]);
    assert_ne!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = decomp(&["prove", "question_shifted_square", "--grid-max", "4"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn json_output_is_a_run_record() {
    let o = decomp(&["prove", "question_log_linear", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verdict"]["status"], "proved");
}

#[test]
fn falsify_verb() {
    let o = decomp(&["falsify", "question_product_sum"]);
    assert_eq!(o.status.code(), Some(1));
    let o = decomp(&["falsify", "question_log_linear", "--c", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_writes_table_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.json");
    let o = decomp(&["bench", "question_log", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let table = stdout(&o);
    assert!(table.starts_with("problem"));
    assert!(table.contains("question_log_linear"));
    assert!(table.contains("0 soundness incidents"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["matches_expected"] == true));
}

#[test]
fn record_fixtures_requires_an_endpoint() {
    let o = decomp(&["record-fixtures", "question_log_linear"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exit_codes_match_expected_verdicts_on_the_corpus() {
    use decomp_core::corpus::{default_dir, load_corpus, ExpectedVerdict};
    for e in load_corpus(&default_dir()).unwrap() {
        let verb = if e.parse().unwrap().is_series() { "series" } else { "prove" };
        let o = decomp(&[verb, &e.id]);
        let want = match e.expected_verdict {
            ExpectedVerdict::Proved => 0,
            ExpectedVerdict::Disproved => 1,
        };
        assert_eq!(o.status.code(), Some(want), "{}: {}", e.id, stdout(&o));
    }
}
