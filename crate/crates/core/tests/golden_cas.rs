//! Rendered CAS queries for every corpus piece must byte-match the
//! checked-in files. `UPDATE_GOLDEN=1` rewrites them.

mod common;

use common::golden::{check_golden, golden_dir};

#[test]
fn resolve_queries_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    if let Err(m) = check_golden(update) {
        panic!("golden mismatches:\n{}", m.join("\n"));
    }
}

#[test]
fn fenchel_young_piece_is_the_documented_text() {
    let text = std::fs::read_to_string(golden_dir().join("question_fenchel_young.txt")).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(
        first,
        "Resolve[ForAll[{x, y}, Implies[x >= 1 && y >= 0 && y <= 2*Log[x], x*y <= 2*(x*Log[x] + Exp[y])]], Reals]"
    );
}

#[test]
fn series_segments_quantify_parameters_only() {
    let text = std::fs::read_to_string(golden_dir().join("series_double_ladder.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.starts_with("Resolve[ForAll[{h, m}, Implies[h >= 1 && m >= 1, ")));
}
