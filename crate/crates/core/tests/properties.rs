mod common;

use common::props;
use decomp_core::corpus::{default_dir, load_corpus};
use decomp_core::latex::{parse_problem, render_canonical};

#[test]
fn normalize_is_idempotent() {
    props::normalize_idempotent(1000).unwrap();
}

#[test]
fn normalize_preserves_values() {
    props::normalize_preserves_values(1000).unwrap();
}

#[test]
fn derivative_matches_finite_differences() {
    props::derivative_matches_finite_differences(1000).unwrap();
}

#[test]
fn interval_evaluation_encloses_samples() {
    props::interval_encloses_samples(1000).unwrap();
}

#[test]
fn latex_round_trip() {
    props::latex_round_trip(1000).unwrap();
}

#[test]
fn monotonicity_claims_hold_on_samples() {
    props::monotonicity_sound(300).unwrap();
}

#[test]
fn regime_bounds_replay() {
    props::regime_bounds_replay().unwrap();
}

#[test]
fn corpus_statements_round_trip_through_canonical_form() {
    for e in load_corpus(&default_dir()).unwrap() {
        let p = e.parse().unwrap();
        let text = render_canonical(&p);
        assert_eq!(parse_problem(&text).unwrap(), p, "{} via {text}", e.id);
    }
}
