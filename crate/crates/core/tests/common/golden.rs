//! Rendered CAS queries for every corpus piece, compared byte for byte
//! against checked-in files.

use decomp_core::cas::{build_resolve_query, CasConfig, DEFAULT_TIMEOUT_SECS};
use decomp_core::corpus::{default_dir, load_corpus};
use decomp_core::decompose::Decomposition;
use decomp_core::expr::{int, Rational};
use decomp_core::pipeline::{prove_pipeline, Environment, PieceStatus, RunConfig, Strategy};
use decomp_core::problem::Problem;
use decomp_core::prover::{prove_series_with, PieceConfig};
use std::path::PathBuf;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/cas")
}

/// One query per piece of the decomposition the builtin pipeline settles
/// on, at the certified constant (1 when the piece is not proved).
pub fn queries(p: &Problem) -> Vec<String> {
    let env = Environment {
        transport: None,
        cas: CasConfig::default(),
        ..Environment::default()
    };
    let cfg = RunConfig {
        strategy: Strategy::HeuristicOnly,
        ..RunConfig::default()
    };
    let rec = prove_pipeline("golden", p, &cfg, &env, &mut |_| {});
    let a = &rec.attempts[rec.chosen.expect("a covering attempt")];
    let constant = |i: usize| -> Rational {
        a.pieces
            .get(i)
            .and_then(|pr| pr.builtin.as_ref())
            .and_then(PieceStatus::constant)
            .cloned()
            .unwrap_or_else(|| int(1))
    };
    let mut out = Vec::new();
    match (p, &a.decomposition) {
        (Problem::Inequality(q), Decomposition::RegionCover { pieces }) => {
            for (i, r) in pieces.iter().enumerate() {
                let c = constant(i);
                let q = build_resolve_query(&q.lhs, &q.rhs, r, &c, DEFAULT_TIMEOUT_SECS).unwrap();
                out.push(q.text);
            }
        }
        (Problem::Series(s), Decomposition::Breakpoints { ladder }) => {
            let proof = prove_series_with(s, ladder, &cfg.grid(), &PieceConfig::default());
            for (i, seg) in proof.segments.iter().enumerate() {
                let Some(sum) = &seg.segment_sum else { continue };
                let c = constant(i);
                let q = build_resolve_query(sum, &s.target, &s.params_region, &c, DEFAULT_TIMEOUT_SECS).unwrap();
                assert!(!q.text.contains(&format!("{{{}", s.index)), "index leaked into {}", q.text);
                out.push(q.text);
            }
        }
        _ => panic!("decomposition kind does not match the problem"),
    }
    out
}

/// Compares (or with `update`, rewrites) every corpus golden file.
/// Returns the number of files checked or the mismatches.
pub fn check_golden(update: bool) -> Result<usize, Vec<String>> {
    let mut mismatches = Vec::new();
    let entries = load_corpus(&default_dir()).unwrap();
    for e in &entries {
        let p = e.parse().unwrap();
        let mut text = queries(&p).join("\n");
        text.push('\n');
        let path = golden_dir().join(format!("{}.txt", e.id));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        match std::fs::read_to_string(&path) {
            Ok(want) if want == text => {}
            Ok(want) => mismatches.push(format!("{}:\n  want {want:?}\n  got  {text:?}", e.id)),
            Err(err) => mismatches.push(format!("{}: {err}", e.id)),
        }
    }
    if mismatches.is_empty() {
        Ok(entries.len())
    } else {
        Err(mismatches)
    }
}
