//! Plain-text rendering of run records.

use decomp_core::decompose::CoverageReport;
use decomp_core::expr::format_rational;
use decomp_core::latex::{render_canonical, render_constraint};
use decomp_core::pipeline::{PieceStatus, RunRecord, Verdict};
use std::fmt::Write;

/// Printed on a global Proved verdict.
pub const PROOF_VERIFIED: &str = "Proof verified";

pub fn coverage_line(c: &CoverageReport) -> String {
    match c {
        CoverageReport::ProvedCover { reason } => format!("covers the domain ({reason})"),
        CoverageReport::SampledCover { n_samples, .. } => {
            format!("covers the domain on {n_samples} samples")
        }
        CoverageReport::NotCover { witness, reason } => {
            let at: Vec<String> = witness.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            format!("NOT a cover ({reason}); witness {}", at.join(", "))
        }
    }
}

pub fn status_line(s: Option<&PieceStatus>) -> String {
    match s {
        None => "not run".into(),
        Some(PieceStatus::Pending) => "pending".into(),
        Some(PieceStatus::Proved { certificate, .. }) => format!("proved, {certificate}"),
        Some(PieceStatus::Unknown { reason }) => format!("unknown: {reason}"),
        Some(PieceStatus::Unavailable { reason }) => format!("unavailable: {reason}"),
    }
}

pub fn verdict_line(v: &Verdict) -> String {
    match v {
        Verdict::Pending => "verdict: pending".into(),
        Verdict::Proved { c, pieces } => {
            format!("verdict: proved with C = {} over {pieces} piece(s)", format_rational(c))
        }
        Verdict::Disproved {
            counterexample,
            c_ceiling,
        } => format!(
            "verdict: disproved for every C <= {}; counterexample {counterexample}",
            format_rational(c_ceiling)
        ),
        Verdict::Unknown { reasons } => format!("verdict: unknown ({})", reasons.join("; ")),
    }
}

/// Full report: statement, assumptions, chosen decomposition, pieces, verdict.
pub fn render_record(r: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "problem {}: {}", r.problem_id, render_canonical(&r.problem));
    let assumptions: Vec<String> = r.problem.region().constraints.iter().map(render_constraint).collect();
    if !assumptions.is_empty() {
        let _ = writeln!(out, "assumptions: {}", assumptions.join(", "));
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    if let Some(a) = r.chosen.and_then(|i| r.attempts.get(i)) {
        let _ = writeln!(
            out,
            "decomposition from {}: {}",
            a.source,
            coverage_line(&a.coverage)
        );
        for (i, p) in a.pieces.iter().enumerate() {
            let _ = writeln!(out, "  [{}] {}", i + 1, p.description);
            if p.builtin.is_some() {
                let _ = writeln!(out, "      builtin: {}", status_line(p.builtin.as_ref()));
            }
            if p.cas.is_some() {
                let _ = writeln!(out, "      cas: {}", status_line(p.cas.as_ref()));
            }
        }
    }
    for s in &r.soundness_incidents {
        let _ = writeln!(out, "SOUNDNESS INCIDENT: {s}");
    }
    let _ = writeln!(out, "{}", verdict_line(&r.verdict));
    let _ = writeln!(out, "elapsed: {} ms", r.elapsed_ms);
    if matches!(r.verdict, Verdict::Proved { .. }) {
        let _ = writeln!(out, "{PROOF_VERIFIED}");
    }
    out
}
