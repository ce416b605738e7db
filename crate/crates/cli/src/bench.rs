//! Corpus benchmark: verdicts, constants, timings and soundness checks.

use crate::session::ModelTransport;
use decomp_core::corpus::{CorpusEntry, ExpectedVerdict};
use decomp_core::expr::format_rational;
use decomp_core::pipeline::{prove_pipeline, RunConfig, Verdict, SCHEMA_VERSION};
use decomp_core::prover::{falsify, FalsifyConfig, FalsifyOutcome};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub id: String,
    pub expected: ExpectedVerdict,
    pub verdict: String,
    /// Certified constant for proved problems.
    pub c: Option<String>,
    pub backend: String,
    pub elapsed_ms: u64,
    pub matches_expected: bool,
    pub soundness_incidents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub tag: String,
    pub rows: Vec<BenchRow>,
    pub elapsed_ms: u64,
}

impl BenchReport {
    pub fn proved_true(&self) -> usize {
        self.count(ExpectedVerdict::Proved, "proved")
    }

    pub fn disproved_false(&self) -> usize {
        self.count(ExpectedVerdict::Disproved, "disproved")
    }

    fn count(&self, e: ExpectedVerdict, v: &str) -> usize {
        self.rows.iter().filter(|r| r.expected == e && r.verdict == v).count()
    }

    pub fn incidents(&self) -> usize {
        self.rows.iter().map(|r| r.soundness_incidents.len()).sum()
    }

    pub fn all_match(&self) -> bool {
        self.rows.iter().all(|r| r.matches_expected)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:<10} {:<10} {:>8} {:<8} {:>9}  ok",
            "problem", "expected", "verdict", "C", "backend", "time_ms"
        );
        for r in &self.rows {
            let expected = match r.expected {
                ExpectedVerdict::Proved => "proved",
                ExpectedVerdict::Disproved => "disproved",
            };
            let _ = writeln!(
                out,
                "{:<28} {:<10} {:<10} {:>8} {:<8} {:>9}  {}",
                r.id,
                expected,
                r.verdict,
                r.c.as_deref().unwrap_or("-"),
                r.backend,
                r.elapsed_ms,
                if r.matches_expected && r.soundness_incidents.is_empty() { "yes" } else { "NO" }
            );
        }
        let _ = writeln!(
            out,
            "{} problems, {} true proved, {} false disproved, {} soundness incidents, {} ms",
            self.rows.len(),
            self.proved_true(),
            self.disproved_false(),
            self.incidents(),
            self.elapsed_ms
        );
        out
    }
}

/// `all` selects every entry; otherwise an entry matches by tag or id prefix.
pub fn select<'a>(entries: &'a [CorpusEntry], tag: &str) -> Vec<&'a CorpusEntry> {
    entries
        .iter()
        .filter(|e| tag == "all" || e.tags.iter().any(|t| t == tag) || e.id.starts_with(tag))
        .collect()
}

/// Runs the selected entries. A proved problem is then attacked by the
/// falsifier at its certified constant; any counterexample is a soundness
/// incident.
pub fn run_bench(entries: &[&CorpusEntry], tag: &str, cfg: &RunConfig, transport: &ModelTransport) -> BenchReport {
    let start = Instant::now();
    let env = transport.environment(false);
    let mut rows = Vec::new();
    for e in entries {
        let t = Instant::now();
        let mut incidents = Vec::new();
        let (verdict, c) = match e.parse() {
            Err(err) => (format!("error: {err}"), None),
            Ok(p) => {
                let rec = prove_pipeline(&e.id, &p, cfg, &env, &mut |_| {});
                incidents.extend(rec.soundness_incidents.iter().cloned());
                let c = match &rec.verdict {
                    Verdict::Proved { c, .. } => {
                        if let FalsifyOutcome::Found { counterexample } = falsify(&p, c, &FalsifyConfig::default()) {
                            incidents.push(format!("proved with C = {} but {counterexample}", format_rational(c)));
                        }
                        Some(format_rational(c))
                    }
                    _ => None,
                };
                (rec.verdict.label().to_string(), c)
            }
        };
        let expected = match e.expected_verdict {
            ExpectedVerdict::Proved => "proved",
            ExpectedVerdict::Disproved => "disproved",
        };
        rows.push(BenchRow {
            id: e.id.clone(),
            expected: e.expected_verdict,
            matches_expected: verdict == expected,
            verdict,
            c,
            backend: serde_json::to_value(cfg.backend)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            elapsed_ms: t.elapsed().as_millis() as u64,
            soundness_incidents: incidents,
        });
    }
    BenchReport {
        schema_version: SCHEMA_VERSION,
        tag: tag.to_owned(),
        rows,
        elapsed_ms: start.elapsed().as_millis() as u64,
    }
}
