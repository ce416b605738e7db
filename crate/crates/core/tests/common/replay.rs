//! Replay-mode model runs against hand-authored fixtures.

use decomp_core::cas::{spawn_count, CasConfig};
use decomp_core::decompose::{render_prompt, transcript_key, HttpTransport, ProposerConfig, ReplayTransport};
use decomp_core::latex::parse_problem;
use decomp_core::pipeline::{prove_pipeline, Environment, RunConfig, RunRecord, Strategy, Verdict};
use serde_json::json;
use std::path::PathBuf;

pub const MODEL: &str = "fixture-model";
pub const FENCHEL_YOUNG: &str = r"x y \ll x \log x + e^y, x \geq 1, y \geq 0";
pub const DOUBLE_SERIES: &str = r"\sum_{d=0}^{\infty} \frac{2d+1}{2h^2 (1 + \frac{d(d+1)}{h^2}) (1 + \frac{d(d+1)}{h^2 m^2})^2} \ll 1 + \log(m^2), h \geq 1, m \geq 1";

/// Hand-authored replies in the declared output format.
pub const REPLIES: [(&str, &str); 2] = [(FENCHEL_YOUNG, "y \\leq 2 \\log x\ny > 2 \\log x\n"), (DOUBLE_SERIES, "h\nh m\n")];

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/llm_replay.jsonl")
}

pub fn fixture_text() -> String {
    let mut out = String::new();
    for (stmt, reply) in REPLIES {
        let prompt = render_prompt(&parse_problem(stmt).unwrap());
        let line = json!({
            "key": transcript_key(MODEL, &prompt),
            "model": MODEL,
            "prompt": prompt,
            "reply": reply,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

pub fn replay_run(stmt: &str, strategy: Strategy) -> RunRecord {
    let t = ReplayTransport::load(&fixture_path()).unwrap();
    let env = Environment {
        transport: Some(&t),
        proposer: ProposerConfig {
            model: MODEL.into(),
            max_reprompts: 2,
        },
        cas: CasConfig::default(),
    };
    let cfg = RunConfig {
        strategy,
        replay: true,
        ..RunConfig::default()
    };
    let mut rec = prove_pipeline("replay", &parse_problem(stmt).unwrap(), &cfg, &env, &mut |_| {});
    // Wall-clock fields are the only permitted difference.
    rec.elapsed_ms = 0;
    for a in &mut rec.attempts {
        for p in &mut a.pieces {
            p.elapsed_ms = 0;
        }
    }
    for t in &mut rec.transcripts {
        t.timestamp = 0;
    }
    rec
}

/// Two replay runs of each fixture problem serialize identically, are
/// proved from the model's split, and touch neither network nor CAS.
pub fn check_determinism() -> Result<(), String> {
    let net = HttpTransport::network_calls();
    let spawns = spawn_count();
    for stmt in [FENCHEL_YOUNG, DOUBLE_SERIES] {
        let a = replay_run(stmt, Strategy::LlmOnly);
        let b = replay_run(stmt, Strategy::LlmOnly);
        if serde_json::to_string(&a).unwrap() != serde_json::to_string(&b).unwrap() {
            return Err(format!("records differ for {stmt}"));
        }
        if a.transcripts.len() != 1 {
            return Err(format!("{} transcripts for {stmt}", a.transcripts.len()));
        }
        let from_model = a.chosen.map(|i| a.attempts[i].source == "llm").unwrap_or(false);
        if !from_model || !matches!(a.verdict, Verdict::Proved { .. }) {
            return Err(format!("{stmt}: {:?}", a.verdict));
        }
    }
    if HttpTransport::network_calls() != net {
        return Err("replay made network calls".into());
    }
    if spawn_count() != spawns {
        return Err("replay spawned the CAS".into());
    }
    Ok(())
}
