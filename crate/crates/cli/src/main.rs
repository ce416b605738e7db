use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use decomp_cli::bench::{run_bench, select};
use decomp_cli::report::render_record;
use decomp_cli::server::{serve, AppState, ServerConfig};
use decomp_cli::session::{resolve_target, run_config, ModelTransport};
use decomp_core::corpus::{default_dir, load_corpus};
use decomp_core::decompose::{llm_propose, HttpTransport, ProposerConfig, RecordingTransport};
use decomp_core::expr::{format_rational, parse_rational_str, Rational};
use decomp_core::pipeline::{prove_pipeline, Backend, RunConfig, Strategy};
use decomp_core::prover::{falsify, FalsifyConfig, FalsifyOutcome, GridSpec};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit code for operational errors.
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "decomp", version, about = "Verify asymptotic estimates by domain decomposition")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Problem store directory.
    #[arg(long, global = true, env = "DECOMP_CORPUS")]
    corpus: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Prove an inequality `f \ll g`.
    Prove(ProveArgs),
    /// Prove a series estimate.
    Series(ProveArgs),
    /// Search for a counterexample at a fixed constant.
    Falsify {
        id: Option<String>,
        #[arg(long)]
        stmt: Option<String>,
        /// Constant to attack; defaults to the grid ceiling.
        #[arg(long, value_parser = parse_rational)]
        c: Option<Rational>,
        #[arg(long, default_value_t = 2048)]
        samples: usize,
    },
    /// Run the corpus (or entries with a tag or id prefix) and print a table.
    Bench {
        #[arg(default_value = "all")]
        tag: String,
        /// Machine-readable results file.
        #[arg(long, default_value = "bench_results.json")]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Capture live model replies for the corpus as replay fixtures.
    RecordFixtures {
        #[arg(default_value = "all")]
        tag: String,
        #[arg(long, default_value = "fixtures/llm.jsonl")]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
        /// Write finished run records here.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Replay fixtures; forces replay mode for every run.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProveArgs {
    /// Corpus problem id.
    id: Option<String>,
    /// Inline LaTeX statement instead of an id.
    #[arg(long)]
    stmt: Option<String>,
    /// Print the run record as JSON instead of the text report.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct RunFlags {
    /// Largest constant tried by the grid search.
    #[arg(long, value_parser = parse_rational)]
    grid_max: Option<Rational>,
    #[arg(long, value_enum, default_value_t = BackendArg::Builtin)]
    backend: BackendArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::HeuristicFirst)]
    strategy: StrategyArg,
    /// Replay model replies from a JSONL fixture file; no live calls.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Ignore cached CAS replies.
    #[arg(long)]
    no_cas_cache: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Builtin,
    Cas,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    HeuristicFirst,
    LlmFirst,
    LlmOnly,
    HeuristicOnly,
}

impl RunFlags {
    fn config(&self) -> RunConfig {
        let base = RunConfig {
            grid_max: self.grid_max.clone(),
            backend: match self.backend {
                BackendArg::Builtin => Backend::Builtin,
                BackendArg::Cas => Backend::Cas,
                BackendArg::Both => Backend::Both,
            },
            strategy: match self.strategy {
                StrategyArg::HeuristicFirst => Strategy::HeuristicFirst,
                StrategyArg::LlmFirst => Strategy::LlmFirst,
                StrategyArg::LlmOnly => Strategy::LlmOnly,
                StrategyArg::HeuristicOnly => Strategy::HeuristicOnly,
            },
            ..RunConfig::default()
        };
        run_config(base, self.replay.as_ref())
    }
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    parse_rational_str(s).ok_or_else(|| format!("not a rational number: {s}"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let corpus = cli.corpus.unwrap_or_else(default_dir);
    match cli.verb {
        Verb::Prove(a) => prove(&corpus, a, false),
        Verb::Series(a) => prove(&corpus, a, true),
        Verb::Falsify { id, stmt, c, samples } => {
            let t = resolve_target(&corpus, id.as_deref(), stmt.as_deref())?;
            let c = c.unwrap_or_else(|| GridSpec::standard().ceiling().clone());
            let cfg = FalsifyConfig {
                samples,
                ..FalsifyConfig::default()
            };
            match falsify(&t.problem, &c, &cfg) {
                FalsifyOutcome::Found { counterexample } => {
                    println!("counterexample for C = {}: {counterexample}", format_rational(&c));
                    Ok(1)
                }
                FalsifyOutcome::NotFound { samples } => {
                    println!(
                        "no counterexample for C = {} in {samples} samples",
                        format_rational(&c)
                    );
                    Ok(2)
                }
            }
        }
        Verb::Bench { tag, out, run } => {
            let entries = load_corpus(&corpus)?;
            let chosen = select(&entries, &tag);
            if chosen.is_empty() {
                bail!("no corpus entry matches '{tag}'");
            }
            let transport = ModelTransport::select(run.replay.as_deref())?;
            let report = run_bench(&chosen, &tag, &run.config(), &transport);
            print!("{}", report.table());
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("results written to {}", out.display());
            Ok(if report.all_match() && report.incidents() == 0 { 0 } else { 1 })
        }
        Verb::RecordFixtures { tag, out } => {
            let live = HttpTransport::from_env().context("record-fixtures needs a live model endpoint")?;
            if let Some(dir) = out.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let rec = RecordingTransport::new(live, out.clone());
            let entries = load_corpus(&corpus)?;
            let cfg = ProposerConfig::default();
            for e in select(&entries, &tag) {
                let p = e.parse()?;
                match llm_propose(&p, &cfg, &rec) {
                    Ok((d, _)) => println!("{}: {}", e.id, d.describe(&p).join(" | ")),
                    Err(err) => println!("{}: {err}", e.id),
                }
            }
            println!("fixtures appended to {}", out.display());
            Ok(0)
        }
        Verb::Serve { addr, store, replay } => {
            let transport = ModelTransport::select(replay.as_deref())?;
            let state = AppState::new(ServerConfig {
                corpus_dir: corpus,
                store_dir: store,
                transport,
                replay: replay.is_some(),
            });
            eprintln!("listening on http://{addr}");
            tokio::runtime::Runtime::new()?.block_on(serve(state, addr))?;
            Ok(0)
        }
    }
}

fn prove(corpus: &std::path::Path, a: ProveArgs, series: bool) -> Result<u8> {
    let t = resolve_target(corpus, a.id.as_deref(), a.stmt.as_deref())?;
    if t.problem.is_series() != series {
        let (want, verb) = if series { ("a series", "prove") } else { ("an inequality", "series") };
        bail!("'{}' is not {want}; use `decomp {verb}`", t.id);
    }
    let cfg = a.run.config();
    cfg.validate().map_err(anyhow::Error::msg)?;
    let transport = ModelTransport::select(a.run.replay.as_deref())?;
    let env = transport.environment(a.run.no_cas_cache);
    let rec = prove_pipeline(&t.id, &t.problem, &cfg, &env, &mut |_| {});
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rec)?);
    } else {
        print!("{}", render_record(&rec));
    }
    Ok(rec.verdict.exit_code() as u8)
}
