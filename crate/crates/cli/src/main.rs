use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use logchat_cli::config::Config;
use logchat_cli::server::{self, AppState, ServerOptions};
use logchat_cli::state::{file_name, SavedSession, DEFAULT_STATE_DIR};
use logchat_core::eval::{run_benchmark, LiveContext, Manifest};
use logchat_core::orchestrator::{answer_query, open_session};
use logchat_core::parsing::{export_structured_csv, export_templates_csv};
use logchat_core::{Answer, LogCategory, ModelGateway, References, SessionOptions};

/// Ask questions about a log file with an LLM.
#[derive(Parser)]
#[command(name = "logchat", version)]
struct Cli {
    /// TOML config file (default: ./logchat.toml if present).
    #[arg(long, global = true, env = "LOGCHAT_CONFIG")]
    config: Option<PathBuf>,

    /// Answer from a scripted rules file instead of a live model.
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,

    /// Log filter, e.g. `info` or `logchat_core=debug`.
    #[arg(long, global = true, env = "LOGCHAT_LOG", default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Work with one log file from the shell.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
    /// Score answers against reference answers.
    #[command(subcommand)]
    Eval(Eval),
}

#[derive(Args)]
struct StateArg {
    /// Where the current session is recorded.
    #[arg(long, default_value_os_t = PathBuf::from(DEFAULT_STATE_DIR).join("session.json"))]
    state: PathBuf,
}

#[derive(Subcommand)]
enum Analyze {
    /// Parse and index a log file and make it the current session.
    Open {
        file: PathBuf,
        /// Skip log-type detection.
        #[arg(long)]
        category: Option<LogCategory>,
        #[command(flatten)]
        state: StateArg,
    },
    /// Ask a question about the current session.
    Ask {
        question: String,
        /// Print the full answer as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        state: StateArg,
    },
    /// Print the event template table as CSV.
    Events {
        #[command(flatten)]
        state: StateArg,
    },
    /// Print structured rows as CSV, optionally for one event.
    Structured {
        #[arg(long)]
        event: Option<String>,
        #[command(flatten)]
        state: StateArg,
    },
}

#[derive(Subcommand)]
enum Eval {
    /// Score a manifest; writes scores.csv and report.json.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Generate missing answers with the configured backend.
        #[arg(long)]
        live: bool,
        /// Log file for live runs (default: the manifest's `log_file`).
        #[arg(long)]
        log_file: Option<PathBuf>,
        #[arg(long)]
        category: Option<LogCategory>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(&cli.log))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(script) = cli.mock_script {
        config.gateway.mock_script = Some(script);
    }
    match cli.command {
        Command::Analyze(cmd) => analyze(&mut config, cmd),
        Command::Serve { port, host } => {
            if let Some(p) = port {
                config.server.port = p;
            }
            if let Some(h) = host {
                config.server.host = h;
            }
            serve(&config)
        }
        Command::Eval(Eval::Run {
            manifest,
            live,
            log_file,
            category,
            out,
        }) => eval(&config, &manifest, live, log_file, category, &out),
    }
}

fn read_log(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn state_cache_dir(config: &mut Config, state: &Path) {
    if config.engine.cache_dir.is_none() {
        config.engine.cache_dir = state.parent().map(|p| p.join("cache"));
    }
}

fn analyze(config: &mut Config, cmd: Analyze) -> anyhow::Result<()> {
    match cmd {
        Analyze::Open { file, category, state } => {
            state_cache_dir(config, &state.state);
            let gateway = config.gateway()?;
            let opts = SessionOptions {
                category_override: category,
                ..config.session_options()?
            };
            let session = open_session(&file_name(&file), &read_log(&file)?, gateway.as_ref(), &opts)?;
            SavedSession::of(&file, &session)?.save(&state.state)?;
            println!(
                "{}: {} lines, category {}, {} event templates, {} chunk{}",
                session.log_file_name,
                session.raw_lines.len(),
                session.category,
                session.templates.len(),
                session.index.len(),
                if session.index.len() == 1 { "" } else { "s" }
            );
        }
        Analyze::Ask { question, json, state } => {
            state_cache_dir(config, &state.state);
            let gateway = config.gateway()?;
            let session = SavedSession::load(&state.state)?.reopen(gateway.as_ref(), &config.session_options()?)?;
            let answer = answer_query(&session, &question, gateway.as_ref(), &config.query_options())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&answer)?);
            } else {
                print_answer(&answer);
            }
        }
        Analyze::Events { state } => {
            let session = reopen_offline(config, &state.state)?;
            print!("{}", export_templates_csv(&session.templates)?);
        }
        Analyze::Structured { event, state } => {
            let mut session = reopen_offline(config, &state.state)?;
            if let Some(e) = event {
                let id = logchat_core::router::normalize_event_id(&e);
                session.structured.rows.retain(|r| r.event_id == id);
            }
            print!("{}", export_structured_csv(&session.structured)?);
        }
    }
    Ok(())
}

/// Listing commands need no model: the category is on record and the
/// index comes from the cache (or is rebuilt with whatever backend is set).
fn reopen_offline(config: &mut Config, state: &Path) -> anyhow::Result<logchat_core::Session> {
    state_cache_dir(config, state);
    let gateway = config.gateway()?;
    SavedSession::load(state)?.reopen(gateway.as_ref(), &config.session_options()?)
}

fn print_answer(answer: &Answer) {
    println!("{}", answer.text);
    println!();
    match &answer.routing_fallback {
        Some(why) => println!("route: {} (fallback: {why})", answer.route.label()),
        None => println!("route: {}", answer.route.label()),
    }
    match &answer.references {
        Some(References::Lines { result, unknown_ids }) => {
            let more = if result.truncated { format!(", first {} shown", result.shown) } else { String::new() };
            println!("references: {} matching lines{more}", result.total);
            for m in &result.matches {
                println!("  {:>6}  {}", m.line_id, m.text);
            }
            if !unknown_ids.is_empty() {
                println!("unknown events: {}", unknown_ids.join(", "));
            }
        }
        Some(References::Chunks { chunks }) => {
            for c in chunks {
                let (a, b) = c.chunk.line_span;
                println!("references: lines {a}-{b} (score {:.3})", c.score);
            }
        }
        None => {}
    }
}

fn serve(config: &Config) -> anyhow::Result<()> {
    let gateway = config.gateway()?;
    let state = AppState::new(
        gateway,
        config.session_options()?,
        config.query_options(),
        config.server.max_sessions,
    );
    let opts = ServerOptions {
        max_upload_bytes: config.server.max_upload_mb * 1024 * 1024,
        max_sessions: config.server.max_sessions,
    };
    let app = server::router(state, &opts);
    let addr: SocketAddr = format!("{}:{}", config.server.host, config.server.port)
        .parse()
        .context("invalid host/port")?;
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(server::serve(app, addr))
}

fn eval(
    config: &Config,
    manifest_path: &Path,
    live: bool,
    log_file: Option<PathBuf>,
    category: Option<LogCategory>,
    out: &Path,
) -> anyhow::Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let report = if live {
        let log = match (log_file, &manifest.log_file) {
            (Some(p), _) => p,
            (None, Some(rel)) => manifest_path.parent().unwrap_or(Path::new(".")).join(rel),
            (None, None) => bail!("--live needs --log-file or a `log_file` entry in the manifest"),
        };
        let gateway = config.gateway()?;
        let opts = SessionOptions {
            category_override: category,
            ..config.session_options()?
        };
        let session = open_session(&file_name(&log), &read_log(&log)?, gateway.as_ref(), &opts)?;
        let live = LiveContext {
            session: &session,
            gateway: gateway.as_ref(),
            options: config.query_options(),
        };
        run_benchmark(&manifest, Some(&live))?
    } else {
        run_benchmark::<dyn ModelGateway>(&manifest, None)?
    };
    report.write_to(out)?;
    for t in &report.task_means {
        println!(
            "{:<28} n={:<3} cosine {:.3}  rouge1 P {:.3} R {:.3} F1 {:.3}",
            t.task, t.cases, t.cosine, t.rouge1_precision, t.rouge1_recall, t.rouge1_f1
        );
    }
    if let Some(o) = &report.overall {
        println!("{:<28} n={:<3} cosine {:.3}  rouge1 F1 {:.3}", "overall", o.cases, o.cosine, o.rouge1_f1);
    }
    println!("wrote {} and {}", out.join("scores.csv").display(), out.join("report.json").display());
    Ok(())
}
