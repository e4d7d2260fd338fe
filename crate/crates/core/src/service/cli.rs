//! Command-line interface.

use std::io::{BufRead, IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use super::http::{serve, ServiceState};
use super::registry::AppRegistry;
use super::script::{run_script, Script};
use crate::engine::{Application, Engine, EngineError, Session, SessionOptions, TurnInput};
use crate::model::{parse_bundle, validate_bundle, Severity};
use crate::nrg::{HttpGenerator, DEFAULT_TIMEOUT};
use crate::store::{FileStore, MemoryStore, SessionStore};

#[derive(Debug, Parser)]
#[command(name = "flowkit", version, about = "Build, run and serve conversational applications")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a bundle for structural problems.
    Validate { bundle: PathBuf },
    /// Train the intent models of a bundle and write the pack.
    Train {
        bundle: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Talk to a bundle in the terminal. An empty line is silence.
    Chat {
        bundle: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "local")]
        user: String,
        #[arg(long, default_value = "default")]
        community: String,
        #[arg(long, default_value = "cli")]
        client: String,
        /// Persist the session here instead of keeping it in memory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Base URL of an external response generator.
        #[arg(long)]
        nrg_url: Option<String>,
    },
    /// Play a scripted conversation and compare the responses.
    Simulate { bundle: PathBuf, script: PathBuf },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, env = "FLOWKIT_DATA", default_value = "flowkit-data")]
        data: PathBuf,
        /// Load every bundle in this directory at startup.
        #[arg(long)]
        apps: Option<PathBuf>,
        #[arg(long)]
        nrg_url: Option<String>,
    },
}

pub fn run(cli: Cli) -> ExitCode {
    let code = match cli.command {
        Command::Validate { bundle } => validate(&bundle, &mut std::io::stdout()),
        Command::Train { bundle, output } => train(&bundle, &output),
        Command::Chat {
            bundle,
            seed,
            user,
            community,
            client,
            data,
            nrg_url,
        } => {
            let options = SessionOptions {
                user_id: user,
                community,
                client_tag: client,
                seed,
                session_id: None,
            };
            chat_command(&bundle, options, data.as_deref(), nrg_url.as_deref())
        }
        Command::Simulate { bundle, script } => simulate(&bundle, &script, &mut std::io::stdout()),
        Command::Serve {
            port,
            host,
            data,
            apps,
            nrg_url,
        } => serve_command(SocketAddr::new(host, port), &data, apps.as_deref(), nrg_url.as_deref()),
    };
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        2
    })
}

fn load_app(path: &Path) -> Result<Application, u8> {
    let text = read(path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("app");
    Application::from_text(id, &text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        if let crate::engine::AppError::Invalid(diagnostics) = &e {
            for d in diagnostics {
                eprintln!("{d}");
            }
        }
        1
    })
}

fn engine(store: Arc<dyn SessionStore>, nrg_url: Option<&str>) -> Engine {
    let engine = Engine::new(store);
    match nrg_url {
        Some(url) => engine.with_generator(Arc::new(HttpGenerator::new(url, DEFAULT_TIMEOUT))),
        None => engine,
    }
}

/// Exit code 0 when valid, 1 on problems, 2 when the file cannot be read.
pub fn validate(path: &Path, out: &mut dyn Write) -> u8 {
    let text = match read(path) {
        Ok(text) => text,
        Err(code) => return code,
    };
    let bundle = match parse_bundle(&text) {
        Ok(bundle) => bundle,
        Err(e) => {
            let _ = writeln!(out, "{}: {e}", path.display());
            return 1;
        }
    };
    let diagnostics = validate_bundle(&bundle);
    for d in &diagnostics {
        let _ = writeln!(out, "{d}");
    }
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        let _ = writeln!(out, "{}: {errors} error(s)", path.display());
        1
    } else {
        let _ = writeln!(
            out,
            "{}: ok ({} sub-dialogues, {} warning(s))",
            path.display(),
            bundle.sub_dialogues.len(),
            diagnostics.len()
        );
        0
    }
}

pub fn train(bundle: &Path, output: &Path) -> u8 {
    let app = match load_app(bundle) {
        Ok(app) => app,
        Err(code) => return code,
    };
    if let Err(e) = std::fs::write(output, app.pack.to_json()) {
        eprintln!("error: cannot write {}: {e}", output.display());
        return 2;
    }
    println!(
        "{}: {} local and {} global models",
        output.display(),
        app.pack.local.len(),
        app.pack.global.len()
    );
    0
}

/// Runs a terminal conversation over `input`. User lines are echoed when
/// `echo` is set, so piped sessions read as complete transcripts. End of
/// input closes the session.
pub fn chat(
    app: &Application,
    engine: &Engine,
    options: SessionOptions,
    input: impl BufRead,
    out: &mut dyn Write,
    echo: bool,
) -> Result<Session, EngineError> {
    let (mut session, start) = engine.start_session(app, options)?;
    let say = |out: &mut dyn Write, lines: &[String]| {
        for line in lines {
            let _ = writeln!(out, "bot: {line}");
        }
    };
    say(out, &start.responses);
    let mut lines = input.lines();
    while !session.is_ended() {
        if !echo {
            let _ = write!(out, "user: ");
            let _ = out.flush();
        }
        let Some(Ok(line)) = lines.next() else {
            break;
        };
        let line = line.trim_end_matches('\r').to_string();
        if echo {
            let _ = writeln!(out, "user: {line}");
        }
        let result = engine.process_turn(app, &mut session, TurnInput::text(line))?;
        say(out, &result.responses);
    }
    engine.end_session(&mut session)?;
    Ok(session)
}

fn chat_command(bundle: &Path, options: SessionOptions, data: Option<&Path>, nrg_url: Option<&str>) -> u8 {
    let app = match load_app(bundle) {
        Ok(app) => app,
        Err(code) => return code,
    };
    let store: Arc<dyn SessionStore> = match data.map(FileStore::open) {
        None => Arc::new(MemoryStore::new()),
        Some(Ok(store)) => Arc::new(store),
        Some(Err(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let engine = engine(store, nrg_url);
    let stdin = std::io::stdin();
    let echo = !stdin.is_terminal();
    match chat(&app, &engine, options, stdin.lock(), &mut std::io::stdout(), echo) {
        Ok(session) => match session.error {
            Some(error) => {
                eprintln!("session ended with an error: {error}");
                1
            }
            None => 0,
        },
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Exit code 0 when every expectation holds, 1 on mismatches, 2 when the
/// script cannot be played.
pub fn simulate(bundle: &Path, script: &Path, out: &mut dyn Write) -> u8 {
    let app = match load_app(bundle) {
        Ok(app) => app,
        Err(code) => return code,
    };
    let script = match read(script).map(|text| Script::parse(&text)) {
        Err(code) => return code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
        Ok(Ok(script)) => script,
    };
    match run_script(&app, &Engine::default(), &script, out) {
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
        Ok(failures) if failures.is_empty() => {
            let _ = writeln!(out, "PASS ({} steps)", script.steps.len());
            0
        }
        Ok(failures) => {
            for failure in &failures {
                let _ = write!(out, "{failure}");
            }
            let _ = writeln!(out, "FAIL ({} of {} steps)", failures.len(), script.steps.len());
            1
        }
    }
}

fn serve_command(addr: SocketAddr, data: &Path, apps: Option<&Path>, nrg_url: Option<&str>) -> u8 {
    let store = match FileStore::open(data) {
        Ok(store) => store,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let registry = Arc::new(AppRegistry::new());
    if let Some(dir) = apps {
        if let Err(e) = registry.load_dir(dir) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    let state = ServiceState::new(registry, Arc::new(engine(Arc::new(store), nrg_url)));
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(runtime) => runtime,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        serve(listener, state).await
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
