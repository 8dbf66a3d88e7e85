use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use genie_core::app::{foodordering, AppBundle};
use genie_core::datetime::{Clock, DateTime, FixedClock, SystemClock};
use genie_core::eval::{load_dataset, parse_dataset, run_eval};
use genie_core::nl::{parse_utterance_in, CompletionBackend, HttpBackend, MockBackend, PromptBuilder, Slot};
use genie_core::session::{Backends, CommandResult, Runtime};
use genie_core::ui::TapPoint;

#[derive(Parser)]
#[command(name = "genie", version, about = "Multimodal command runtime")]
struct Cli {
    /// Bundled app name or a directory with seed.json / examples.json.
    #[arg(long, global = true, default_value = foodordering::NAME)]
    app: String,

    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,

    /// Utterance -> completion JSON map for the mock backend.
    #[arg(long, global = true)]
    fixture: Option<PathBuf>,

    /// Clock for the session: an ISO timestamp, or `system`. Defaults to the
    /// app's reference time.
    #[arg(long, global = true)]
    now: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive session.
    Repl,
    /// Print the canonical command for an utterance.
    Parse {
        utterance: String,
        /// Class of the item the user is pointing at.
        #[arg(long)]
        context: Option<String>,
    },
    /// Run a literal command without any language model.
    Exec {
        dsl: String,
        /// Print the full wire result instead of the value.
        #[arg(long)]
        json: bool,
    },
    /// Score the parser on a labelled dataset.
    Eval {
        /// JSON array of {utterance, dsl, context_class?}; defaults to the
        /// app's bundled dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Exit non-zero when the exact-match rate is below this.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Backend queries in flight at once.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Print the class-definition part of the parser prompt.
    Schema {
        /// Print the whole parser prompt for this utterance instead.
        #[arg(long)]
        prompt: Option<String>,
    },
}

type Fallible<T> = Result<T, String>;

fn clock(app: &AppBundle, now: Option<&str>) -> Fallible<Arc<dyn Clock>> {
    Ok(match now {
        None => Arc::new(FixedClock(app.reference_time)),
        Some("system") => Arc::new(SystemClock),
        Some(iso) => Arc::new(FixedClock(
            iso.parse::<DateTime>().map_err(|e| format!("--now: {e}"))?,
        )),
    })
}

fn mock_backend(cli: &Cli) -> Fallible<MockBackend> {
    if let Some(path) = &cli.fixture {
        return MockBackend::from_path(path).map_err(|e| e.to_string());
    }
    let local = Path::new(&cli.app).join("fixture.json");
    if local.is_file() {
        return MockBackend::from_path(local).map_err(|e| e.to_string());
    }
    MockBackend::from_json_str(foodordering::FIXTURE).map_err(|e| e.to_string())
}

fn backends(cli: &Cli) -> Fallible<Backends> {
    match cli.backend {
        BackendKind::Mock => Ok(Backends::same(Arc::new(mock_backend(cli)?))),
        BackendKind::Http => {
            let parser = HttpBackend::from_env(Slot::Parser).map_err(|e| e.to_string())?;
            let responder = HttpBackend::from_env(Slot::Responder).map_err(|e| e.to_string())?;
            Ok(Backends {
                parser: Arc::new(parser),
                responder: Arc::new(responder),
            })
        }
    }
}

/// A backend that refuses every call, for commands that must not use one.
struct Offline;

impl CompletionBackend for Offline {
    fn complete(&self, _: &str, _: &[&str], _: usize) -> Result<String, genie_core::nl::BackendError> {
        Err(genie_core::nl::BackendError::Config("no backend in this mode".into()))
    }
}

fn print_result(out: &mut impl Write, result: &CommandResult) -> io::Result<()> {
    if let Some(dsl) = &result.dsl {
        writeln!(out, "  {dsl}")?;
    }
    writeln!(out, "{}", result.feedback)?;
    let wire = result.to_wire();
    if !wire["render"].is_null() {
        writeln!(out, "  [render {}]", wire["render"])?;
    } else if let Some(reason) = wire["no_render"].as_str() {
        writeln!(out, "  [no render: {reason}]")?;
    }
    Ok(())
}

fn repl(runtime: &Runtime) -> Fallible<()> {
    let mut session = runtime.new_session("repl").map_err(|e| e.to_string())?;
    let stdin = io::stdin();
    let mut out = io::stdout();
    let mut taps: Vec<TapPoint> = Vec::new();
    eprintln!("commands: :exec <dsl>  :tap <x> <y>  :screen <file.json>  :quit");
    loop {
        print!("> ");
        out.flush().map_err(|e| e.to_string())?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line).map_err(|e| e.to_string())? == 0 {
            break;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let result = if let Some(rest) = line.strip_prefix(":exec ") {
            runtime.execute_dsl(&mut session, rest, &std::mem::take(&mut taps))
        } else if let Some(rest) = line.strip_prefix(":tap ") {
            let nums: Vec<f64> = rest.split_whitespace().filter_map(|n| n.parse().ok()).collect();
            match nums[..] {
                [x, y] => taps.push(TapPoint::new(x, y, taps.len())),
                _ => eprintln!("usage: :tap <x> <y>"),
            }
            continue;
        } else if let Some(path) = line.strip_prefix(":screen ") {
            match std::fs::read_to_string(path.trim())
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            {
                Ok(snapshot) => session.update_screen(snapshot),
                Err(e) => eprintln!("{e}"),
            }
            continue;
        } else if line == ":quit" || line == ":q" {
            break;
        } else {
            runtime.handle_command(&mut session, line, &std::mem::take(&mut taps))
        };
        print_result(&mut out, &result).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Fallible<ExitCode> {
    let app = AppBundle::load(&cli.app).map_err(|e| e.to_string())?;
    let clock = clock(&app, cli.now.as_deref())?;
    match &cli.command {
        Command::Schema { prompt } => {
            let prompts = PromptBuilder::new(&app.registry, &app.examples);
            match prompt {
                Some(u) => println!("{}", prompts.parser_prompt(u)),
                None => print!("{}", prompts.schema()),
            }
        }
        Command::Exec { dsl, json } => {
            let runtime = Runtime::new(app, Backends::same(Arc::new(Offline)), clock);
            let mut session = runtime.new_session("exec").map_err(|e| e.to_string())?;
            let result = runtime.execute_dsl(&mut session, dsl, &[]);
            if *json {
                println!("{}", result.to_wire());
            } else if let Some(err) = &result.error {
                eprintln!("{}: {}", err.code, err.message);
            } else {
                let value = result.value.as_ref().expect("successful result has a value");
                println!("{}", session.store.describe_value(value));
            }
            if !result.is_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Parse { utterance, context } => {
            let backends = backends(&cli)?;
            let prompts = PromptBuilder::new(&app.registry, &app.examples);
            match parse_utterance_in(utterance, context.as_deref(), &prompts, &app.registry, backends.parser.as_ref()) {
                Ok(outcome) => println!("{}", outcome.dsl),
                Err(e) => {
                    eprintln!("{}: {e}", e.code());
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Eval {
            dataset,
            threshold,
            out,
            parallel,
        } => {
            let records = match dataset {
                Some(path) => load_dataset(path),
                None => {
                    let local = Path::new(&cli.app).join("dataset.json");
                    if local.is_file() {
                        load_dataset(local)
                    } else {
                        parse_dataset(foodordering::DATASET)
                    }
                }
            }
            .map_err(|e| e.to_string())?;
            let backends = backends(&cli)?;
            let report = run_eval(&app, &records, backends.parser.as_ref(), *parallel).map_err(|e| e.to_string())?;
            print!("{}", report.to_text());
            if let Some(path) = out {
                std::fs::write(path, report.to_json()).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            if report.exact_rate < *threshold {
                eprintln!("exact match {:.3} is below threshold {threshold}", report.exact_rate);
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Repl => {
            let runtime = Runtime::new(app, backends(&cli)?, clock);
            repl(&runtime)?;
        }
        Command::Serve { addr } => {
            let runtime = Runtime::new(app, backends(&cli)?, clock);
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(genie_core::service::serve(runtime, *addr))
                .map_err(|e| e.to_string())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
