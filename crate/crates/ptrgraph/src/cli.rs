//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 constraint violation,
//! 3 runtime error, 4 parse error.

use std::io::{IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use ptrgraph_core::constraints::ConstraintCatalog;
use ptrgraph_core::frontend::parse_declarations;
use ptrgraph_core::simulator::{run, TraceStep};
use ptrgraph_core::{ConstraintReport, Declaration, Session, SessionConfig, StepError, TemporalFormula};

use crate::dot::{to_dot, Highlight};
use crate::json::{self, ErrorDoc, FormatError, TraceDocument};
use crate::repl::Repl;
use crate::service::{self, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "ptrgraph",
    version,
    about = "Step through C pointer programs as graph transformations"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Free addresses available beyond those the arrays occupy
    #[arg(long, global = true, default_value_t = 8)]
    pub pool: usize,
    /// Compare states without their `name` attributes
    #[arg(long, global = true)]
    pub ignore_names: bool,
    /// Report writes through null pointers as undefined behaviour
    #[arg(long, global = true)]
    pub strict_c: bool,
    /// Give `&x` of a plain int variable an address from the pool
    #[arg(long, global = true)]
    pub materialize_addresses: bool,
    /// State cap for exploration
    #[arg(long, global = true, default_value_t = 10_000)]
    pub max_states: usize,
}

impl From<&ConfigArgs> for SessionConfig {
    fn from(a: &ConfigArgs) -> Self {
        SessionConfig {
            free_pool: a.pool,
            strict_c: a.strict_c,
            materialize_addresses: a.materialize_addresses,
            ignore_names: a.ignore_names,
            max_states: a.max_states,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a program statement by statement
    Run {
        decls: PathBuf,
        program: PathBuf,
        /// Integers consumed by scanf, e.g. `5,7`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        stdin_ints: Vec<i64>,
        /// Write the trace as JSON
        #[arg(long)]
        export_trace: Option<PathBuf>,
        /// Write one DOT file per executed statement into this directory
        #[arg(long)]
        dot_frames: Option<PathBuf>,
    },
    /// Interactive session: step, undo, matches, whatif, check
    Repl {
        decls: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        stdin_ints: Vec<i64>,
    },
    /// Report well-formedness and referential integrity of a graph file
    Check {
        graph: PathBuf,
        /// Print the reports as JSON
        #[arg(long)]
        json: bool,
    },
    /// Breadth-first state-space exploration from the start state
    Explore {
        decls: PathBuf,
        /// Rules to apply; defaults to every catalog rule without parameters
        #[arg(long, value_delimiter = ',')]
        rules: Vec<String>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// `G(...)` formula to check over the explored states
        #[arg(long)]
        check: Option<String>,
    },
    /// Start the HTTP session service
    Serve {
        #[arg(long, env = "PTRGRAPH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Persist sessions as JSON files in this directory
        #[arg(long, env = "PTRGRAPH_DATA_DIR")]
        data_dir: Option<PathBuf>,
        /// Idle seconds before a session is evicted from memory
        #[arg(long = "session-ttl", env = "PTRGRAPH_SESSION_TTL_SECS", default_value_t = 3600)]
        session_ttl_secs: u64,
    },
}

/// Parses `args` and runs the command, writing to `out` and `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

struct Failure(i32, String);

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(EXIT_USAGE, e.to_string())
    }
}

fn step_failure(e: &StepError) -> Failure {
    let code = if e.is_parse_error() { EXIT_PARSE } else { EXIT_RUNTIME };
    Failure(code, format!("{}: {e}", e.kind()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load_decls(path: &Path) -> Result<Vec<Declaration>, Failure> {
    let text = read(path)?;
    parse_declarations(&text).map_err(|e| Failure(EXIT_PARSE, format!("{}:{e}", path.display())))
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let config = SessionConfig::from(&cli.config);
    match &cli.command {
        Command::Run {
            decls,
            program,
            stdin_ints,
            export_trace,
            dot_frames,
        } => {
            let decls = load_decls(decls)?;
            let src = read(program)?;
            let outcome = run(&decls, &src, stdin_ints, config).map_err(|e| step_failure(&e))?;
            let s = &outcome.session;
            for (i, step) in s.history().iter().enumerate() {
                write_step(out, i + 1, step)?;
            }
            if !s.output().is_empty() {
                writeln!(out, "output:")?;
                write!(out, "{}", s.output())?;
                if !s.output().ends_with('\n') {
                    writeln!(out)?;
                }
            }
            let error_doc = outcome.error.as_ref().map(|(i, e)| ErrorDoc {
                statement: Some(*i),
                ..ErrorDoc::from(e)
            });
            if let Some(path) = export_trace {
                let doc = TraceDocument::from_session(s, error_doc);
                write_file(path, &serde_json::to_string_pretty(&doc).expect("trace serializes"))?;
            }
            if let Some(dir) = dot_frames {
                std::fs::create_dir_all(dir).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", dir.display())))?;
                for (i, step) in s.history().iter().enumerate() {
                    let hl = Highlight::new().diff(&step.diff).witnesses(&step.reports);
                    write_file(&dir.join(format!("frame-{:03}.dot", i + 1)), &to_dot(&step.post, &hl))?;
                }
            }
            if let Some((i, e)) = &outcome.error {
                let f = step_failure(e);
                if e.is_parse_error() {
                    return Err(f);
                }
                return Err(Failure(f.0, format!("statement {}: {}", i + 1, f.1)));
            }
            let violated = s.history().iter().any(|t| t.violations().next().is_some());
            Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
        }
        Command::Repl { decls, stdin_ints } => {
            let decls = load_decls(decls)?;
            let session = Session::new(&decls, config)
                .map_err(|e| step_failure(&e))?
                .with_input(stdin_ints.clone());
            let stdin = std::io::stdin();
            let interactive = stdin.is_terminal();
            let mut repl = Repl::new(session);
            repl.prompt(interactive);
            repl.run(stdin.lock(), out)?;
            Ok(EXIT_OK)
        }
        Command::Check { graph, json } => {
            let text = read(graph)?;
            let g = json::graph_from_json(&text).map_err(|e| {
                let code = match e {
                    FormatError::UnsupportedVersion(_) | FormatError::SchemaViolation(_) => EXIT_PARSE,
                };
                Failure(code, format!("{}: {e}", graph.display()))
            })?;
            let cc = ConstraintCatalog::standard();
            let mut reports = cc.check_wellformed(&g);
            reports.extend(cc.check_referential_integrity(&g));
            if *json {
                let docs = json::reports(&reports);
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&docs).expect("reports serialize")
                )?;
            } else {
                for r in &reports {
                    writeln!(out, "{}", report_line(r))?;
                }
            }
            Ok(if reports.iter().all(ConstraintReport::holds) {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            })
        }
        Command::Explore {
            decls,
            rules,
            depth,
            check,
        } => {
            let decls = load_decls(decls)?;
            let s = Session::new(&decls, config).map_err(|e| step_failure(&e))?;
            if let Some(f) = check {
                let parsed = TemporalFormula::parse(f).map_err(|e| step_failure(&e.into()))?;
                s.constraints()
                    .validate_formula(&parsed)
                    .map_err(|e| step_failure(&e.into()))?;
            }
            let names: Vec<&str> = if rules.is_empty() {
                s.catalog()
                    .rules()
                    .filter(|r| r.params.is_empty())
                    .map(|r| r.name.as_str())
                    .collect()
            } else {
                rules.iter().map(String::as_str).collect()
            };
            let lts = s.explore(&names, *depth).map_err(|e| step_failure(&e))?;
            writeln!(out, "rules: {}", names.join(", "))?;
            writeln!(out, "states: {}", lts.states.len())?;
            writeln!(out, "transitions: {}", lts.transitions.len())?;
            for d in 0..=*depth {
                let n = lts.depth.iter().filter(|&&x| x == d).count();
                writeln!(out, "depth {d}: {n} new")?;
            }
            if let Some(f) = check {
                let v = lts.model_check(s.constraints(), f).map_err(|e| step_failure(&e))?;
                if v.holds {
                    writeln!(out, "{f}: holds")?;
                } else {
                    let at = v.violating_state.unwrap_or(0);
                    writeln!(out, "{f}: violated in state {at} (depth {})", lts.depth[at])?;
                    for r in v.reports.iter().filter(|r| !r.holds()) {
                        writeln!(out, "  {}", report_line(r))?;
                    }
                    return Ok(EXIT_VIOLATION);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Serve {
            port,
            host,
            data_dir,
            session_ttl_secs,
        } => {
            let cfg = ServiceConfig {
                data_dir: data_dir.clone(),
                ttl: Duration::from_secs(*session_ttl_secs),
            };
            let addr = SocketAddr::new(*host, *port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                let _ = writeln!(err, "listening on http://{}", listener.local_addr()?);
                service::serve(listener, cfg).await
            })?;
            Ok(EXIT_OK)
        }
    }
}

pub fn report_line(r: &ConstraintReport) -> String {
    if r.holds() {
        return format!("ok        {}", r.name);
    }
    let mut s = format!("VIOLATED  {}", r.name);
    if let Some(w) = &r.witness {
        let parts: Vec<String> = w.bindings().iter().map(|(k, n)| format!("{k}={n}")).collect();
        s.push_str(&format!(" ({})", parts.join(", ")));
    }
    s
}

pub fn write_step(out: &mut dyn Write, index: usize, step: &TraceStep) -> std::io::Result<()> {
    let rule = step.rule.as_deref().unwrap_or("-");
    writeln!(out, "{index:>3}  {:<24} {rule}", step.statement)?;
    if let Some(m) = &step.matched {
        writeln!(out, "       match {m}")?;
    }
    for r in step.violations() {
        writeln!(out, "       {}", report_line(r))?;
    }
    if let Some(o) = &step.output {
        writeln!(out, "       printed {:?}", o)?;
    }
    Ok(())
}
