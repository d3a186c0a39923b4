//! Line-oriented interactive session.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use ptrgraph_core::constraints::{RI_FORMULA, WF_FORMULA};
use ptrgraph_core::graph::Value;
use ptrgraph_core::pointer_model::Binding;
use ptrgraph_core::simulator::describe_node;
use ptrgraph_core::{Session, StepError};

use crate::cli::{report_line, write_step};
use crate::dot::{to_dot, Highlight};
use crate::json::TraceDocument;

const HELP: &str = "\
commands:
  <statement>              execute a C statement, e.g. agep = &age[1];
  step <statement>         same as above
  undo                     revert the last step
  matches <rule>           list the current matches of a rule
  whatif <rule> <i> [k=v]  apply match i of a rule as a step
  check [formula]          constraint reports, or G(...) over the trace
  rules                    list the rule catalog
  state                    variable values and pointer targets
  history                  executed steps
  input <n,n,...>          replace the scanf input
  dot [file]               current state as DOT
  trace [file]             trace as JSON
  help                     this text
  quit                     leave";

pub struct Repl {
    session: Session,
    prompt: bool,
}

impl Repl {
    pub fn new(session: Session) -> Self {
        Repl { session, prompt: false }
    }

    /// Print `> ` before reading each line.
    pub fn prompt(&mut self, on: bool) {
        self.prompt = on;
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn run(&mut self, input: impl BufRead, out: &mut dyn Write) -> io::Result<()> {
        if self.prompt {
            writeln!(out, "type `help` for commands")?;
            write!(out, "> ")?;
            out.flush()?;
        }
        for line in input.lines() {
            let line = line?;
            if !self.command(line.trim(), out)? {
                break;
            }
            if self.prompt {
                write!(out, "> ")?;
                out.flush()?;
            }
        }
        Ok(())
    }

    /// Executes one command line; returns false on `quit`.
    pub fn command(&mut self, line: &str, out: &mut dyn Write) -> io::Result<bool> {
        if line.is_empty() || line.starts_with("//") {
            return Ok(true);
        }
        let (cmd, rest) = match line.split_once(char::is_whitespace) {
            Some((c, r)) => (c, r.trim()),
            None => (line, ""),
        };
        match cmd {
            "quit" | "exit" => return Ok(false),
            "help" => writeln!(out, "{HELP}")?,
            "step" => self.step(rest, out)?,
            "undo" => match self.session.undo() {
                Ok(t) => writeln!(out, "undid: {}", t.statement)?,
                Err(e) => error(out, &e)?,
            },
            "matches" => match self.session.what_if_matches(rest) {
                Ok(ms) if ms.is_empty() => writeln!(out, "no matches for {rest}")?,
                Ok(ms) => {
                    for m in ms {
                        writeln!(out, "{m}")?;
                    }
                }
                Err(e) => error(out, &e)?,
            },
            "whatif" => self.what_if(rest, out)?,
            "check" => self.check(rest, out)?,
            "rules" => {
                for r in self.session.catalog().rules() {
                    writeln!(out, "{:<30} {}", r.name, r.description)?;
                }
            }
            "state" => self.state(out)?,
            "history" => {
                for (i, t) in self.session.history().iter().enumerate() {
                    writeln!(
                        out,
                        "{:>3}  {:<24} {}",
                        i + 1,
                        t.statement,
                        t.rule.as_deref().unwrap_or("-")
                    )?;
                }
            }
            "input" => {
                let parsed: Result<Vec<i64>, _> = rest
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect();
                match parsed {
                    Ok(v) => {
                        self.session.set_input(v);
                        writeln!(out, "input: {:?}", self.session.remaining_input())?;
                    }
                    Err(e) => writeln!(out, "error: {e}")?,
                }
            }
            "dot" => {
                let hl = match self.session.history().last() {
                    Some(t) => Highlight::new().diff(&t.diff).witnesses(&t.reports),
                    None => Highlight::new(),
                };
                emit(out, rest, &to_dot(self.session.state(), &hl))?;
            }
            "trace" => {
                let doc = TraceDocument::from_session(&self.session, None);
                emit(
                    out,
                    rest,
                    &serde_json::to_string_pretty(&doc).expect("trace serializes"),
                )?;
            }
            _ => self.step(line, out)?,
        }
        Ok(true)
    }

    fn step(&mut self, text: &str, out: &mut dyn Write) -> io::Result<()> {
        let n = self.session.history().len() + 1;
        match self.session.step(text) {
            Ok(t) => write_step(out, n, t),
            Err(e) => error(out, &e),
        }
    }

    fn what_if(&mut self, args: &str, out: &mut dyn Write) -> io::Result<()> {
        let mut words = args.split_whitespace();
        let (Some(rule), Some(index)) = (words.next(), words.next()) else {
            return writeln!(out, "usage: whatif <rule> <index> [param=value ...]");
        };
        let Ok(index) = index.parse::<usize>() else {
            return writeln!(out, "error: `{index}` is not a match index");
        };
        let mut params = BTreeMap::new();
        for w in words {
            let Some((k, v)) = w.split_once('=') else {
                return writeln!(out, "error: expected param=value, found `{w}`");
            };
            let v = match v {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                _ => match v.parse::<i64>() {
                    Ok(i) => Value::Int(i),
                    Err(_) => Value::Str(v.to_string()),
                },
            };
            params.insert(k.to_string(), v);
        }
        let n = self.session.history().len() + 1;
        match self.session.apply_what_if(rule, index, &params) {
            Ok(t) => write_step(out, n, t),
            Err(e) => error(out, &e),
        }
    }

    fn check(&mut self, formula: &str, out: &mut dyn Write) -> io::Result<()> {
        if formula.is_empty() {
            for r in self.session.reports(self.session.state()) {
                writeln!(out, "{}", report_line(&r))?;
            }
            for f in [WF_FORMULA, RI_FORMULA] {
                self.formula(f, out)?;
            }
            return Ok(());
        }
        self.formula(formula, out)
    }

    fn formula(&self, f: &str, out: &mut dyn Write) -> io::Result<()> {
        match self.session.model_check(f) {
            Ok(v) if v.holds => writeln!(out, "{f}: holds on all {} states", self.session.history().len() + 1),
            Ok(v) => {
                writeln!(out, "{f}: violated at state {}", v.violating_state.unwrap_or(0))?;
                for r in v.reports.iter().filter(|r| !r.holds()) {
                    writeln!(out, "  {}", report_line(r))?;
                }
                Ok(())
            }
            Err(e) => error(out, &e),
        }
    }

    fn state(&self, out: &mut dyn Write) -> io::Result<()> {
        let g = self.session.state();
        let env = self.session.env();
        let val = |n| g.attr(n, "val").and_then(Value::as_int);
        let target = |p| match g.successors(p, "ref").next() {
            Some(a) => describe_node(g, env, a),
            None => "null".to_string(),
        };
        for d in self.session.declarations() {
            let name = d.name();
            match env.get(name) {
                Some(Binding::Int(n)) => writeln!(out, "{name} = {}", val(*n).unwrap_or(0))?,
                Some(Binding::Pointer(p)) => writeln!(out, "{name} -> {}", target(*p))?,
                Some(Binding::Array { first, cells, .. }) => {
                    let vals: Vec<String> = cells
                        .iter()
                        .map(|c| match g.successors(*c, "cont").next().and_then(val) {
                            Some(v) => v.to_string(),
                            None => "?".to_string(),
                        })
                        .collect();
                    writeln!(out, "{name} = {{ {} }}, fst -> {}", vals.join(", "), target(*first))?;
                }
                None => {}
            }
        }
        writeln!(
            out,
            "{} nodes, {} edges, {} steps",
            g.node_count(),
            g.edge_count(),
            self.session.history().len()
        )
    }
}

fn error(out: &mut dyn Write, e: &StepError) -> io::Result<()> {
    writeln!(out, "error [{}]: {e}", e.kind())
}

fn emit(out: &mut dyn Write, path: &str, text: &str) -> io::Result<()> {
    if path.is_empty() {
        return writeln!(out, "{}", text.trim_end());
    }
    match std::fs::write(path, text) {
        Ok(()) => writeln!(out, "wrote {path}"),
        Err(e) => writeln!(out, "error: {path}: {e}"),
    }
}
