//! Sessions: stepping through statements, what-if rule applications, undo,
//! invariant checks over the trace, and bounded state-space exploration.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::constraints::{ConstraintCatalog, ConstraintError, ConstraintReport, FormulaVerdict, TemporalFormula};
use crate::dsl::DslError;
use crate::frontend::{self, ElabOptions, Env, ExecError, ParseError, Plan, Statement};
use crate::graph::{InstanceGraph, NodeId, Value};
use crate::iso::{isomorphic, signature, IsoOptions};
use crate::pointer_model::{build_start_state, required_addresses, Binding, Catalog, Declaration, ModelError};
use crate::rules::{apply_rule, find_matches, find_matches_with, Anchors, Diff, Match, Rule, RuleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionConfig {
    /// Free addresses provisioned beyond those the arrays occupy.
    pub free_pool: usize,
    pub strict_c: bool,
    pub materialize_addresses: bool,
    pub ignore_names: bool,
    /// State cap for exploration.
    pub max_states: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            free_pool: 8,
            strict_c: false,
            materialize_addresses: false,
            ignore_names: false,
            max_states: 10_000,
        }
    }
}

impl SessionConfig {
    fn elab(&self) -> ElabOptions {
        ElabOptions {
            strict_c: self.strict_c,
            materialize_addresses: self.materialize_addresses,
        }
    }

    pub fn iso(&self) -> IsoOptions {
        IsoOptions {
            ignore_names: self.ignore_names,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("formula: {0}")]
    Formula(#[from] DslError),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("match index {index} out of range ({count} matches)")]
    BadIndex { index: usize, count: usize },
    #[error("nothing to undo")]
    EmptyHistory,
    #[error("exploration exceeded {0} states")]
    StateBudgetExceeded(usize),
    #[error("rule `{0}` has no match for this statement")]
    NoMatch(String),
}

impl StepError {
    /// Stable machine-readable name of the error.
    pub fn kind(&self) -> &'static str {
        match self {
            StepError::Parse(ParseError::Syntax { .. }) => "SyntaxError",
            StepError::Parse(ParseError::UnsupportedConstruct { .. }) => "UnsupportedConstruct",
            StepError::Exec(e) => match e {
                ExecError::UnboundName(_) => "UnboundName",
                ExecError::NullDereference(_) => "NullDereference",
                ExecError::DanglingReference(_) => "DanglingReference",
                ExecError::TypeMismatch(_) => "TypeMismatch",
                ExecError::IndexOutOfBounds { .. } => "IndexOutOfBounds",
                ExecError::AddressOfUnaddressed(_) => "AddressOfUnaddressed",
                ExecError::InputExhausted => "InputExhausted",
                ExecError::PoolExhausted => "PoolExhausted",
                ExecError::DivisionByZero => "DivisionByZero",
                ExecError::UndefinedBehavior(_) => "UndefinedBehavior",
                ExecError::UnsupportedConstruct(_) => "UnsupportedConstruct",
            },
            StepError::Rule(e) => match e {
                RuleError::Invalid { .. } => "InvalidRule",
                RuleError::RoleConflict { .. } => "RoleConflict",
                RuleError::UnknownAnchor { .. } => "UnknownAnchor",
                RuleError::AnchorTypeMismatch { .. } => "AnchorTypeMismatch",
                RuleError::MissingParam { .. } => "MissingParam",
                RuleError::ParamType { .. } => "ParamType",
                RuleError::StaleMatch { .. } => "StaleMatch",
                RuleError::Graph(_) => "GraphError",
            },
            StepError::Model(ModelError::PoolTooSmall { .. }) => "PoolTooSmall",
            StepError::Model(ModelError::DuplicateName(_)) => "DuplicateName",
            StepError::Model(ModelError::Graph(_)) => "GraphError",
            StepError::Constraint(ConstraintError::UnknownConstraint(_)) => "UnknownConstraint",
            StepError::Constraint(_) => "TypeGraphMismatch",
            StepError::Formula(_) => "SyntaxError",
            StepError::UnknownRule(_) => "UnknownRule",
            StepError::BadIndex { .. } => "BadIndex",
            StepError::EmptyHistory => "EmptyHistory",
            StepError::StateBudgetExceeded(_) => "StateBudgetExceeded",
            StepError::NoMatch(_) => "NoMatch",
        }
    }

    /// Source position for parse errors.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            StepError::Parse(p) => Some(p.position()),
            StepError::Formula(DslError::Syntax { line, col, .. } | DslError::RoleConflict { line, col, .. }) => {
                Some((*line, *col))
            }
            _ => None,
        }
    }

    pub fn is_parse_error(&self) -> bool {
        matches!(self, StepError::Parse(_) | StepError::Formula(_))
    }
}

/// What produced a trace step; enough to replay it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Statement(String),
    WhatIf {
        rule: String,
        index: usize,
        params: BTreeMap<String, Value>,
    },
}

/// One pattern node of a match with a readable description of its image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub role: String,
    pub node: NodeId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSummary {
    pub index: usize,
    pub rule: String,
    pub bindings: Vec<Bound>,
}

impl fmt::Display for MatchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.index, self.rule)?;
        for (i, b) in self.bindings.iter().enumerate() {
            f.write_str(if i == 0 { ": " } else { ", " })?;
            write!(f, "{}={}", b.role, b.label)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub action: Action,
    /// Statement text, or a synthesized description for what-if steps.
    pub statement: String,
    pub rule: Option<String>,
    pub matched: Option<MatchSummary>,
    pub pre: InstanceGraph,
    pub post: InstanceGraph,
    pub diff: Diff,
    /// Well-formedness then referential-integrity reports on `post`.
    pub reports: Vec<ConstraintReport>,
    pub inputs_consumed: usize,
    pub output: Option<String>,
}

impl TraceStep {
    pub fn violations(&self) -> impl Iterator<Item = &ConstraintReport> {
        self.reports.iter().filter(|r| !r.holds())
    }
}

/// Readable label for a node, using the variable names in `env`.
pub fn describe_node(g: &InstanceGraph, env: &Env, n: NodeId) -> String {
    for (name, b) in env {
        match b {
            Binding::Pointer(p) | Binding::Int(p) if *p == n => return name.clone(),
            Binding::Array { array, .. } if *array == n => return name.clone(),
            Binding::Array { first, .. } if *first == n => return alloc::format!("fst({name})"),
            _ => {}
        }
    }
    let name = |o: NodeId| {
        g.attr(o, "name")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
    };
    match g.node_type(n) {
        Some("Address") => {
            let free = g.attr(n, "free") == Some(&Value::Bool(true));
            match g.successors(n, "cont").next().and_then(name) {
                Some(o) => alloc::format!("&{o}"),
                None if free => alloc::format!("{n} (free)"),
                None => n.to_string(),
            }
        }
        Some(_) => name(n).unwrap_or_else(|| n.to_string()),
        None => n.to_string(),
    }
}

pub fn summarize(g: &InstanceGraph, env: &Env, rule: &Rule, m: &Match, index: usize) -> MatchSummary {
    let bindings = m
        .morphism
        .nodes
        .iter()
        .map(|(k, v)| Bound {
            role: rule.nodes[k.0 as usize].name.clone(),
            node: *v,
            label: describe_node(g, env, *v),
        })
        .collect();
    MatchSummary {
        index,
        rule: rule.name.clone(),
        bindings,
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    decls: Vec<Declaration>,
    config: SessionConfig,
    catalog: Catalog,
    constraints: ConstraintCatalog,
    start: InstanceGraph,
    state: InstanceGraph,
    env: Env,
    history: Vec<TraceStep>,
    input: Vec<i64>,
    input_pos: usize,
    output: String,
}

impl Session {
    pub fn new(decls: &[Declaration], config: SessionConfig) -> Result<Self, StepError> {
        let total = required_addresses(decls) + config.free_pool;
        let (start, env) = build_start_state(decls, total)?;
        Ok(Session {
            decls: decls.to_vec(),
            config,
            catalog: Catalog::standard(),
            constraints: ConstraintCatalog::standard(),
            state: start.clone(),
            start,
            env,
            history: Vec::new(),
            input: Vec::new(),
            input_pos: 0,
            output: String::new(),
        })
    }

    pub fn with_input(mut self, input: Vec<i64>) -> Self {
        self.input = input;
        self
    }

    pub fn set_input(&mut self, input: Vec<i64>) {
        self.input = input;
        self.input_pos = 0;
    }

    pub fn declarations(&self) -> &[Declaration] {
        &self.decls
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn constraints(&self) -> &ConstraintCatalog {
        &self.constraints
    }

    pub fn start_state(&self) -> &InstanceGraph {
        &self.start
    }

    pub fn state(&self) -> &InstanceGraph {
        &self.state
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn history(&self) -> &[TraceStep] {
        &self.history
    }

    pub fn input(&self) -> &[i64] {
        &self.input
    }

    pub fn remaining_input(&self) -> &[i64] {
        &self.input[self.input_pos..]
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    /// Start state followed by every post-state.
    pub fn states(&self) -> Vec<&InstanceGraph> {
        core::iter::once(&self.start)
            .chain(self.history.iter().map(|s| &s.post))
            .collect()
    }

    /// Well-formedness and referential-integrity reports for `g`.
    pub fn reports(&self, g: &InstanceGraph) -> Vec<ConstraintReport> {
        let mut r = self.constraints.check_wellformed(g);
        r.extend(self.constraints.check_referential_integrity(g));
        r
    }

    /// The current value of an int variable or the host of a pointer's ref.
    pub fn int_value(&self, name: &str) -> Option<i64> {
        match self.env.get(name)? {
            Binding::Int(n) => self.state.attr(*n, "val")?.as_int(),
            _ => None,
        }
    }

    fn rule(&self, name: &str) -> Result<Rule, StepError> {
        self.catalog
            .get(name)
            .ok_or_else(|| StepError::UnknownRule(name.to_string()))
    }

    /// Parses and executes one statement. On error the session is unchanged.
    pub fn step(&mut self, text: &str) -> Result<&TraceStep, StepError> {
        let stmt = frontend::parse_statement(text)?;
        self.step_statement(&stmt, text.trim())
    }

    pub fn step_statement(&mut self, stmt: &Statement, text: &str) -> Result<&TraceStep, StepError> {
        let plan = frontend::elaborate(stmt, &self.state, &self.env, self.remaining_input(), self.config.elab())?;
        let step = self.execute(plan, Action::Statement(text.to_string()), text.to_string())?;
        Ok(self.push(step))
    }

    fn execute(&self, plan: Plan, action: Action, statement: String) -> Result<TraceStep, StepError> {
        let pre = self.state.clone();
        let (rule, matched, post, diff) = match &plan.call {
            None => (None, None, pre.clone(), Diff::default()),
            Some(call) => {
                let rule = self.rule(&call.rule)?;
                let ms = find_matches_with(&pre, &rule, &call.anchors, &call.params)?;
                let m = ms.first().ok_or_else(|| StepError::NoMatch(call.rule.clone()))?;
                let app = apply_rule(&pre, &rule, m, &call.params)?;
                let summary = summarize(&pre, &self.env, &rule, m, 0);
                (Some(call.rule.clone()), Some(summary), app.graph, app.diff)
            }
        };
        let reports = self.reports(&post);
        Ok(TraceStep {
            action,
            statement,
            rule,
            matched,
            pre,
            post,
            diff,
            reports,
            inputs_consumed: plan.inputs_consumed,
            output: plan.output,
        })
    }

    fn push(&mut self, step: TraceStep) -> &TraceStep {
        self.state = step.post.clone();
        self.input_pos += step.inputs_consumed;
        if let Some(o) = &step.output {
            self.output.push_str(o);
        }
        self.history.push(step);
        self.history.last().expect("just pushed")
    }

    /// Parses the whole program, then executes statement by statement,
    /// stopping at the first failure. Returns the failing statement's index
    /// with its error; parse errors stop before anything runs.
    pub fn run_program(&mut self, src: &str) -> Result<(), (usize, StepError)> {
        let prog = frontend::parse_program(src).map_err(|e| (0, e.into()))?;
        for (i, p) in prog.iter().enumerate() {
            self.step_statement(&p.statement, &p.text).map_err(|e| (i, e))?;
        }
        Ok(())
    }

    /// Current matches of a catalog rule, with anchors described by name.
    pub fn what_if_matches(&self, rule: &str) -> Result<Vec<MatchSummary>, StepError> {
        let r = self.rule(rule)?;
        let ms = find_matches(&self.state, &r, &Anchors::new())?;
        Ok(ms
            .iter()
            .enumerate()
            .map(|(i, m)| summarize(&self.state, &self.env, &r, m, i))
            .collect())
    }

    /// Applies match `index` of `rule` as a step of its own.
    pub fn apply_what_if(
        &mut self,
        rule: &str,
        index: usize,
        params: &BTreeMap<String, Value>,
    ) -> Result<&TraceStep, StepError> {
        let r = self.rule(rule)?;
        let ms = find_matches_with(&self.state, &r, &Anchors::new(), params)?;
        let m = ms.get(index).ok_or(StepError::BadIndex { index, count: ms.len() })?;
        let app = apply_rule(&self.state, &r, m, params)?;
        let summary = summarize(&self.state, &self.env, &r, m, index);
        let statement = alloc::format!("what-if {summary}");
        let step = TraceStep {
            action: Action::WhatIf {
                rule: rule.to_string(),
                index,
                params: params.clone(),
            },
            statement,
            rule: Some(r.name.clone()),
            matched: Some(summary),
            pre: self.state.clone(),
            reports: self.reports(&app.graph),
            post: app.graph,
            diff: app.diff,
            inputs_consumed: 0,
            output: None,
        };
        Ok(self.push(step))
    }

    /// Pops the last step and restores the state before it.
    pub fn undo(&mut self) -> Result<TraceStep, StepError> {
        let step = self.history.pop().ok_or(StepError::EmptyHistory)?;
        self.state = step.pre.clone();
        self.input_pos -= step.inputs_consumed;
        if let Some(o) = &step.output {
            self.output.truncate(self.output.len() - o.len());
        }
        Ok(step)
    }

    /// Re-executes a recorded action.
    pub fn replay(&mut self, action: &Action) -> Result<&TraceStep, StepError> {
        match action {
            Action::Statement(text) => self.step(text),
            Action::WhatIf { rule, index, params } => self.apply_what_if(rule, *index, params),
        }
    }

    /// `G(...)` over the start state and every post-state.
    pub fn model_check(&self, formula: &str) -> Result<FormulaVerdict, StepError> {
        let f = TemporalFormula::parse(formula)?;
        Ok(self.constraints.eval_formula_on_trace(self.states(), &f)?)
    }

    pub fn explore(&self, rules: &[&str], max_depth: usize) -> Result<Lts, StepError> {
        explore(
            &self.state,
            &self.catalog,
            rules,
            max_depth,
            ExploreOptions {
                iso: self.config.iso(),
                max_states: self.config.max_states,
            },
        )
    }
}

/// One batch execution: the session after the run and the first error.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub session: Session,
    pub error: Option<(usize, StepError)>,
}

pub fn run(
    decls: &[Declaration],
    program: &str,
    input: &[i64],
    config: SessionConfig,
) -> Result<RunOutcome, StepError> {
    let mut session = Session::new(decls, config)?.with_input(input.to_vec());
    let error = session.run_program(program).err();
    Ok(RunOutcome { session, error })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    pub rule: String,
    /// Pattern node name and host node in the source state.
    pub bindings: Vec<(String, NodeId)>,
    pub to: usize,
}

/// States reachable by rule applications, one per isomorphism class.
#[derive(Debug, Clone)]
pub struct Lts {
    pub states: Vec<InstanceGraph>,
    /// Breadth-first depth at which each state was first reached.
    pub depth: Vec<usize>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreOptions {
    pub iso: IsoOptions,
    pub max_states: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            iso: IsoOptions::default(),
            max_states: 10_000,
        }
    }
}

/// Breadth-first exploration up to `max_depth` applications.
pub fn explore(
    start: &InstanceGraph,
    catalog: &Catalog,
    rules: &[&str],
    max_depth: usize,
    opts: ExploreOptions,
) -> Result<Lts, StepError> {
    let mut rs = Vec::new();
    for name in rules {
        let r = catalog
            .get(name)
            .ok_or_else(|| StepError::UnknownRule(name.to_string()))?;
        if let Some(p) = r.params.first() {
            return Err(RuleError::MissingParam {
                rule: r.name.clone(),
                param: p.name.clone(),
            }
            .into());
        }
        rs.push(r);
    }
    let mut lts = Lts {
        states: alloc::vec![start.clone()],
        depth: alloc::vec![0],
        transitions: Vec::new(),
    };
    let mut buckets: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    buckets.entry(signature(start, opts.iso)).or_default().push(0);
    let mut queue = VecDeque::from([0usize]);
    let no_params = BTreeMap::new();
    while let Some(i) = queue.pop_front() {
        if lts.depth[i] >= max_depth {
            continue;
        }
        for r in &rs {
            let g = lts.states[i].clone();
            for m in find_matches(&g, r, &Anchors::new())? {
                let next = apply_rule(&g, r, &m, &no_params)?.graph;
                let sig = signature(&next, opts.iso);
                let bucket = buckets.entry(sig).or_default();
                let found = bucket
                    .iter()
                    .copied()
                    .find(|&j| isomorphic(&lts.states[j], &next, opts.iso).is_some());
                let to = match found {
                    Some(j) => j,
                    None => {
                        if lts.states.len() >= opts.max_states {
                            return Err(StepError::StateBudgetExceeded(opts.max_states));
                        }
                        lts.states.push(next);
                        lts.depth.push(lts.depth[i] + 1);
                        let j = lts.states.len() - 1;
                        bucket.push(j);
                        queue.push_back(j);
                        j
                    }
                };
                let bindings = m
                    .morphism
                    .nodes
                    .iter()
                    .map(|(k, v)| (r.nodes[k.0 as usize].name.clone(), *v))
                    .collect();
                lts.transitions.push(Transition {
                    from: i,
                    rule: r.name.clone(),
                    bindings,
                    to,
                });
            }
        }
    }
    Ok(lts)
}

impl Lts {
    pub fn model_check(&self, constraints: &ConstraintCatalog, formula: &str) -> Result<FormulaVerdict, StepError> {
        let f = TemporalFormula::parse(formula)?;
        Ok(constraints.eval_formula_on_trace(self.states.iter(), &f)?)
    }
}
