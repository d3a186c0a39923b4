//! Versioned JSON documents: graphs, traces, reports and persisted sessions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use ptrgraph_core::constraints::FormulaVerdict;
use ptrgraph_core::graph::{EdgeId, InstanceGraph, NodeId, Value};
use ptrgraph_core::pointer_model::{build_type_graph, TYPE_GRAPH_NAME};
use ptrgraph_core::rules::Diff;
use ptrgraph_core::simulator::{Action, MatchSummary, TraceStep};
use ptrgraph_core::{ConstraintReport, Declaration, Session, SessionConfig, StepError};

pub const VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("unsupported document version {0} (expected {VERSION})")]
    UnsupportedVersion(u64),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

fn schema(msg: impl std::fmt::Display) -> FormatError {
    FormatError::SchemaViolation(msg.to_string())
}

/// Checks the `version` field, then decodes the document.
pub fn decode<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(schema)?;
    match raw.get("version").map(serde_json::Value::as_u64) {
        Some(Some(VERSION)) => {}
        Some(Some(v)) => return Err(FormatError::UnsupportedVersion(v)),
        Some(None) => return Err(schema("`version` must be a non-negative integer")),
        None => return Err(schema("missing `version`")),
    }
    serde_json::from_value(raw).map_err(schema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl From<&Value> for AttrValue {
    fn from(v: &Value) -> Self {
        match v {
            Value::Int(i) => AttrValue::Int(*i),
            Value::Bool(b) => AttrValue::Bool(*b),
            Value::Str(s) => AttrValue::Str(s.clone()),
        }
    }
}

impl From<AttrValue> for Value {
    fn from(v: AttrValue) -> Self {
        match v {
            AttrValue::Int(i) => Value::Int(i),
            AttrValue::Bool(b) => Value::Bool(b),
            AttrValue::Str(s) => Value::Str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: u64,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: u64,
    pub label: String,
    pub src: u64,
    pub tgt: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GraphDocument {
    pub version: u64,
    pub type_graph: String,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl GraphDocument {
    pub fn from_graph(g: &InstanceGraph) -> Self {
        GraphDocument {
            version: VERSION,
            type_graph: g.types().name().to_string(),
            nodes: g
                .nodes()
                .map(|(id, n)| NodeDoc {
                    id: id.0,
                    ty: n.ty.clone(),
                    attrs: n.attrs.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
                })
                .collect(),
            edges: g
                .edges()
                .map(|(id, e)| EdgeDoc {
                    id: id.0,
                    label: e.label.clone(),
                    src: e.src.0,
                    tgt: e.tgt.0,
                })
                .collect(),
        }
    }

    pub fn to_graph(&self) -> Result<InstanceGraph, FormatError> {
        if self.version != VERSION {
            return Err(FormatError::UnsupportedVersion(self.version));
        }
        if self.type_graph != TYPE_GRAPH_NAME {
            return Err(schema(format!("unknown type graph `{}`", self.type_graph)));
        }
        let mut g = InstanceGraph::new(build_type_graph());
        for n in &self.nodes {
            let attrs = n.attrs.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect();
            g.insert_node_with_id(NodeId(n.id), &n.ty, attrs)
                .map_err(|e| schema(format!("node {}: {e}", n.id)))?;
        }
        for e in &self.edges {
            for end in [e.src, e.tgt] {
                if !g.contains_node(NodeId(end)) {
                    return Err(schema(format!("edge {} refers to missing node {end}", e.id)));
                }
            }
            g.insert_edge_with_id(EdgeId(e.id), NodeId(e.src), &e.label, NodeId(e.tgt))
                .map_err(|err| schema(format!("edge {}: {err}", e.id)))?;
        }
        Ok(g)
    }
}

pub fn graph_to_json(g: &InstanceGraph) -> String {
    serde_json::to_string_pretty(&GraphDocument::from_graph(g)).expect("graph documents serialize")
}

pub fn graph_from_json(text: &str) -> Result<InstanceGraph, FormatError> {
    decode::<GraphDocument>(text)?.to_graph()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessNode {
    pub name: String,
    pub node: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub name: String,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<WitnessNode>,
}

impl From<&ConstraintReport> for ReportDoc {
    fn from(r: &ConstraintReport) -> Self {
        ReportDoc {
            name: r.name.clone(),
            holds: r.holds(),
            witness: r
                .witness
                .iter()
                .flat_map(|w| w.bindings())
                .map(|(name, n)| WitnessNode {
                    name: name.to_string(),
                    node: n.0,
                })
                .collect(),
        }
    }
}

pub fn reports(rs: &[ConstraintReport]) -> Vec<ReportDoc> {
    rs.iter().map(ReportDoc::from).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingDoc {
    pub role: String,
    pub node: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchDoc {
    pub index: usize,
    pub rule: String,
    pub bindings: Vec<BindingDoc>,
    pub summary: String,
}

impl From<&MatchSummary> for MatchDoc {
    fn from(m: &MatchSummary) -> Self {
        MatchDoc {
            index: m.index,
            rule: m.rule.clone(),
            bindings: m
                .bindings
                .iter()
                .map(|b| BindingDoc {
                    role: b.role.clone(),
                    node: b.node.0,
                    label: b.label.clone(),
                })
                .collect(),
            summary: m.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdatedAttr {
    pub node: u64,
    pub attr: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffDoc {
    pub created_nodes: Vec<u64>,
    pub created_edges: Vec<u64>,
    pub deleted_nodes: Vec<u64>,
    pub deleted_edges: Vec<u64>,
    pub updated: Vec<UpdatedAttr>,
}

impl From<&Diff> for DiffDoc {
    fn from(d: &Diff) -> Self {
        DiffDoc {
            created_nodes: d.created_nodes.iter().map(|n| n.0).collect(),
            created_edges: d.created_edges.iter().map(|e| e.0).collect(),
            deleted_nodes: d.deleted_nodes.iter().map(|(n, _)| n.0).collect(),
            deleted_edges: d.deleted_edges.iter().map(|(e, _)| e.0).collect(),
            updated: d
                .updated
                .iter()
                .map(|(n, a)| UpdatedAttr {
                    node: n.0,
                    attr: a.clone(),
                })
                .collect(),
        }
    }
}

impl DiffDoc {
    /// The diff that takes a step's post-state back to its pre-state.
    pub fn inverse(&self) -> Self {
        DiffDoc {
            created_nodes: self.deleted_nodes.clone(),
            created_edges: self.deleted_edges.clone(),
            deleted_nodes: self.created_nodes.clone(),
            deleted_edges: self.created_edges.clone(),
            updated: self.updated.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StepKind {
    Statement,
    WhatIf,
    Undo,
}

/// One executed step: what ran, what changed, and the resulting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepDoc {
    pub kind: StepKind,
    pub statement: String,
    pub rule: Option<String>,
    #[serde(rename = "match")]
    pub matched: Option<MatchDoc>,
    pub diff: DiffDoc,
    pub reports: Vec<ReportDoc>,
    pub inputs_consumed: usize,
    pub output: Option<String>,
    pub graph: GraphDocument,
}

impl From<&TraceStep> for StepDoc {
    fn from(s: &TraceStep) -> Self {
        StepDoc {
            kind: match s.action {
                Action::Statement(_) => StepKind::Statement,
                Action::WhatIf { .. } => StepKind::WhatIf,
            },
            statement: s.statement.clone(),
            rule: s.rule.clone(),
            matched: s.matched.as_ref().map(MatchDoc::from),
            diff: (&s.diff).into(),
            reports: reports(&s.reports),
            inputs_consumed: s.inputs_consumed,
            output: s.output.clone(),
            graph: GraphDocument::from_graph(&s.post),
        }
    }
}

impl StepDoc {
    /// Result of undoing `undone` in `session` (already rolled back).
    pub fn undo(session: &Session, undone: &TraceStep) -> Self {
        let inner = StepDoc::from(undone);
        StepDoc {
            kind: StepKind::Undo,
            statement: format!("undo {}", undone.statement),
            diff: inner.diff.inverse(),
            reports: reports(&session.reports(session.state())),
            inputs_consumed: 0,
            output: None,
            graph: GraphDocument::from_graph(session.state()),
            ..inner
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ConfigDoc {
    pub free_pool: usize,
    pub strict_c: bool,
    pub materialize_addresses: bool,
    pub ignore_names: bool,
    pub max_states: usize,
}

impl Default for ConfigDoc {
    fn default() -> Self {
        SessionConfig::default().into()
    }
}

impl From<SessionConfig> for ConfigDoc {
    fn from(c: SessionConfig) -> Self {
        ConfigDoc {
            free_pool: c.free_pool,
            strict_c: c.strict_c,
            materialize_addresses: c.materialize_addresses,
            ignore_names: c.ignore_names,
            max_states: c.max_states,
        }
    }
}

impl From<ConfigDoc> for SessionConfig {
    fn from(c: ConfigDoc) -> Self {
        SessionConfig {
            free_pool: c.free_pool,
            strict_c: c.strict_c,
            materialize_addresses: c.materialize_addresses,
            ignore_names: c.ignore_names,
            max_states: c.max_states,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDoc {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    /// Index of the failing statement in a batch run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<usize>,
}

impl ErrorDoc {
    pub fn new(kind: &str, message: impl std::fmt::Display) -> Self {
        ErrorDoc {
            kind: kind.to_string(),
            message: message.to_string(),
            position: None,
            statement: None,
        }
    }
}

impl From<&StepError> for ErrorDoc {
    fn from(e: &StepError) -> Self {
        ErrorDoc {
            kind: e.kind().to_string(),
            message: e.to_string(),
            position: e.position().map(|(line, col)| Position { line, col }),
            statement: None,
        }
    }
}

pub fn declarations_text(decls: &[Declaration]) -> String {
    decls.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceDocument {
    pub version: u64,
    pub declarations: String,
    pub config: ConfigDoc,
    pub input: Vec<i64>,
    pub output: String,
    pub start: GraphDocument,
    pub steps: Vec<StepDoc>,
    /// Constraint reports on the last state.
    pub reports: Vec<ReportDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDoc>,
}

impl TraceDocument {
    pub fn from_session(s: &Session, error: Option<ErrorDoc>) -> Self {
        TraceDocument {
            version: VERSION,
            declarations: declarations_text(s.declarations()),
            config: (*s.config()).into(),
            input: s.input().to_vec(),
            output: s.output().to_string(),
            start: GraphDocument::from_graph(s.start_state()),
            steps: s.history().iter().map(StepDoc::from).collect(),
            reports: reports(&s.reports(s.state())),
            error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictDoc {
    pub holds: bool,
    pub violating_state: Option<usize>,
    pub reports: Vec<ReportDoc>,
}

impl From<&FormulaVerdict> for VerdictDoc {
    fn from(v: &FormulaVerdict) -> Self {
        VerdictDoc {
            holds: v.holds,
            violating_state: v.violating_state,
            reports: reports(&v.reports),
        }
    }
}

/// A recorded step, replayable against a fresh session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ActionDoc {
    Statement {
        text: String,
    },
    #[serde(rename_all = "camelCase")]
    WhatIf {
        rule: String,
        match_index: usize,
        #[serde(default)]
        params: BTreeMap<String, AttrValue>,
    },
}

impl From<&Action> for ActionDoc {
    fn from(a: &Action) -> Self {
        match a {
            Action::Statement(text) => ActionDoc::Statement { text: text.clone() },
            Action::WhatIf { rule, index, params } => ActionDoc::WhatIf {
                rule: rule.clone(),
                match_index: *index,
                params: params.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
            },
        }
    }
}

impl From<&ActionDoc> for Action {
    fn from(a: &ActionDoc) -> Self {
        match a {
            ActionDoc::Statement { text } => Action::Statement(text.clone()),
            ActionDoc::WhatIf {
                rule,
                match_index,
                params,
            } => Action::WhatIf {
                rule: rule.clone(),
                index: *match_index,
                params: params.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect(),
            },
        }
    }
}

/// Everything needed to rebuild a session by replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot {
    pub version: u64,
    pub id: String,
    pub declarations: String,
    pub config: ConfigDoc,
    pub input: Vec<i64>,
    pub actions: Vec<ActionDoc>,
    pub created_at: u64,
}

impl SessionSnapshot {
    pub fn capture(id: &str, s: &Session, created_at: u64) -> Self {
        SessionSnapshot {
            version: VERSION,
            id: id.to_string(),
            declarations: declarations_text(s.declarations()),
            config: (*s.config()).into(),
            input: s.input().to_vec(),
            actions: s.history().iter().map(|t| ActionDoc::from(&t.action)).collect(),
            created_at,
        }
    }

    pub fn restore(&self) -> Result<Session, StepError> {
        let decls = ptrgraph_core::frontend::parse_declarations(&self.declarations)?;
        let mut s = Session::new(&decls, self.config.into())?.with_input(self.input.clone());
        for a in &self.actions {
            s.replay(&a.into())?;
        }
        Ok(s)
    }
}
