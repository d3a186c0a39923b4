//! Graphviz export. Created and updated elements are bold green, deleted ones
//! are drawn as dashed blue ghosts, and constraint witnesses are dotted red.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use ptrgraph_core::graph::{Edge, EdgeId, InstanceGraph, Node, NodeId, Value};
use ptrgraph_core::rules::Diff;
use ptrgraph_core::ConstraintReport;

const CREATED: &str = "color=\"#1a9641\", penwidth=2.5, fontcolor=\"#1a9641\"";
const DELETED: &str = "color=\"#2b83ba\", style=dashed, fontcolor=\"#2b83ba\"";
const WITNESS: &str = "color=\"#d7191c\", style=dotted, penwidth=2";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Plain,
    Created,
    Deleted,
    Witness,
}

impl Mark {
    fn attrs(self) -> Option<&'static str> {
        match self {
            Mark::Plain => None,
            Mark::Created => Some(CREATED),
            Mark::Deleted => Some(DELETED),
            Mark::Witness => Some(WITNESS),
        }
    }
}

/// Styling overlay for [`to_dot`].
#[derive(Debug, Clone, Default)]
pub struct Highlight {
    created_nodes: BTreeSet<NodeId>,
    created_edges: BTreeSet<EdgeId>,
    ghost_nodes: BTreeMap<NodeId, Node>,
    ghost_edges: BTreeMap<EdgeId, Edge>,
    witnesses: BTreeSet<NodeId>,
}

impl Highlight {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diff(mut self, d: &Diff) -> Self {
        self.created_nodes.extend(d.created_nodes.iter().copied());
        self.created_nodes.extend(d.updated.iter().map(|(n, _)| *n));
        self.created_edges.extend(d.created_edges.iter().copied());
        self.ghost_nodes.extend(d.deleted_nodes.iter().cloned());
        self.ghost_edges.extend(d.deleted_edges.iter().cloned());
        self
    }

    /// Marks the witness nodes of every violated report.
    pub fn witnesses(mut self, reports: &[ConstraintReport]) -> Self {
        for r in reports.iter().filter(|r| !r.holds()) {
            if let Some(w) = &r.witness {
                self.witnesses.extend(w.nodes());
            }
        }
        self
    }

    // Diff styling wins over witness styling so each element gets one mark.
    fn node(&self, n: NodeId) -> Mark {
        if self.created_nodes.contains(&n) {
            Mark::Created
        } else if self.witnesses.contains(&n) {
            Mark::Witness
        } else {
            Mark::Plain
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn label(id: NodeId, n: &Node) -> String {
    let mut s = format!("{id}: {}", n.ty);
    for (k, v) in &n.attrs {
        let v = match v {
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Str(x) if x.is_empty() => continue,
            Value::Str(x) => format!("\"{x}\""),
        };
        write!(s, "\n{k}={v}").unwrap();
    }
    s
}

fn node_line(out: &mut String, id: NodeId, n: &Node, mark: Mark) {
    write!(out, "  {id} [label={}", quote(&label(id, n))).unwrap();
    if let Some(a) = mark.attrs() {
        write!(out, ", {a}").unwrap();
    }
    out.push_str("];\n");
}

fn edge_line(out: &mut String, e: &Edge, mark: Mark) {
    write!(out, "  {} -> {} [label={}", e.src, e.tgt, quote(&e.label)).unwrap();
    if let Some(a) = mark.attrs() {
        write!(out, ", {a}").unwrap();
    }
    out.push_str("];\n");
}

/// Renders `g` as a DOT digraph. Output depends only on the graph and the
/// highlight, with nodes and edges in id order.
pub fn to_dot(g: &InstanceGraph, hl: &Highlight) -> String {
    let mut out =
        String::from("digraph G {\n  node [shape=box, fontname=\"Helvetica\"];\n  edge [fontname=\"Helvetica\"];\n");
    for (id, n) in g.nodes() {
        node_line(&mut out, id, n, hl.node(id));
    }
    for (id, n) in &hl.ghost_nodes {
        if !g.contains_node(*id) {
            node_line(&mut out, *id, n, Mark::Deleted);
        }
    }
    for (id, e) in g.edges() {
        let mark = if hl.created_edges.contains(&id) {
            Mark::Created
        } else if hl.node(e.src) == Mark::Witness && hl.node(e.tgt) == Mark::Witness {
            Mark::Witness
        } else {
            Mark::Plain
        };
        edge_line(&mut out, e, mark);
    }
    for (id, e) in &hl.ghost_edges {
        if g.edge(*id).is_none() {
            edge_line(&mut out, e, Mark::Deleted);
        }
    }
    out.push_str("}\n");
    out
}
