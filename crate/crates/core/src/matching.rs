//! Injective pattern search shared by rule matching and constraint
//! evaluation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;

use crate::graph::{InstanceGraph, NodeId, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternNode {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternEdge {
    pub src: usize,
    pub label: String,
    pub tgt: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Lit(Value),
    Param(String),
    Attr { node: usize, attr: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    /// `node.attr op rhs`
    Attr {
        node: usize,
        attr: String,
        op: CmpOp,
        rhs: Operand,
    },
    /// The two pattern nodes must have distinct images. Only meaningful for
    /// pairs that are allowed to alias; injective matching implies it otherwise.
    Distinct(usize, usize),
}

impl Guard {
    pub fn nodes(&self) -> Vec<usize> {
        match self {
            Guard::Attr { node, rhs, .. } => {
                let mut v = alloc::vec![*node];
                if let Operand::Attr { node: n2, .. } = rhs {
                    v.push(*n2);
                }
                v
            }
            Guard::Distinct(a, b) => alloc::vec![*a, *b],
        }
    }

    pub fn params(&self) -> Option<&str> {
        match self {
            Guard::Attr {
                rhs: Operand::Param(p), ..
            } => Some(p),
            _ => None,
        }
    }
}

pub(crate) fn operand_value(
    host: &InstanceGraph,
    binding: &[Option<NodeId>],
    params: &BTreeMap<String, Value>,
    op: &Operand,
) -> Option<Value> {
    match op {
        Operand::Lit(v) => Some(v.clone()),
        Operand::Param(p) => params.get(p).cloned(),
        Operand::Attr { node, attr } => {
            let id = binding.get(*node).copied().flatten()?;
            host.attr(id, attr).cloned()
        }
    }
}

pub(crate) fn guard_holds(
    host: &InstanceGraph,
    binding: &[Option<NodeId>],
    params: &BTreeMap<String, Value>,
    g: &Guard,
) -> bool {
    match g {
        Guard::Attr { node, attr, op, rhs } => {
            let Some(id) = binding.get(*node).copied().flatten() else {
                return false;
            };
            let (Some(lhs), Some(rhs)) = (host.attr(id, attr).cloned(), operand_value(host, binding, params, rhs))
            else {
                return false;
            };
            match op {
                CmpOp::Eq => lhs == rhs,
                CmpOp::Ne => lhs != rhs,
            }
        }
        Guard::Distinct(a, b) => binding[*a] != binding[*b],
    }
}

/// One search problem: extend `binding` over the nodes in `to_bind`.
pub(crate) struct Search<'a> {
    pub host: &'a InstanceGraph,
    pub nodes: &'a [PatternNode],
    /// Edges checked as soon as both endpoints are bound.
    pub edges: Vec<&'a PatternEdge>,
    pub guards: Vec<&'a Guard>,
    /// Pattern node pairs that may share an image.
    pub aliases: &'a [(usize, usize)],
    pub params: &'a BTreeMap<String, Value>,
}

impl<'a> Search<'a> {
    fn may_alias(&self, i: usize, j: usize) -> bool {
        self.aliases
            .iter()
            .any(|&(a, b)| (a == i && b == j) || (a == j && b == i))
    }

    fn bound(binding: &[Option<NodeId>], i: usize) -> Option<NodeId> {
        binding.get(i).copied().flatten()
    }

    fn edges_ok(&self, binding: &[Option<NodeId>], i: usize) -> bool {
        self.edges.iter().all(|e| {
            if e.src != i && e.tgt != i {
                return true;
            }
            match (Self::bound(binding, e.src), Self::bound(binding, e.tgt)) {
                (Some(s), Some(t)) => self.host.has_edge(s, &e.label, t),
                _ => true,
            }
        })
    }

    fn guards_ok(&self, binding: &[Option<NodeId>], i: Option<usize>) -> bool {
        self.guards.iter().all(|g| {
            let ns = g.nodes();
            if let Some(i) = i {
                if !ns.contains(&i) {
                    return true;
                }
            }
            if ns.iter().any(|n| Self::bound(binding, *n).is_none()) {
                return true;
            }
            guard_holds(self.host, binding, self.params, g)
        })
    }

    fn injective_ok(&self, binding: &[Option<NodeId>], i: usize, host: NodeId) -> bool {
        binding
            .iter()
            .enumerate()
            .all(|(j, b)| j == i || *b != Some(host) || self.may_alias(i, j))
    }

    fn candidates(&self, binding: &[Option<NodeId>], i: usize) -> Vec<NodeId> {
        let ty = &self.nodes[i].ty;
        let types = self.host.types();
        let mut from_edge: Option<Vec<NodeId>> = None;
        for e in &self.edges {
            let c: Option<Vec<NodeId>> = if e.src == i && e.tgt != i {
                Self::bound(binding, e.tgt).map(|t| self.host.predecessors(t, &e.label).collect())
            } else if e.tgt == i && e.src != i {
                Self::bound(binding, e.src).map(|s| self.host.successors(s, &e.label).collect())
            } else {
                None
            };
            if let Some(c) = c {
                if from_edge.as_ref().is_none_or(|old| c.len() < old.len()) {
                    from_edge = Some(c);
                }
            }
        }
        let mut out: Vec<NodeId> = match from_edge {
            Some(c) => c
                .into_iter()
                .filter(|n| self.host.node_type(*n).is_some_and(|t| types.is_subtype(t, ty)))
                .collect(),
            None => self.host.nodes_of_type(ty).collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    fn pick_next(&self, binding: &[Option<NodeId>], todo: &[usize]) -> usize {
        // prefer a node reachable through an edge from something already bound
        for (k, &i) in todo.iter().enumerate() {
            let linked = self.edges.iter().any(|e| {
                (e.src == i && e.tgt != i && Self::bound(binding, e.tgt).is_some())
                    || (e.tgt == i && e.src != i && Self::bound(binding, e.src).is_some())
            });
            if linked {
                return k;
            }
        }
        0
    }

    /// Calls `f` for every complete extension. Returns `Break` if `f` did.
    pub(crate) fn run(
        &self,
        to_bind: &[usize],
        binding: &mut Vec<Option<NodeId>>,
        f: &mut dyn FnMut(&[Option<NodeId>]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if !self.guards_ok(binding, None) {
            return ControlFlow::Continue(());
        }
        // pre-bound nodes still need their edges and injectivity validated
        for (i, b) in binding.iter().enumerate() {
            if let Some(h) = b {
                if !self.edges_ok(binding, i) || !self.injective_ok(binding, i, *h) {
                    return ControlFlow::Continue(());
                }
            }
        }
        let todo: Vec<usize> = to_bind.iter().copied().filter(|i| binding[*i].is_none()).collect();
        self.extend(todo, binding, f)
    }

    fn extend(
        &self,
        mut todo: Vec<usize>,
        binding: &mut Vec<Option<NodeId>>,
        f: &mut dyn FnMut(&[Option<NodeId>]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if todo.is_empty() {
            return f(binding);
        }
        let k = self.pick_next(binding, &todo);
        let i = todo.remove(k);
        for host in self.candidates(binding, i) {
            if !self.injective_ok(binding, i, host) {
                continue;
            }
            binding[i] = Some(host);
            if self.edges_ok(binding, i) && self.guards_ok(binding, Some(i)) {
                self.extend(todo.clone(), binding, f)?;
            }
            binding[i] = None;
        }
        ControlFlow::Continue(())
    }
}
