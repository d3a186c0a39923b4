//! Constraint truth and witnesses by exhaustive enumeration.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ptrgraph_core::constraints::{Body, Fragment, Level, Polarity, Quantifier};
use ptrgraph_core::graph::{InstanceGraph, NodeId};
use ptrgraph_core::matching::{CmpOp, Guard, Operand, PatternNode};
use ptrgraph_core::Constraint;

type Binding = Vec<Option<NodeId>>;

struct Ctx<'a> {
    g: &'a InstanceGraph,
    nodes: &'a [PatternNode],
    aliases: &'a [(usize, usize)],
}

impl Ctx<'_> {
    fn may_share(&self, i: usize, j: usize) -> bool {
        self.aliases.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i))
    }

    fn guard(&self, b: &Binding, gd: &Guard) -> bool {
        match gd {
            Guard::Attr { node, attr, op, rhs } => {
                let l = b[*node].and_then(|n| self.g.attr(n, attr));
                let r = match rhs {
                    Operand::Lit(v) => Some(v),
                    Operand::Attr { node, attr } => b[*node].and_then(|n| self.g.attr(n, attr)),
                    Operand::Param(_) => None,
                };
                match (l, r) {
                    (Some(l), Some(r)) => (l == r) == (*op == CmpOp::Eq),
                    _ => false,
                }
            }
            Guard::Distinct(x, y) => b[*x] != b[*y],
        }
    }

    /// Every extension of `b` over the fragment's nodes that satisfies it.
    fn extend(&self, b: &Binding, frag: &Fragment) -> Vec<Binding> {
        let mut partial = vec![b.clone()];
        for &v in &frag.nodes {
            let mut next = Vec::new();
            for p in &partial {
                for (id, n) in self.g.nodes() {
                    if !self.g.types().is_subtype(&n.ty, &self.nodes[v].ty) {
                        continue;
                    }
                    let clash = p
                        .iter()
                        .enumerate()
                        .any(|(j, h)| j != v && *h == Some(id) && !self.may_share(v, j));
                    if clash {
                        continue;
                    }
                    let mut q = p.clone();
                    q[v] = Some(id);
                    next.push(q);
                }
            }
            partial = next;
        }
        partial
            .into_iter()
            .filter(|q| {
                frag.edges
                    .iter()
                    .all(|e| self.g.has_edge(q[e.src].unwrap(), &e.label, q[e.tgt].unwrap()))
                    && frag.guards.iter().all(|gd| self.guard(q, gd))
            })
            .collect()
    }

    fn level(&self, l: &Level, b: &Binding) -> (bool, Option<Binding>) {
        let mut exts: Vec<Binding> = self
            .extend(b, &l.fragment)
            .into_iter()
            .filter(|e| l.negatives.iter().all(|n| self.extend(e, n).is_empty()))
            .collect();
        exts.sort();
        let children = |e: &Binding| {
            for c in &l.children {
                let (ok, w) = self.level(c, e);
                if !ok {
                    return (false, w);
                }
            }
            (true, None)
        };
        match l.quantifier {
            Quantifier::Forall => {
                for e in &exts {
                    let (ok, w) = children(e);
                    if !ok {
                        return (false, w.or(Some(e.clone())));
                    }
                }
                (true, None)
            }
            Quantifier::Exists => {
                let mut counter = None;
                for e in &exts {
                    let (ok, w) = children(e);
                    if ok {
                        return (true, Some(e.clone()));
                    }
                    counter = counter.or(w);
                }
                (false, counter)
            }
        }
    }
}

/// Whether succ edges form disjoint simple paths (Kahn's algorithm on the
/// succ subgraph, plus degree bounds).
pub fn succ_chains_ok(g: &InstanceGraph) -> bool {
    let addrs: Vec<NodeId> = g.nodes_of_type("Address").collect();
    let mut indeg: BTreeMap<NodeId, usize> = addrs.iter().map(|a| (*a, 0)).collect();
    for (_, e) in g.edges() {
        if e.label == "succ" {
            *indeg.get_mut(&e.tgt).unwrap() += 1;
        }
    }
    for a in &addrs {
        if g.successors(*a, "succ").count() > 1 || indeg[a] > 1 {
            return false;
        }
    }
    let mut queue: VecDeque<NodeId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut seen = BTreeSet::new();
    while let Some(n) = queue.pop_front() {
        seen.insert(n);
        for s in g.successors(n, "succ") {
            let d = indeg.get_mut(&s).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(s);
            }
        }
    }
    seen.len() == addrs.len()
}

/// Oracle verdict: (violated, witness as (pattern name, host) pairs).
pub fn evaluate(c: &Constraint, g: &InstanceGraph) -> (bool, Option<Vec<(String, NodeId)>>) {
    match &c.body {
        Body::SuccChains => (!succ_chains_ok(g), None),
        Body::Pattern { nodes, aliases, root } => {
            let ctx = Ctx { g, nodes, aliases };
            let (truth, w) = ctx.level(root, &vec![None; nodes.len()]);
            let violated = match c.polarity {
                Polarity::Require => !truth,
                Polarity::Forbid => truth,
            };
            let witness = w.filter(|_| violated).map(|b| {
                b.iter()
                    .enumerate()
                    .filter_map(|(i, h)| h.map(|h| (nodes[i].name.clone(), h)))
                    .collect()
            });
            (violated, witness)
        }
    }
}
