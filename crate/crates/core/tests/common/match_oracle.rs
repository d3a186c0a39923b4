//! Rule matches by exhaustive enumeration of node assignments.

use std::collections::{BTreeMap, BTreeSet};

use ptrgraph_core::graph::{InstanceGraph, NodeId, Value};
use ptrgraph_core::matching::{CmpOp, Guard, Operand};
use ptrgraph_core::rules::{Role, Rule};

pub type Assignment = BTreeMap<usize, NodeId>;

fn operand(g: &InstanceGraph, a: &Assignment, params: &BTreeMap<String, Value>, op: &Operand) -> Option<Value> {
    match op {
        Operand::Lit(v) => Some(v.clone()),
        Operand::Param(p) => params.get(p).cloned(),
        Operand::Attr { node, attr } => g.attr(*a.get(node)?, attr).cloned(),
    }
}

fn guard_ok(g: &InstanceGraph, a: &Assignment, params: &BTreeMap<String, Value>, guard: &Guard) -> bool {
    match guard {
        Guard::Attr { node, attr, op, rhs } => {
            let lhs = a.get(node).and_then(|n| g.attr(*n, attr)).cloned();
            let rhs = operand(g, a, params, rhs);
            match (lhs, rhs, op) {
                (Some(l), Some(r), CmpOp::Eq) => l == r,
                (Some(l), Some(r), CmpOp::Ne) => l != r,
                _ => false,
            }
        }
        Guard::Distinct(x, y) => a.get(x) != a.get(y),
    }
}

fn aliased(rule: &Rule, i: usize, j: usize) -> bool {
    rule.aliases.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i))
}

/// All type-compatible assignments of `vars`, extending `base`.
fn assignments(g: &InstanceGraph, rule: &Rule, vars: &[usize], base: &Assignment) -> Vec<Assignment> {
    let mut out = vec![base.clone()];
    for &v in vars {
        let cands: Vec<NodeId> = g
            .nodes()
            .filter(|(_, n)| g.types().is_subtype(&n.ty, &rule.nodes[v].ty))
            .map(|(id, _)| id)
            .collect();
        let mut next = Vec::new();
        for a in &out {
            for &c in &cands {
                let mut b = a.clone();
                b.insert(v, c);
                next.push(b);
            }
        }
        out = next;
    }
    out
}

fn edges_present(g: &InstanceGraph, rule: &Rule, a: &Assignment, edges: &[usize]) -> bool {
    edges.iter().all(|&k| {
        let e = &rule.edges[k];
        g.has_edge(a[&e.src], &e.label, a[&e.tgt])
    })
}

/// Matches of `rule` as maps from rule node index to host node.
pub fn brute_matches(g: &InstanceGraph, rule: &Rule, params: &BTreeMap<String, Value>) -> BTreeSet<Assignment> {
    let role = |i: usize| rule.nodes[i].role;
    let lhs: Vec<usize> = (0..rule.nodes.len())
        .filter(|&i| matches!(role(i), Role::Reader | Role::Eraser))
        .collect();
    let embargo: Vec<usize> = (0..rule.nodes.len()).filter(|&i| role(i) == Role::Embargo).collect();
    let lhs_edges: Vec<usize> = (0..rule.edges.len())
        .filter(|&k| matches!(rule.edges[k].role, Role::Reader | Role::Eraser))
        .collect();
    let lhs_guards: Vec<&Guard> = rule
        .guards
        .iter()
        .filter(|gd| gd.nodes().iter().all(|n| lhs.contains(n)))
        .collect();

    // negative conditions: embargo nodes grouped by embargo edges between them
    let mut groups: Vec<BTreeSet<usize>> = embargo.iter().map(|&n| BTreeSet::from([n])).collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let joined = rule.edges.iter().any(|e| {
                    e.role == Role::Embargo
                        && ((groups[i].contains(&e.src) && groups[j].contains(&e.tgt))
                            || (groups[j].contains(&e.src) && groups[i].contains(&e.tgt)))
                });
                if joined {
                    let g2 = groups.remove(j);
                    groups[i].extend(g2);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let mut nacs: Vec<(Vec<usize>, Vec<usize>)> = groups
        .iter()
        .map(|grp| {
            let edges = (0..rule.edges.len())
                .filter(|&k| {
                    let e = &rule.edges[k];
                    e.role == Role::Embargo && (grp.contains(&e.src) || grp.contains(&e.tgt))
                })
                .collect();
            (grp.iter().copied().collect(), edges)
        })
        .collect();
    for (k, e) in rule.edges.iter().enumerate() {
        if e.role == Role::Embargo && !embargo.contains(&e.src) && !embargo.contains(&e.tgt) {
            nacs.push((vec![], vec![k]));
        }
    }

    let mut out = BTreeSet::new();
    for a in assignments(g, rule, &lhs, &Assignment::new()) {
        let injective = lhs
            .iter()
            .all(|&i| lhs.iter().all(|&j| i >= j || a[&i] != a[&j] || aliased(rule, i, j)));
        if !injective || !edges_present(g, rule, &a, &lhs_edges) {
            continue;
        }
        if !lhs_guards.iter().all(|gd| guard_ok(g, &a, params, gd)) {
            continue;
        }
        let blocked = nacs.iter().any(|(nodes, edges)| {
            let guards: Vec<&Guard> = rule
                .guards
                .iter()
                .filter(|gd| gd.nodes().iter().any(|n| nodes.contains(n)))
                .collect();
            assignments(g, rule, nodes, &a).into_iter().any(|b| {
                // embargo nodes are distinct from each other but may reuse matched nodes
                let inj = nodes
                    .iter()
                    .all(|&i| nodes.iter().all(|&j| i >= j || b[&i] != b[&j] || aliased(rule, i, j)));
                inj && edges_present(g, rule, &b, edges) && guards.iter().all(|gd| guard_ok(g, &b, params, gd))
            })
        });
        if !blocked {
            out.insert(a);
        }
    }
    out
}
