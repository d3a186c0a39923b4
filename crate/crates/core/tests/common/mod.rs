//! Test-only reference implementations and random generators.
#![allow(dead_code)]

pub mod gen;
pub mod interp;
pub mod match_oracle;
pub mod pattern_oracle;

use ptrgraph_core::graph::{InstanceGraph, NodeId};
use ptrgraph_core::{Catalog, Rule};

/// Every catalog rule plus a few generated `pointerArrayAt[k]` instances.
pub fn all_rules(cat: &Catalog) -> Vec<Rule> {
    let mut rules: Vec<Rule> = cat.rules().cloned().collect();
    for k in 1..=3 {
        rules.push(cat.get(&format!("pointerArrayAt[{k}]")).unwrap());
    }
    rules
}

/// Isomorphism by trying every type- and attribute-preserving bijection.
pub fn brute_isomorphic(a: &InstanceGraph, b: &InstanceGraph) -> bool {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    let an: Vec<NodeId> = a.nodes().map(|(id, _)| id).collect();
    let bn: Vec<NodeId> = b.nodes().map(|(id, _)| id).collect();
    let mut used = vec![false; bn.len()];
    let mut map = Vec::new();
    fn go(
        a: &InstanceGraph,
        b: &InstanceGraph,
        an: &[NodeId],
        bn: &[NodeId],
        used: &mut Vec<bool>,
        map: &mut Vec<NodeId>,
    ) -> bool {
        let i = map.len();
        if i == an.len() {
            let pos = |n: NodeId| an.iter().position(|x| *x == n).unwrap();
            return a
                .edges()
                .all(|(_, e)| b.has_edge(map[pos(e.src)], &e.label, map[pos(e.tgt)]));
        }
        for j in 0..bn.len() {
            if used[j] || a.node(an[i]) != b.node(bn[j]) {
                continue;
            }
            used[j] = true;
            map.push(bn[j]);
            if go(a, b, an, bn, used, map) {
                return true;
            }
            map.pop();
            used[j] = false;
        }
        false
    }
    go(a, b, &an, &bn, &mut used, &mut map)
}
