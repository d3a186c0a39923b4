//! Graph isomorphism up to node/edge ids.
//!
//! Colour refinement (1-dimensional Weisfeiler-Lehman) gives every node a
//! colour that is invariant under renaming; the multiset of colours is the
//! graph's [`signature`]. Equal signatures are only a hint, so
//! [`isomorphic`] follows up with a backtracking search restricted to
//! same-coloured candidates.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::graph::{InstanceGraph, Morphism, Node, NodeId};
use crate::hash::Fnv;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IsoOptions {
    /// Compare nodes without their `name` attribute.
    pub ignore_names: bool,
}

fn node_colour(n: &Node, opts: IsoOptions) -> u64 {
    let mut h = Fnv::new().str(&n.ty);
    for (k, v) in &n.attrs {
        if opts.ignore_names && k == "name" {
            continue;
        }
        h = h.str(k);
        h = match v {
            crate::Value::Int(i) => h.u64(1).u64(*i as u64),
            crate::Value::Bool(b) => h.u64(2).u64(u64::from(*b)),
            crate::Value::Str(s) => h.u64(3).str(s),
        };
    }
    h.finish()
}

fn attrs_equal(a: &Node, b: &Node, opts: IsoOptions) -> bool {
    if a.ty != b.ty {
        return false;
    }
    if !opts.ignore_names {
        return a.attrs == b.attrs;
    }
    let strip = |n: &Node| {
        n.attrs
            .iter()
            .filter(|(k, _)| k.as_str() != "name")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect::<Vec<_>>()
    };
    strip(a) == strip(b)
}

/// Refined colours plus the number of rounds until the partition stabilised.
fn refine(g: &InstanceGraph, opts: IsoOptions) -> (BTreeMap<NodeId, u64>, u64) {
    let mut colours: BTreeMap<NodeId, u64> = g.nodes().map(|(id, n)| (id, node_colour(n, opts))).collect();
    let classes = |c: &BTreeMap<NodeId, u64>| {
        let mut v: Vec<u64> = c.values().copied().collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    let mut count = classes(&colours);
    let mut rounds = 0u64;
    loop {
        let next: BTreeMap<NodeId, u64> = g
            .nodes()
            .map(|(id, _)| {
                let mut nbrs: Vec<(u64, u64)> = g
                    .out_edges(id)
                    .map(|(_, l, t)| (Fnv::new().u64(0).str(l).finish(), colours[&t]))
                    .chain(
                        g.in_edges(id)
                            .map(|(_, l, s)| (Fnv::new().u64(1).str(l).finish(), colours[&s])),
                    )
                    .collect();
                nbrs.sort_unstable();
                let mut h = Fnv::new().u64(colours[&id]);
                for (l, c) in nbrs {
                    h = h.u64(l).u64(c);
                }
                (id, h.finish())
            })
            .collect();
        let next_count = classes(&next);
        rounds += 1;
        colours = next;
        if next_count == count {
            break;
        }
        count = next_count;
    }
    (colours, rounds)
}

/// Renaming-invariant hash of a graph. Isomorphic graphs always share a
/// signature; the converse needs [`isomorphic`].
pub fn signature(g: &InstanceGraph, opts: IsoOptions) -> u64 {
    let (colours, rounds) = refine(g, opts);
    let mut cs: Vec<u64> = colours.into_values().collect();
    cs.sort_unstable();
    let mut h = Fnv::new()
        .u64(rounds)
        .u64(g.node_count() as u64)
        .u64(g.edge_count() as u64);
    for c in cs {
        h = h.u64(c);
    }
    h.finish()
}

/// Returns a node- and edge-bijection from `a` to `b` preserving types,
/// attributes and labelled edges, if one exists.
pub fn isomorphic(a: &InstanceGraph, b: &InstanceGraph, opts: IsoOptions) -> Option<Morphism> {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return None;
    }
    if a.types().name() != b.types().name() {
        return None;
    }
    let (ca, ra) = refine(a, opts);
    let (cb, rb) = refine(b, opts);
    if ra != rb {
        return None;
    }
    let mut hist: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for c in ca.values() {
        hist.entry(*c).or_default().0 += 1;
    }
    for c in cb.values() {
        hist.entry(*c).or_default().1 += 1;
    }
    if hist.values().any(|(x, y)| x != y) {
        return None;
    }

    // Bind nodes from the rarest colour class first, then neighbours of
    // already-ordered nodes, so edge checks prune early.
    let mut order: Vec<NodeId> = Vec::with_capacity(ca.len());
    let mut placed: BTreeMap<NodeId, ()> = BTreeMap::new();
    let mut remaining: Vec<NodeId> = ca.keys().copied().collect();
    remaining.sort_by_key(|n| (hist[&ca[n]].0, *n));
    while order.len() < ca.len() {
        let seed = *remaining.iter().find(|n| !placed.contains_key(n))?;
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(seed);
        placed.insert(seed, ());
        while let Some(n) = queue.pop_front() {
            order.push(n);
            let mut nbrs: Vec<NodeId> = a
                .out_edges(n)
                .map(|(_, _, t)| t)
                .chain(a.in_edges(n).map(|(_, _, s)| s))
                .collect();
            nbrs.sort_by_key(|m| (hist[&ca[m]].0, *m));
            for m in nbrs {
                if placed.insert(m, ()).is_none() {
                    queue.push_back(m);
                }
            }
        }
    }

    let mut by_colour: BTreeMap<u64, Vec<NodeId>> = BTreeMap::new();
    for (n, c) in &cb {
        by_colour.entry(*c).or_default().push(*n);
    }

    let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut used: BTreeMap<NodeId, ()> = BTreeMap::new();
    if !search(a, b, opts, &order, 0, &ca, &by_colour, &mut map, &mut used) {
        return None;
    }
    let mut edges = BTreeMap::new();
    for (eid, e) in a.edges() {
        let img = b.find_edge(map[&e.src], &e.label, map[&e.tgt])?;
        edges.insert(eid, img);
    }
    Some(Morphism { nodes: map, edges })
}

#[allow(clippy::too_many_arguments)]
fn search(
    a: &InstanceGraph,
    b: &InstanceGraph,
    opts: IsoOptions,
    order: &[NodeId],
    depth: usize,
    ca: &BTreeMap<NodeId, u64>,
    by_colour: &BTreeMap<u64, Vec<NodeId>>,
    map: &mut BTreeMap<NodeId, NodeId>,
    used: &mut BTreeMap<NodeId, ()>,
) -> bool {
    let Some(&n) = order.get(depth) else {
        return true;
    };
    let Some(cands) = by_colour.get(&ca[&n]) else {
        return false;
    };
    let na = a.node(n).expect("ordered node exists");
    for &m in cands {
        if used.contains_key(&m) {
            continue;
        }
        if !attrs_equal(na, b.node(m).expect("candidate exists"), opts) {
            continue;
        }
        if !consistent(a, b, n, m, map) {
            continue;
        }
        map.insert(n, m);
        used.insert(m, ());
        if search(a, b, opts, order, depth + 1, ca, by_colour, map, used) {
            return true;
        }
        map.remove(&n);
        used.remove(&m);
    }
    false
}

fn consistent(a: &InstanceGraph, b: &InstanceGraph, n: NodeId, m: NodeId, map: &BTreeMap<NodeId, NodeId>) -> bool {
    // every edge between n and mapped nodes (or a self-loop) must have an image,
    // and the number of such edges must agree on both sides
    let mut count_a = 0usize;
    for (_, l, t) in a.out_edges(n) {
        let img = if t == n { Some(m) } else { map.get(&t).copied() };
        if let Some(ti) = img {
            count_a += 1;
            if !b.has_edge(m, l, ti) {
                return false;
            }
        }
    }
    for (_, l, s) in a.in_edges(n) {
        if s == n {
            continue;
        }
        if let Some(&si) = map.get(&s) {
            count_a += 1;
            if !b.has_edge(si, l, m) {
                return false;
            }
        }
    }
    let mapped_b: BTreeMap<NodeId, ()> = map.values().map(|v| (*v, ())).collect();
    let count_b = b
        .out_edges(m)
        .filter(|(_, _, t)| *t == m || mapped_b.contains_key(t))
        .count()
        + b.in_edges(m)
            .filter(|(_, _, s)| *s != m && mapped_b.contains_key(s))
            .count();
    count_a == count_b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Value;
    use crate::pointer_model::{build_start_graph, build_type_graph, textbook_declarations};
    use alloc::vec;

    fn opts() -> IsoOptions {
        IsoOptions::default()
    }

    #[test]
    fn reflexive() {
        let g = build_start_graph(&textbook_declarations(), 6).unwrap();
        assert!(isomorphic(&g, &g, opts()).is_some());
    }

    #[test]
    fn type_mismatch() {
        let t = build_type_graph();
        let mut a = InstanceGraph::new(t.clone());
        a.add_node("Pointer", Vec::<(&str, Value)>::new()).unwrap();
        let mut b = InstanceGraph::new(t);
        b.add_node("Int", Vec::<(&str, Value)>::new()).unwrap();
        assert!(isomorphic(&a, &b, opts()).is_none());
    }

    #[test]
    fn names_matter_unless_ignored() {
        let t = build_type_graph();
        let mut a = InstanceGraph::new(t.clone());
        a.add_node("Int", vec![("name", Value::Str("s".into()))]).unwrap();
        let mut b = InstanceGraph::new(t);
        b.add_node("Int", vec![("name", Value::Str("t".into()))]).unwrap();
        assert!(isomorphic(&a, &b, opts()).is_none());
        assert!(isomorphic(&a, &b, IsoOptions { ignore_names: true }).is_some());
        assert_ne!(signature(&a, opts()), signature(&b, opts()));
        assert_eq!(
            signature(&a, IsoOptions { ignore_names: true }),
            signature(&b, IsoOptions { ignore_names: true })
        );
    }

    #[test]
    fn edge_direction_matters() {
        let t = build_type_graph();
        let mut a = InstanceGraph::new(t.clone());
        let x = a.add_node("Address", Vec::<(&str, Value)>::new()).unwrap();
        let y = a.add_node("Address", vec![("free", Value::Bool(false))]).unwrap();
        a.add_edge(x, "succ", y).unwrap();
        let mut b = InstanceGraph::new(t);
        let x2 = b.add_node("Address", Vec::<(&str, Value)>::new()).unwrap();
        let y2 = b.add_node("Address", vec![("free", Value::Bool(false))]).unwrap();
        b.add_edge(y2, "succ", x2).unwrap();
        assert!(isomorphic(&a, &b, opts()).is_none());
    }

    #[test]
    fn regular_graphs_need_search() {
        // two 6-cycles vs one 12-cycle of succ edges: colour refinement alone
        // cannot tell them apart
        let t = build_type_graph();
        let ring = |lens: &[usize]| {
            let mut g = InstanceGraph::new(t.clone());
            for &len in lens {
                let ids: Vec<NodeId> = (0..len)
                    .map(|_| g.add_node("Address", Vec::<(&str, Value)>::new()).unwrap())
                    .collect();
                for i in 0..len {
                    g.add_edge(ids[i], "succ", ids[(i + 1) % len]).unwrap();
                }
            }
            g
        };
        let a = ring(&[6, 6]);
        let b = ring(&[12]);
        assert_eq!(signature(&a, opts()), signature(&b, opts()));
        assert!(isomorphic(&a, &b, opts()).is_none());
        assert!(isomorphic(&a, &ring(&[6, 6]), opts()).is_some());
    }
}
