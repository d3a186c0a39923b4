//! Quantified graph constraints and `G(...)` invariants over state sequences.
//!
//! A pattern constraint is a tree of quantifier levels. Each level binds the
//! nodes of its fragment (injectively, on top of the outer bindings),
//! optionally excludes extensions that match a negative fragment, and then
//! asks its child levels about every surviving binding: a `forall` level
//! needs all of them to satisfy the children, an `exists` level needs one.
//! The root is an implicit `exists`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::graph::{InstanceGraph, Morphism, NodeId};
use crate::matching::{Guard, PatternEdge, PatternNode, Search};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Satisfied when the formula holds.
    Require,
    /// Violated when the pattern is found.
    Forbid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Forall,
    Exists,
}

/// Nodes (indices into the constraint's node list), edges and guards
/// introduced at one level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fragment {
    pub nodes: Vec<usize>,
    pub edges: Vec<PatternEdge>,
    pub guards: Vec<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub quantifier: Quantifier,
    pub fragment: Fragment,
    pub negatives: Vec<Fragment>,
    pub children: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Pattern {
        nodes: Vec<PatternNode>,
        aliases: Vec<(usize, usize)>,
        root: Level,
    },
    /// succ edges form disjoint simple paths.
    SuccChains,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub polarity: Polarity,
    pub body: Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
}

/// Host nodes of a violating binding. `names[i]` labels `morphism` key
/// `NodeId(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub names: Vec<String>,
    pub morphism: Morphism,
}

impl Witness {
    fn from_binding(nodes: &[PatternNode], binding: &[Option<NodeId>]) -> Self {
        let mut names = Vec::new();
        let mut morphism = Morphism::default();
        for (i, b) in binding.iter().enumerate() {
            if let Some(h) = b {
                morphism.nodes.insert(NodeId(i as u64), *h);
            }
            names.push(nodes[i].name.clone());
        }
        Witness { names, morphism }
    }

    /// `(pattern name, host node)` pairs of the bound nodes.
    pub fn bindings(&self) -> Vec<(&str, NodeId)> {
        self.morphism
            .nodes
            .iter()
            .map(|(k, v)| (self.names[k.0 as usize].as_str(), *v))
            .collect()
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.morphism.nodes.values().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintReport {
    pub name: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

impl ConstraintReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("unknown constraint `{0}`")]
    UnknownConstraint(String),
    #[error("constraint `{constraint}` uses `{element}`, which the graph's type graph does not declare")]
    TypeGraphMismatch { constraint: String, element: String },
    #[error("states are typed over different type graphs")]
    MixedTypeGraphs,
}

impl Constraint {
    /// Names of the node types and edge labels the constraint mentions.
    fn vocabulary(&self) -> (Vec<&str>, Vec<&str>) {
        match &self.body {
            Body::SuccChains => (alloc::vec!["Address"], alloc::vec!["succ"]),
            Body::Pattern { nodes, root, .. } => {
                let types = nodes.iter().map(|n| n.ty.as_str()).collect();
                let mut labels = Vec::new();
                fn walk<'a>(l: &'a Level, out: &mut Vec<&'a str>) {
                    out.extend(l.fragment.edges.iter().map(|e| e.label.as_str()));
                    for n in &l.negatives {
                        out.extend(n.edges.iter().map(|e| e.label.as_str()));
                    }
                    for c in &l.children {
                        walk(c, out);
                    }
                }
                walk(root, &mut labels);
                (types, labels)
            }
        }
    }

    fn check_types(&self, g: &InstanceGraph) -> Result<(), ConstraintError> {
        let (types, labels) = self.vocabulary();
        let tg = g.types();
        for t in types {
            if !tg.has_type(t) {
                return Err(ConstraintError::TypeGraphMismatch {
                    constraint: self.name.clone(),
                    element: t.to_string(),
                });
            }
        }
        for l in labels {
            if !tg.has_label(l) {
                return Err(ConstraintError::TypeGraphMismatch {
                    constraint: self.name.clone(),
                    element: l.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Whether the underlying formula is true: for `Require` constraints this
    /// is satisfaction, for `Forbid` constraints it means the pattern occurs.
    pub fn truth(&self, g: &InstanceGraph) -> Result<bool, ConstraintError> {
        Ok(self.eval(g)?.0)
    }

    fn eval(&self, g: &InstanceGraph) -> Result<(bool, Option<Witness>), ConstraintError> {
        self.check_types(g)?;
        match &self.body {
            Body::SuccChains => {
                let bad = succ_chain_violation(g);
                let found = bad.is_some();
                let witness = bad.map(|ns| {
                    let mut morphism = Morphism::default();
                    let mut names = Vec::new();
                    for (i, n) in ns.into_iter().enumerate() {
                        morphism.nodes.insert(NodeId(i as u64), n);
                        names.push(alloc::format!("a{i}"));
                    }
                    Witness { names, morphism }
                });
                // the formula is "chains are simple": true when nothing bad was found
                Ok((!found, witness))
            }
            Body::Pattern { nodes, aliases, root } => {
                let ev = Evaluator {
                    g,
                    nodes,
                    aliases,
                    params: BTreeMap::new(),
                };
                let mut binding = alloc::vec![None; nodes.len()];
                let (truth, w) = ev.level(root, &mut binding);
                Ok((truth, w.map(|b| Witness::from_binding(nodes, &b))))
            }
        }
    }

    pub fn evaluate(&self, g: &InstanceGraph) -> Result<ConstraintReport, ConstraintError> {
        let (truth, witness) = self.eval(g)?;
        let violated = match self.polarity {
            Polarity::Require => !truth,
            Polarity::Forbid => truth,
        };
        Ok(ConstraintReport {
            name: self.name.clone(),
            verdict: if violated { Verdict::Violated } else { Verdict::Holds },
            witness: if violated { witness } else { None },
        })
    }
}

/// First problem found in the succ structure: a node with two successors or
/// predecessors (the node and both neighbours) or a cycle (its nodes in order).
fn succ_chain_violation(g: &InstanceGraph) -> Option<Vec<NodeId>> {
    let addrs: Vec<NodeId> = g.nodes_of_type("Address").collect();
    for &a in &addrs {
        let mut out: Vec<NodeId> = g.successors(a, "succ").collect();
        if out.len() > 1 {
            out.sort_unstable();
            let mut v = alloc::vec![a];
            v.extend(out.into_iter().take(2));
            return Some(v);
        }
        let mut inn: Vec<NodeId> = g.predecessors(a, "succ").collect();
        if inn.len() > 1 {
            inn.sort_unstable();
            let mut v = alloc::vec![a];
            v.extend(inn.into_iter().take(2));
            return Some(v);
        }
    }
    // with degrees at most one, a cycle is a walk that returns to its start
    for &a in &addrs {
        let mut path = alloc::vec![a];
        let mut cur = a;
        while let Some(next) = g.successors(cur, "succ").next() {
            if next == a {
                return Some(path);
            }
            if path.len() > addrs.len() {
                break;
            }
            path.push(next);
            cur = next;
        }
    }
    None
}

struct Evaluator<'a> {
    g: &'a InstanceGraph,
    nodes: &'a [PatternNode],
    aliases: &'a [(usize, usize)],
    params: BTreeMap<String, crate::Value>,
}

impl Evaluator<'_> {
    fn extensions(&self, frag: &Fragment, binding: &[Option<NodeId>]) -> Vec<Vec<Option<NodeId>>> {
        let s = Search {
            host: self.g,
            nodes: self.nodes,
            edges: frag.edges.iter().collect(),
            guards: frag.guards.iter().collect(),
            aliases: self.aliases,
            params: &self.params,
        };
        let mut out = Vec::new();
        let mut b = binding.to_vec();
        let _ = s.run(&frag.nodes, &mut b, &mut |full| {
            out.push(full.to_vec());
            ControlFlow::Continue(())
        });
        out
    }

    fn blocked(&self, level: &Level, binding: &[Option<NodeId>]) -> bool {
        level.negatives.iter().any(|n| {
            let s = Search {
                host: self.g,
                nodes: self.nodes,
                edges: n.edges.iter().collect(),
                guards: n.guards.iter().collect(),
                aliases: self.aliases,
                params: &self.params,
            };
            let mut b = binding.to_vec();
            let mut found = false;
            let _ = s.run(&n.nodes, &mut b, &mut |_| {
                found = true;
                ControlFlow::Break(())
            });
            found
        })
    }

    /// Truth of `level` under `binding`, plus the deciding binding: the
    /// smallest counterexample of a failing `forall`, or the smallest
    /// satisfying binding of a successful `exists`.
    fn level(&self, level: &Level, binding: &mut [Option<NodeId>]) -> (bool, Option<Vec<Option<NodeId>>>) {
        let mut exts = self.extensions(&level.fragment, binding);
        exts.retain(|b| !self.blocked(level, b));
        exts.sort();
        match level.quantifier {
            Quantifier::Forall => {
                for mut e in exts {
                    let (ok, inner) = self.children(level, &mut e);
                    if !ok {
                        return (false, inner.or(Some(e)));
                    }
                }
                (true, None)
            }
            Quantifier::Exists => {
                let mut counter = None;
                for mut e in exts {
                    let (ok, inner) = self.children(level, &mut e);
                    if ok {
                        return (true, Some(e));
                    }
                    if counter.is_none() {
                        counter = inner;
                    }
                }
                (false, counter)
            }
        }
    }

    fn children(&self, level: &Level, binding: &mut [Option<NodeId>]) -> (bool, Option<Vec<Option<NodeId>>>) {
        for c in &level.children {
            let (ok, w) = self.level(c, binding);
            if !ok {
                return (false, w);
            }
        }
        (true, None)
    }
}

/// Propositional combination of constraint names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prop {
    True,
    Atom(String),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Prop, out: &mut Vec<&'a str>) {
            match p {
                Prop::True => {}
                Prop::Atom(a) => {
                    if !out.contains(&a.as_str()) {
                        out.push(a);
                    }
                }
                Prop::Not(x) => walk(x, out),
                Prop::And(a, b) | Prop::Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    fn eval(&self, truth: &BTreeMap<&str, bool>) -> bool {
        match self {
            Prop::True => true,
            Prop::Atom(a) => truth[a.as_str()],
            Prop::Not(x) => !x.eval(truth),
            Prop::And(a, b) => a.eval(truth) && b.eval(truth),
            Prop::Or(a, b) => a.eval(truth) || b.eval(truth),
        }
    }
}

/// `G(body)`: `body` holds in every state. An atom is true when its
/// constraint's formula is true, so a forbidden pattern reads as "found".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalFormula {
    pub body: Prop,
}

impl TemporalFormula {
    pub fn parse(src: &str) -> Result<Self, crate::dsl::DslError> {
        crate::dsl::parse_formula(src)
    }
}

impl core::fmt::Display for Prop {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Prop::True => f.write_str("true"),
            Prop::Atom(a) => f.write_str(a),
            Prop::Not(x) => write!(f, "!{x}"),
            Prop::And(a, b) => write!(f, "({a} & {b})"),
            Prop::Or(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

impl core::fmt::Display for TemporalFormula {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "G {}", self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaVerdict {
    pub holds: bool,
    /// First state where the body is false.
    pub violating_state: Option<usize>,
    /// Reports of the formula's constraints at that state.
    pub reports: Vec<ConstraintReport>,
}

const WELLFORMED: &str = include_str!("../constraints/wellformed.gc");
const INTEGRITY: &str = include_str!("../constraints/integrity.gc");

/// Named constraints, split into the well-formedness and referential
/// integrity groups.
#[derive(Debug, Clone)]
pub struct ConstraintCatalog {
    constraints: BTreeMap<String, Constraint>,
    wellformed: Vec<String>,
    integrity: Vec<String>,
}

impl ConstraintCatalog {
    pub fn empty() -> Self {
        ConstraintCatalog {
            constraints: BTreeMap::new(),
            wellformed: Vec::new(),
            integrity: Vec::new(),
        }
    }

    pub fn standard() -> Self {
        let mut cat = Self::empty();
        for c in crate::dsl::parse_constraints(WELLFORMED).expect("built-in constraints parse") {
            cat.wellformed.push(c.name.clone());
            cat.constraints.insert(c.name.clone(), c);
        }
        let chain = Constraint {
            name: "isWFsuccChain".into(),
            polarity: Polarity::Require,
            body: Body::SuccChains,
        };
        cat.wellformed.push(chain.name.clone());
        cat.constraints.insert(chain.name.clone(), chain);
        for c in crate::dsl::parse_constraints(INTEGRITY).expect("built-in constraints parse") {
            cat.integrity.push(c.name.clone());
            cat.constraints.insert(c.name.clone(), c);
        }
        cat
    }

    /// Adds or replaces a constraint outside both groups.
    pub fn insert(&mut self, c: Constraint) {
        self.constraints.insert(c.name.clone(), c);
    }

    pub fn get(&self, name: &str) -> Option<&Constraint> {
        self.constraints.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.constraints.keys().map(String::as_str)
    }

    pub fn wellformed_names(&self) -> &[String] {
        &self.wellformed
    }

    pub fn integrity_names(&self) -> &[String] {
        &self.integrity
    }

    pub fn evaluate(&self, g: &InstanceGraph, name: &str) -> Result<ConstraintReport, ConstraintError> {
        self.get(name)
            .ok_or_else(|| ConstraintError::UnknownConstraint(name.to_string()))?
            .evaluate(g)
    }

    fn evaluate_all(&self, g: &InstanceGraph, names: &[String]) -> Vec<ConstraintReport> {
        names
            .iter()
            .map(|n| {
                self.evaluate(g, n)
                    .expect("catalog constraints fit the pointer type graph")
            })
            .collect()
    }

    pub fn check_wellformed(&self, g: &InstanceGraph) -> Vec<ConstraintReport> {
        self.evaluate_all(g, &self.wellformed)
    }

    pub fn check_referential_integrity(&self, g: &InstanceGraph) -> Vec<ConstraintReport> {
        self.evaluate_all(g, &self.integrity)
    }

    /// Rejects formulas naming constraints outside the catalog.
    pub fn validate_formula(&self, f: &TemporalFormula) -> Result<(), ConstraintError> {
        for a in f.body.atoms() {
            if !self.constraints.contains_key(a) {
                return Err(ConstraintError::UnknownConstraint(a.to_string()));
            }
        }
        Ok(())
    }

    /// Truth of the formula body in one state.
    pub fn eval_prop(&self, g: &InstanceGraph, p: &Prop) -> Result<bool, ConstraintError> {
        let mut truth = BTreeMap::new();
        for a in p.atoms() {
            let c = self
                .get(a)
                .ok_or_else(|| ConstraintError::UnknownConstraint(a.to_string()))?;
            truth.insert(a, c.truth(g)?);
        }
        Ok(p.eval(&truth))
    }

    /// `G(body)` over a sequence of states.
    pub fn eval_formula_on_trace<'a, I>(
        &self,
        states: I,
        f: &TemporalFormula,
    ) -> Result<FormulaVerdict, ConstraintError>
    where
        I: IntoIterator<Item = &'a InstanceGraph>,
    {
        self.validate_formula(f)?;
        let mut type_name: Option<String> = None;
        for (i, g) in states.into_iter().enumerate() {
            match &type_name {
                None => type_name = Some(g.types().name().to_string()),
                Some(t) if t != g.types().name() => return Err(ConstraintError::MixedTypeGraphs),
                _ => {}
            }
            if !self.eval_prop(g, &f.body)? {
                let reports = f
                    .body
                    .atoms()
                    .into_iter()
                    .map(|a| self.evaluate(g, a))
                    .collect::<Result<_, _>>()?;
                return Ok(FormulaVerdict {
                    holds: false,
                    violating_state: Some(i),
                    reports,
                });
            }
        }
        Ok(FormulaVerdict {
            holds: true,
            violating_state: None,
            reports: Vec::new(),
        })
    }
}

/// Well-formedness reports against the built-in catalog.
pub fn check_wellformed(g: &InstanceGraph) -> Vec<ConstraintReport> {
    ConstraintCatalog::standard().check_wellformed(g)
}

/// Referential-integrity reports against the built-in catalog.
pub fn check_referential_integrity(g: &InstanceGraph) -> Vec<ConstraintReport> {
    ConstraintCatalog::standard().check_referential_integrity(g)
}

/// The well-formedness invariant as a formula.
pub const WF_FORMULA: &str = "G (isWFfstEx & ! notWFfstToV)";
/// The referential-integrity invariant as a formula.
pub const RI_FORMULA: &str = "G (! notRIrefTofree & ! notRIrefWOcont)";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{TypeGraph, Value};
    use crate::pointer_model::{build_start_graph, build_type_graph, textbook_declarations};
    use alloc::vec;

    fn none() -> Vec<(&'static str, Value)> {
        Vec::new()
    }

    fn textbook() -> InstanceGraph {
        build_start_graph(&textbook_declarations(), 6).unwrap()
    }

    #[test]
    fn start_graph_is_wellformed_and_consistent() {
        let cat = ConstraintCatalog::standard();
        let g = textbook();
        for r in cat
            .check_wellformed(&g)
            .iter()
            .chain(&cat.check_referential_integrity(&g))
        {
            assert!(r.holds(), "{r:?}");
        }
        assert_eq!(cat.wellformed_names().len(), 8);
        assert_eq!(cat.integrity_names().len(), 2);
    }

    #[test]
    fn vacuous_forall_on_empty_graph() {
        let cat = ConstraintCatalog::standard();
        let g = InstanceGraph::new(build_type_graph());
        assert!(cat.evaluate(&g, "isWFfstEx").unwrap().holds());
    }

    #[test]
    fn array_without_fst_violates_existence() {
        let cat = ConstraintCatalog::standard();
        let mut g = InstanceGraph::new(build_type_graph());
        let a = g.add_node("Array", vec![("len", Value::Int(0))]).unwrap();
        let r = cat.evaluate(&g, "isWFfstEx").unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.witness.unwrap().bindings(), vec![("a", a)]);
    }

    #[test]
    fn double_fst_reports_smallest_binding() {
        let cat = ConstraintCatalog::standard();
        let mut g = InstanceGraph::new(build_type_graph());
        let a = g.add_node("Array", none()).unwrap();
        let p1 = g.add_node("Pointer", none()).unwrap();
        let p2 = g.add_node("Pointer", none()).unwrap();
        g.add_edge(a, "fst", p1).unwrap();
        g.add_edge(a, "fst", p2).unwrap();
        let r = cat.evaluate(&g, "notWFfstToV").unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.witness.unwrap().nodes(), vec![a, p1, p2]);
    }

    #[test]
    fn two_refs_violate_ref_cardinality() {
        let cat = ConstraintCatalog::standard();
        let mut g = InstanceGraph::new(build_type_graph());
        let p = g.add_node("Pointer", none()).unwrap();
        let a1 = g.add_node("Address", none()).unwrap();
        let a2 = g.add_node("Address", none()).unwrap();
        g.add_edge(p, "ref", a1).unwrap();
        g.add_edge(p, "ref", a2).unwrap();
        let bad: Vec<String> = cat
            .check_wellformed(&g)
            .into_iter()
            .filter(|r| !r.holds())
            .map(|r| r.name)
            .collect();
        assert_eq!(bad, vec!["notWFrefToV".to_string()]);
    }

    #[test]
    fn succ_cycle_and_branch() {
        let cat = ConstraintCatalog::standard();
        let mut g = InstanceGraph::new(build_type_graph());
        let a1 = g.add_node("Address", none()).unwrap();
        let a2 = g.add_node("Address", none()).unwrap();
        g.add_edge(a1, "succ", a2).unwrap();
        assert!(cat.evaluate(&g, "isWFsuccChain").unwrap().holds());
        g.add_edge(a2, "succ", a1).unwrap();
        let r = cat.evaluate(&g, "isWFsuccChain").unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.witness.unwrap().nodes(), vec![a1, a2]);
        // self loop
        let mut h = InstanceGraph::new(build_type_graph());
        let x = h.add_node("Address", none()).unwrap();
        h.add_edge(x, "succ", x).unwrap();
        assert!(!cat.evaluate(&h, "isWFsuccChain").unwrap().holds());
    }

    #[test]
    fn integrity_archetypes() {
        let cat = ConstraintCatalog::standard();
        let mut g = InstanceGraph::new(build_type_graph());
        let p = g.add_node("Pointer", none()).unwrap();
        let a = g.add_node("Address", none()).unwrap();
        g.add_edge(p, "ref", a).unwrap();
        let r = cat.evaluate(&g, "notRIrefTofree").unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.witness.unwrap().nodes(), vec![p, a]);
        let g2 = g.with_attr(a, "free", Value::Bool(false)).unwrap();
        assert!(cat.evaluate(&g2, "notRIrefTofree").unwrap().holds());
        assert!(!cat.evaluate(&g2, "notRIrefWOcont").unwrap().holds());
        let (g3, o) = g2.with_node("Int", none()).unwrap();
        let g3 = g3.with_edge(a, "cont", o).unwrap();
        assert!(cat.evaluate(&g3, "notRIrefWOcont").unwrap().holds());
    }

    #[test]
    fn formula_over_trace() {
        let cat = ConstraintCatalog::standard();
        let ri = TemporalFormula::parse(RI_FORMULA).unwrap();
        let wf = TemporalFormula::parse(WF_FORMULA).unwrap();
        let empty: [InstanceGraph; 0] = [];
        assert!(cat.eval_formula_on_trace(empty.iter(), &ri).unwrap().holds);
        let g = textbook();
        let agep = g
            .nodes_of_type("Pointer")
            .find(|p| g.out_edges(*p).next().is_none() && g.in_edges(*p).next().is_none())
            .unwrap();
        let free = g
            .nodes_of_type("Address")
            .find(|a| g.attr(*a, "free") == Some(&Value::Bool(true)))
            .unwrap();
        let bad = g.with_edge(agep, "ref", free).unwrap();
        let v = cat.eval_formula_on_trace([&g, &bad], &ri).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violating_state, Some(1));
        assert!(v.reports.iter().any(|r| r.name == "notRIrefTofree" && !r.holds()));
        assert!(cat.eval_formula_on_trace([&g, &bad], &wf).unwrap().holds);
        let unknown = TemporalFormula::parse("G nope").unwrap();
        assert_eq!(
            cat.eval_formula_on_trace([&g], &unknown),
            Err(ConstraintError::UnknownConstraint("nope".into()))
        );
    }

    #[test]
    fn foreign_type_graph_rejected() {
        let cat = ConstraintCatalog::standard();
        let t = TypeGraph::builder("other").node("Thing", None, &[]).build().unwrap();
        let g = InstanceGraph::new(alloc::sync::Arc::new(t));
        assert!(matches!(
            cat.evaluate(&g, "isWFfstEx"),
            Err(ConstraintError::TypeGraphMismatch { .. })
        ));
    }
}
