//! Rewrite rules in combined notation and their application.
//!
//! A rule is a single graph whose elements carry a [`Role`]: readers are
//! matched and kept, erasers are matched and deleted, creators are added,
//! and embargo elements form negative application conditions. Matching is
//! injective; node deletion removes dangling edges (single-pushout style).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;

use crate::graph::{AttrType, Edge, EdgeId, GraphError, InstanceGraph, Morphism, Node, NodeId, TypeGraph, Value};
use crate::matching::{operand_value, Guard, Operand, PatternEdge, PatternNode, Search};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Reader,
    Eraser,
    Creator,
    Embargo,
}

impl Role {
    pub fn keyword(self) -> &'static str {
        match self {
            Role::Reader => "keep",
            Role::Eraser => "del",
            Role::Creator => "new",
            Role::Embargo => "forbid",
        }
    }

    fn in_lhs(self) -> bool {
        matches!(self, Role::Reader | Role::Eraser)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleNode {
    pub name: String,
    pub ty: String,
    pub role: Role,
    pub anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleEdge {
    pub src: usize,
    pub label: String,
    pub tgt: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub node: usize,
    pub attr: String,
    pub value: Operand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: AttrType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub description: String,
    pub params: Vec<Param>,
    pub nodes: Vec<RuleNode>,
    pub edges: Vec<RuleEdge>,
    pub guards: Vec<Guard>,
    pub assignments: Vec<Assignment>,
    /// Node pairs exempt from injectivity.
    pub aliases: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rule `{rule}`: {msg}")]
    Invalid { rule: String, msg: String },
    #[error("rule `{rule}`: element `{element}` has conflicting roles")]
    RoleConflict { rule: String, element: String },
    #[error("rule `{rule}` has no anchor `{anchor}`")]
    UnknownAnchor { rule: String, anchor: String },
    #[error("anchor `{anchor}` expects {expected}, node {node} is {found}")]
    AnchorTypeMismatch {
        anchor: String,
        expected: String,
        node: NodeId,
        found: String,
    },
    #[error("rule `{rule}` needs parameter `{param}`")]
    MissingParam { rule: String, param: String },
    #[error("parameter `{param}` expects {expected}")]
    ParamType { param: String, expected: AttrType },
    #[error("match of `{rule}` is no longer valid in this graph")]
    StaleMatch { rule: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl Rule {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn anchors(&self) -> impl Iterator<Item = &RuleNode> {
        self.nodes.iter().filter(|n| n.anchor)
    }

    pub fn count_nodes(&self, role: Role) -> usize {
        self.nodes.iter().filter(|n| n.role == role).count()
    }

    pub fn count_edges(&self, role: Role) -> usize {
        self.edges.iter().filter(|e| e.role == role).count()
    }

    /// Indices of the matched (reader and eraser) nodes, in declaration order.
    pub fn lhs_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|i| self.nodes[*i].role.in_lhs()).collect()
    }

    fn pattern_nodes(&self) -> Vec<PatternNode> {
        self.nodes
            .iter()
            .map(|n| PatternNode {
                name: n.name.clone(),
                ty: n.ty.clone(),
            })
            .collect()
    }

    fn invalid(&self, msg: impl Into<String>) -> RuleError {
        RuleError::Invalid {
            rule: self.name.clone(),
            msg: msg.into(),
        }
    }

    /// Checks the rule against a type graph and the role discipline.
    pub fn validate(&self, types: &TypeGraph) -> Result<(), RuleError> {
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.name.as_str()) {
                return Err(RuleError::RoleConflict {
                    rule: self.name.clone(),
                    element: n.name.clone(),
                });
            }
            let decl = types
                .node_type(&n.ty)
                .ok_or_else(|| self.invalid(alloc::format!("unknown type `{}`", n.ty)))?;
            if n.role == Role::Creator && decl.is_abstract {
                return Err(self.invalid(alloc::format!("cannot create abstract `{}`", n.ty)));
            }
            if n.anchor && !n.role.in_lhs() {
                return Err(self.invalid(alloc::format!("anchor `{}` must be matched", n.name)));
            }
        }
        let mut edge_keys = BTreeSet::new();
        for e in &self.edges {
            let (s, t) = (&self.nodes[e.src], &self.nodes[e.tgt]);
            if !edge_keys.insert((e.src, e.label.as_str(), e.tgt)) {
                return Err(RuleError::RoleConflict {
                    rule: self.name.clone(),
                    element: alloc::format!("{} -{}-> {}", s.name, e.label, t.name),
                });
            }
            if !types.edge_possible(&e.label, &s.ty, &t.ty) {
                return Err(self.invalid(alloc::format!("edge {} -{}-> {} is ill-typed", s.name, e.label, t.name)));
            }
            let ok = match e.role {
                Role::Reader | Role::Eraser => s.role.in_lhs() && t.role.in_lhs(),
                Role::Creator => {
                    matches!(s.role, Role::Reader | Role::Creator) && matches!(t.role, Role::Reader | Role::Creator)
                }
                Role::Embargo => s.role != Role::Creator && t.role != Role::Creator,
            };
            if !ok {
                return Err(self.invalid(alloc::format!(
                    "{} edge {} -{}-> {} has endpoints with incompatible roles",
                    e.role,
                    s.name,
                    e.label,
                    t.name
                )));
            }
            if e.role == Role::Creator
                && self
                    .edges
                    .iter()
                    .any(|o| o.role == Role::Eraser && o.src == e.src && o.tgt == e.tgt && o.label == e.label)
            {
                return Err(RuleError::RoleConflict {
                    rule: self.name.clone(),
                    element: alloc::format!("{} -{}-> {}", s.name, e.label, t.name),
                });
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.role == Role::Embargo
                && self
                    .edges
                    .iter()
                    .any(|e| (e.src == i || e.tgt == i) && e.role != Role::Embargo)
            {
                return Err(self.invalid(alloc::format!(
                    "forbidden node `{}` may only carry forbidden edges",
                    n.name
                )));
            }
        }
        let params: BTreeMap<&str, AttrType> = self.params.iter().map(|p| (p.name.as_str(), p.ty)).collect();
        let check_operand = |op: &Operand, want: AttrType| -> Result<(), RuleError> {
            let found = match op {
                Operand::Lit(v) => v.ty(),
                Operand::Param(p) => *params
                    .get(p.as_str())
                    .ok_or_else(|| self.invalid(alloc::format!("undeclared parameter `{p}`")))?,
                Operand::Attr { node, attr } => {
                    let n = &self.nodes[*node];
                    if n.role == Role::Creator {
                        return Err(self.invalid("cannot read attributes of created nodes"));
                    }
                    types
                        .attribute(&n.ty, attr)
                        .ok_or_else(|| self.invalid(alloc::format!("{}.{} is not declared", n.name, attr)))?
                        .ty
                }
            };
            if found != want {
                return Err(self.invalid(alloc::format!("expected {want}, found {found}")));
            }
            Ok(())
        };
        for g in &self.guards {
            match g {
                Guard::Attr { node, attr, rhs, .. } => {
                    let n = &self.nodes[*node];
                    if n.role == Role::Creator {
                        return Err(self.invalid("guards cannot constrain created nodes"));
                    }
                    let decl = types
                        .attribute(&n.ty, attr)
                        .ok_or_else(|| self.invalid(alloc::format!("{}.{} is not declared", n.name, attr)))?;
                    check_operand(rhs, decl.ty)?;
                    if let Operand::Attr { node: other, .. } = rhs {
                        let embargo = |i: usize| self.nodes[i].role == Role::Embargo;
                        if embargo(*node) != embargo(*other) && embargo(*other) {
                            return Err(self.invalid("guard mixes forbidden and matched nodes"));
                        }
                    }
                }
                Guard::Distinct(a, b) => {
                    if !self.nodes[*a].role.in_lhs() || !self.nodes[*b].role.in_lhs() {
                        return Err(self.invalid("`!=` only relates matched nodes"));
                    }
                }
            }
        }
        for a in &self.assignments {
            let n = &self.nodes[a.node];
            if !matches!(n.role, Role::Reader | Role::Creator) {
                return Err(self.invalid(alloc::format!("cannot assign to {} node `{}`", n.role, n.name)));
            }
            let decl = types
                .attribute(&n.ty, &a.attr)
                .ok_or_else(|| self.invalid(alloc::format!("{}.{} is not declared", n.name, a.attr)))?;
            check_operand(&a.value, decl.ty)?;
        }
        Ok(())
    }

    /// Negative application conditions: connected groups of embargo
    /// elements. An embargo edge between two matched nodes is its own group.
    pub fn negative_conditions(&self) -> Vec<Nac> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let embargo = |i: usize| self.nodes[i].role == Role::Embargo;
        for e in self.edges.iter().filter(|e| e.role == Role::Embargo) {
            if embargo(e.src) && embargo(e.tgt) {
                let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.tgt));
                parent[a] = b;
            }
        }
        let mut groups: BTreeMap<usize, Nac> = BTreeMap::new();
        for i in (0..n).filter(|i| embargo(*i)) {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().nodes.push(i);
        }
        let mut loose = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            if e.role != Role::Embargo {
                continue;
            }
            let owner = if embargo(e.src) {
                Some(find(&mut parent, e.src))
            } else if embargo(e.tgt) {
                Some(find(&mut parent, e.tgt))
            } else {
                None
            };
            match owner {
                Some(r) => groups.entry(r).or_default().edges.push(k),
                None => loose.push(Nac {
                    nodes: Vec::new(),
                    edges: alloc::vec![k],
                    guards: Vec::new(),
                }),
            }
        }
        for (k, g) in self.guards.iter().enumerate() {
            if let Some(&emb) = g.nodes().iter().find(|i| embargo(**i)) {
                let r = find(&mut parent, emb);
                groups.entry(r).or_default().guards.push(k);
            }
        }
        let mut out: Vec<Nac> = groups.into_values().collect();
        out.extend(loose);
        out
    }
}

/// One negative application condition of a rule, as indices into the rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Nac {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub guards: Vec<usize>,
}

/// A match of a rule's reader and eraser part. Pattern node `i` is keyed as
/// `NodeId(i)` in the morphism, pattern edge `k` as `EdgeId(k)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub rule: String,
    pub morphism: Morphism,
}

impl Match {
    pub fn node(&self, rule: &Rule, name: &str) -> Option<NodeId> {
        rule.node_index(name).and_then(|i| self.morphism.node(NodeId(i as u64)))
    }

    /// Host ids in pattern declaration order, the sort key for matches.
    pub fn image(&self) -> Vec<NodeId> {
        self.morphism.nodes.values().copied().collect()
    }
}

/// Partial pre-binding of anchors by name.
pub type Anchors = BTreeMap<String, NodeId>;

fn lhs_search<'a>(
    g: &'a InstanceGraph,
    rule: &'a Rule,
    pattern: &'a [PatternNode],
    lhs_edges: &'a [PatternEdge],
    params: &'a BTreeMap<String, Value>,
) -> Search<'a> {
    let embargo = |i: usize| rule.nodes[i].role == Role::Embargo;
    Search {
        host: g,
        nodes: pattern,
        edges: lhs_edges.iter().collect(),
        guards: rule
            .guards
            .iter()
            .filter(|gd| !gd.nodes().iter().any(|i| embargo(*i)))
            .collect(),
        aliases: &rule.aliases,
        params,
    }
}

fn to_pattern_edges(rule: &Rule, keep: impl Fn(&RuleEdge) -> bool) -> Vec<PatternEdge> {
    rule.edges
        .iter()
        .filter(|e| keep(e))
        .map(|e| PatternEdge {
            src: e.src,
            label: e.label.clone(),
            tgt: e.tgt,
        })
        .collect()
}

fn nac_blocks(
    g: &InstanceGraph,
    rule: &Rule,
    pattern: &[PatternNode],
    nacs: &[Nac],
    binding: &[Option<NodeId>],
    params: &BTreeMap<String, Value>,
) -> bool {
    let lhs = rule.lhs_nodes();
    nacs.iter().any(|nac| {
        // embargo nodes may coincide with matched nodes, so "p refs some
        // address" also sees the address p is matched to
        let mut aliases = rule.aliases.clone();
        for n in &nac.nodes {
            aliases.extend(lhs.iter().map(|l| (*n, *l)));
        }
        let edges: Vec<PatternEdge> = nac
            .edges
            .iter()
            .map(|k| {
                let e = &rule.edges[*k];
                PatternEdge {
                    src: e.src,
                    label: e.label.clone(),
                    tgt: e.tgt,
                }
            })
            .collect();
        let search = Search {
            host: g,
            nodes: pattern,
            edges: edges.iter().collect(),
            guards: nac.guards.iter().map(|k| &rule.guards[*k]).collect(),
            aliases: &aliases,
            params,
        };
        let mut b = binding.to_vec();
        let mut found = false;
        let _ = search.run(&nac.nodes, &mut b, &mut |_| {
            found = true;
            ControlFlow::Break(())
        });
        found
    })
}

fn morphism_of(g: &InstanceGraph, rule: &Rule, binding: &[Option<NodeId>]) -> Morphism {
    let mut m = Morphism::default();
    for i in rule.lhs_nodes() {
        if let Some(h) = binding[i] {
            m.nodes.insert(NodeId(i as u64), h);
        }
    }
    for (k, e) in rule.edges.iter().enumerate() {
        if !e.role.in_lhs() {
            continue;
        }
        if let (Some(s), Some(t)) = (binding[e.src], binding[e.tgt]) {
            if let Some(h) = g.find_edge(s, &e.label, t) {
                m.edges.insert(EdgeId(k as u64), h);
            }
        }
    }
    m
}

fn bind_anchors(g: &InstanceGraph, rule: &Rule, anchors: &Anchors) -> Result<Vec<Option<NodeId>>, RuleError> {
    let mut binding = alloc::vec![None; rule.nodes.len()];
    for (name, host) in anchors {
        let i = rule
            .node_index(name)
            .filter(|i| rule.nodes[*i].anchor)
            .ok_or_else(|| RuleError::UnknownAnchor {
                rule: rule.name.clone(),
                anchor: name.clone(),
            })?;
        let found = g.node_type(*host).ok_or(GraphError::UnknownNode(*host))?;
        if !g.types().is_subtype(found, &rule.nodes[i].ty) {
            return Err(RuleError::AnchorTypeMismatch {
                anchor: name.clone(),
                expected: rule.nodes[i].ty.clone(),
                node: *host,
                found: found.to_string(),
            });
        }
        binding[i] = Some(*host);
    }
    Ok(binding)
}

fn check_guard_params(rule: &Rule, params: &BTreeMap<String, Value>) -> Result<(), RuleError> {
    for g in &rule.guards {
        if let Some(p) = g.params() {
            if !params.contains_key(p) {
                return Err(RuleError::MissingParam {
                    rule: rule.name.clone(),
                    param: p.to_string(),
                });
            }
        }
    }
    Ok(())
}

fn enumerate(
    g: &InstanceGraph,
    rule: &Rule,
    binding: Vec<Option<NodeId>>,
    params: &BTreeMap<String, Value>,
) -> Vec<Match> {
    let pattern = rule.pattern_nodes();
    let lhs_edges = to_pattern_edges(rule, |e| e.role.in_lhs());
    let search = lhs_search(g, rule, &pattern, &lhs_edges, params);
    let nacs = rule.negative_conditions();
    let lhs = rule.lhs_nodes();
    let mut out = Vec::new();
    let mut b = binding;
    let _ = search.run(&lhs, &mut b, &mut |full| {
        if !nac_blocks(g, rule, &pattern, &nacs, full, params) {
            out.push(Match {
                rule: rule.name.clone(),
                morphism: morphism_of(g, rule, full),
            });
        }
        ControlFlow::Continue(())
    });
    out.sort_by_cached_key(Match::image);
    out
}

/// All matches of `rule` in `g` that agree with `anchors`, sorted by the
/// host ids bound to the matched nodes in declaration order.
pub fn find_matches(g: &InstanceGraph, rule: &Rule, anchors: &Anchors) -> Result<Vec<Match>, RuleError> {
    find_matches_with(g, rule, anchors, &BTreeMap::new())
}

/// Like [`find_matches`], for rules whose guards read parameters.
pub fn find_matches_with(
    g: &InstanceGraph,
    rule: &Rule,
    anchors: &Anchors,
    params: &BTreeMap<String, Value>,
) -> Result<Vec<Match>, RuleError> {
    check_guard_params(rule, params)?;
    let binding = bind_anchors(g, rule, anchors)?;
    Ok(enumerate(g, rule, binding, params))
}

/// Whether `m` is (still) a match of `rule` in `g`.
pub fn is_valid_match(g: &InstanceGraph, rule: &Rule, m: &Match, params: &BTreeMap<String, Value>) -> bool {
    if m.rule != rule.name {
        return false;
    }
    let lhs = rule.lhs_nodes();
    if m.morphism.nodes.len() != lhs.len() {
        return false;
    }
    let mut binding = alloc::vec![None; rule.nodes.len()];
    for i in &lhs {
        match m.morphism.node(NodeId(*i as u64)) {
            Some(h) if g.contains_node(h) => binding[*i] = Some(h),
            _ => return false,
        }
    }
    for i in &lhs {
        let ty = g.node_type(binding[*i].expect("bound")).expect("exists");
        if !g.types().is_subtype(ty, &rule.nodes[*i].ty) {
            return false;
        }
    }
    let found = enumerate(g, rule, binding, params);
    found.len() == 1 && found[0].morphism == m.morphism
}

/// What a rule application changed, for display and diffing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diff {
    pub created_nodes: Vec<NodeId>,
    pub created_edges: Vec<EdgeId>,
    pub deleted_nodes: Vec<(NodeId, Node)>,
    pub deleted_edges: Vec<(EdgeId, Edge)>,
    /// Attributes written by assignments.
    pub updated: Vec<(NodeId, String)>,
}

impl Diff {
    pub fn is_empty(&self) -> bool {
        self.created_nodes.is_empty()
            && self.created_edges.is_empty()
            && self.deleted_nodes.is_empty()
            && self.deleted_edges.is_empty()
            && self.updated.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub graph: InstanceGraph,
    pub diff: Diff,
}

/// Applies `rule` at `m`, returning the new snapshot. `g` is left untouched.
pub fn apply_rule(
    g: &InstanceGraph,
    rule: &Rule,
    m: &Match,
    params: &BTreeMap<String, Value>,
) -> Result<Application, RuleError> {
    for p in &rule.params {
        let v = params.get(&p.name).ok_or_else(|| RuleError::MissingParam {
            rule: rule.name.clone(),
            param: p.name.clone(),
        })?;
        if v.ty() != p.ty {
            return Err(RuleError::ParamType {
                param: p.name.clone(),
                expected: p.ty,
            });
        }
    }
    check_guard_params(rule, params)?;
    if !is_valid_match(g, rule, m, params) {
        return Err(RuleError::StaleMatch {
            rule: rule.name.clone(),
        });
    }
    let mut binding: Vec<Option<NodeId>> = alloc::vec![None; rule.nodes.len()];
    for (k, v) in &m.morphism.nodes {
        binding[k.0 as usize] = Some(*v);
    }
    // right-hand sides are evaluated against the pre-state
    let mut writes = Vec::with_capacity(rule.assignments.len());
    for a in &rule.assignments {
        let v = operand_value(g, &binding, params, &a.value).ok_or_else(|| RuleError::Invalid {
            rule: rule.name.clone(),
            msg: alloc::format!("cannot evaluate assignment to {}", a.attr),
        })?;
        writes.push((a.node, a.attr.clone(), v));
    }

    let mut out = g.clone();
    let mut diff = Diff::default();
    for (k, e) in rule.edges.iter().enumerate() {
        if e.role == Role::Eraser {
            let host = m.morphism.edges[&EdgeId(k as u64)];
            let removed = out.remove_edge(host)?;
            diff.deleted_edges.push((host, removed));
        }
    }
    for (i, n) in rule.nodes.iter().enumerate() {
        if n.role == Role::Eraser {
            let host = binding[i].expect("eraser bound");
            let node = out.node(host).cloned().ok_or(GraphError::UnknownNode(host))?;
            let cascaded = out.remove_node(host)?;
            diff.deleted_edges.extend(cascaded);
            diff.deleted_nodes.push((host, node));
        }
    }
    for (i, n) in rule.nodes.iter().enumerate() {
        if n.role == Role::Creator {
            let id = out.add_node(&n.ty, Vec::<(String, Value)>::new())?;
            binding[i] = Some(id);
            diff.created_nodes.push(id);
        }
    }
    for e in rule.edges.iter().filter(|e| e.role == Role::Creator) {
        let (s, t) = (binding[e.src].expect("bound"), binding[e.tgt].expect("bound"));
        // simple graphs: creating an existing edge is a no-op
        if !out.has_edge(s, &e.label, t) {
            diff.created_edges.push(out.add_edge(s, &e.label, t)?);
        }
    }
    for (node, attr, v) in writes {
        let host = binding[node].expect("bound");
        out.set_attr(host, &attr, v)?;
        if !diff.created_nodes.contains(&host) {
            diff.updated.push((host, attr));
        }
    }
    Ok(Application { graph: out, diff })
}
