//! Typed attributed graphs.
//!
//! A [`TypeGraph`] declares node types (with single-inheritance subtyping and
//! attribute schemas) and edge types. An [`InstanceGraph`] is a simple
//! directed graph typed over it: at most one edge per `(source, label,
//! target)` triple, no edge attributes.
//!
//! Graphs are plain values. Cloning yields an independent snapshot, the
//! `with_*`/`without_*` methods return a modified copy and leave `self`
//! untouched, and the `&mut` methods are provided for code that owns a
//! scratch copy (rule application, builders).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttrType {
    Int,
    Bool,
    Str,
}

impl AttrType {
    pub fn default_value(self) -> Value {
        match self {
            AttrType::Int => Value::Int(0),
            AttrType::Bool => Value::Bool(false),
            AttrType::Str => Value::Str(String::new()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttrType::Int => "int",
            AttrType::Bool => "bool",
            AttrType::Str => "string",
        }
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
}

impl Value {
    pub fn ty(&self) -> AttrType {
        match self {
            Value::Int(_) => AttrType::Int,
            Value::Bool(_) => AttrType::Bool,
            Value::Str(_) => AttrType::Str,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node type `{0}`")]
    UnknownType(String),
    #[error("node type `{0}` is abstract and cannot be instantiated")]
    AbstractType(String),
    #[error("attribute `{attr}` of `{ty}`: expected {expected}, got {found}")]
    AttributeSchemaMismatch {
        ty: String,
        attr: String,
        expected: AttrType,
        found: AttrType,
    },
    #[error("type `{ty}` has no attribute `{attr}`")]
    UnknownAttribute { ty: String, attr: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("edge `{label}` is not allowed from `{source_ty}` to `{target_ty}`")]
    IllTypedEdge {
        label: String,
        source_ty: String,
        target_ty: String,
    },
    #[error("edge {src} -{label}-> {tgt} already exists")]
    DuplicateEdge { src: NodeId, label: String, tgt: NodeId },
    #[error("invalid type graph: {0}")]
    InvalidTypeGraph(String),
    #[error("graphs are typed over different type graphs")]
    TypeGraphMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrDecl {
    pub name: String,
    pub ty: AttrType,
    pub default: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeType {
    pub name: String,
    pub supertype: Option<String>,
    pub is_abstract: bool,
    /// Attributes declared on this type; inherited ones live on the supertypes.
    pub attrs: Vec<AttrDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeType {
    pub label: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGraph {
    name: String,
    node_types: BTreeMap<String, NodeType>,
    edge_types: Vec<EdgeType>,
}

impl TypeGraph {
    pub fn builder(name: &str) -> TypeGraphBuilder {
        TypeGraphBuilder {
            name: name.to_string(),
            node_types: Vec::new(),
            edge_types: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_types(&self) -> impl Iterator<Item = &NodeType> {
        self.node_types.values()
    }

    pub fn edge_types(&self) -> &[EdgeType] {
        &self.edge_types
    }

    pub fn node_type(&self, name: &str) -> Option<&NodeType> {
        self.node_types.get(name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.node_types.contains_key(name)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.edge_types.iter().any(|e| e.label == label)
    }

    /// `sub ⊑ sup`: reflexive, follows the supertype chain.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = Some(sub);
        while let Some(name) = cur {
            if name == sup {
                return true;
            }
            cur = self.node_types.get(name).and_then(|t| t.supertype.as_deref());
        }
        false
    }

    /// All attributes of a type, inherited ones first.
    pub fn attributes(&self, ty: &str) -> Vec<&AttrDecl> {
        let mut chain = Vec::new();
        let mut cur = self.node_types.get(ty);
        while let Some(t) = cur {
            chain.push(t);
            cur = t.supertype.as_deref().and_then(|s| self.node_types.get(s));
        }
        chain.iter().rev().flat_map(|t| t.attrs.iter()).collect()
    }

    pub fn attribute(&self, ty: &str, attr: &str) -> Option<&AttrDecl> {
        self.attributes(ty).into_iter().find(|a| a.name == attr)
    }

    pub fn edge_allowed(&self, label: &str, source_ty: &str, target_ty: &str) -> bool {
        self.edge_types
            .iter()
            .any(|e| e.label == label && self.is_subtype(source_ty, &e.source) && self.is_subtype(target_ty, &e.target))
    }

    /// Whether an edge with `label` could connect *some* subtype of
    /// `source_ty` to *some* subtype of `target_ty`. Used to typecheck
    /// pattern edges whose endpoints may be supertypes (e.g. `Object`).
    pub fn edge_possible(&self, label: &str, source_ty: &str, target_ty: &str) -> bool {
        let compatible = |a: &str, b: &str| self.is_subtype(a, b) || self.is_subtype(b, a);
        self.edge_types
            .iter()
            .any(|e| e.label == label && compatible(source_ty, &e.source) && compatible(target_ty, &e.target))
    }
}

pub struct TypeGraphBuilder {
    name: String,
    node_types: Vec<NodeType>,
    edge_types: Vec<EdgeType>,
}

impl TypeGraphBuilder {
    pub fn node(mut self, name: &str, supertype: Option<&str>, attrs: &[(&str, AttrType, Value)]) -> Self {
        self.node_types.push(NodeType {
            name: name.to_string(),
            supertype: supertype.map(ToString::to_string),
            is_abstract: false,
            attrs: attrs
                .iter()
                .map(|(n, t, d)| AttrDecl {
                    name: n.to_string(),
                    ty: *t,
                    default: d.clone(),
                })
                .collect(),
        });
        self
    }

    pub fn abstract_node(self, name: &str, supertype: Option<&str>, attrs: &[(&str, AttrType, Value)]) -> Self {
        let mut this = self.node(name, supertype, attrs);
        if let Some(last) = this.node_types.last_mut() {
            last.is_abstract = true;
        }
        this
    }

    pub fn edge(mut self, label: &str, source: &str, target: &str) -> Self {
        self.edge_types.push(EdgeType {
            label: label.to_string(),
            source: source.to_string(),
            target: target.to_string(),
        });
        self
    }

    pub fn build(self) -> Result<TypeGraph, GraphError> {
        let mut node_types = BTreeMap::new();
        for t in self.node_types {
            for a in &t.attrs {
                if a.default.ty() != a.ty {
                    return Err(GraphError::InvalidTypeGraph(alloc::format!(
                        "default of {}.{} has the wrong type",
                        t.name,
                        a.name
                    )));
                }
            }
            if node_types.insert(t.name.clone(), t.clone()).is_some() {
                return Err(GraphError::InvalidTypeGraph(alloc::format!(
                    "duplicate node type `{}`",
                    t.name
                )));
            }
        }
        for t in node_types.values() {
            if let Some(sup) = &t.supertype {
                if !node_types.contains_key(sup) {
                    return Err(GraphError::UnknownType(sup.clone()));
                }
            }
            // a supertype cycle would break antisymmetry
            let mut seen = 0usize;
            let mut cur = t.supertype.as_deref();
            while let Some(s) = cur {
                seen += 1;
                if s == t.name || seen > node_types.len() {
                    return Err(GraphError::InvalidTypeGraph(alloc::format!(
                        "subtype cycle through `{}`",
                        t.name
                    )));
                }
                cur = node_types.get(s).and_then(|n: &NodeType| n.supertype.as_deref());
            }
        }
        for e in &self.edge_types {
            for end in [&e.source, &e.target] {
                if !node_types.contains_key(end.as_str()) {
                    return Err(GraphError::UnknownType(end.clone()));
                }
            }
        }
        Ok(TypeGraph {
            name: self.name,
            node_types,
            edge_types: self.edge_types,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub ty: String,
    pub attrs: BTreeMap<String, Value>,
}

impl Node {
    pub fn attr(&self, key: &str) -> Option<&Value> {
        self.attrs.get(key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub label: String,
    pub src: NodeId,
    pub tgt: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceGraph {
    types: Arc<TypeGraph>,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    out_index: BTreeMap<(NodeId, String, NodeId), EdgeId>,
    in_index: BTreeMap<(NodeId, String, NodeId), EdgeId>,
    next_node: u64,
    next_edge: u64,
}

impl InstanceGraph {
    pub fn new(types: Arc<TypeGraph>) -> Self {
        Self::with_id_base(types, 1)
    }

    /// Empty graph whose first allocated node and edge ids start at `base`.
    pub fn with_id_base(types: Arc<TypeGraph>, base: u64) -> Self {
        InstanceGraph {
            types,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            out_index: BTreeMap::new(),
            in_index: BTreeMap::new(),
            next_node: base,
            next_edge: base,
        }
    }

    pub fn types(&self) -> &Arc<TypeGraph> {
        &self.types
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().map(|(k, v)| (*k, v))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node_type(&self, id: NodeId) -> Option<&str> {
        self.nodes.get(&id).map(|n| n.ty.as_str())
    }

    pub fn attr(&self, id: NodeId, key: &str) -> Option<&Value> {
        self.nodes.get(&id).and_then(|n| n.attrs.get(key))
    }

    /// Next ids that `add_node` / `add_edge` would hand out.
    pub fn id_counters(&self) -> (u64, u64) {
        (self.next_node, self.next_edge)
    }

    pub fn nodes_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.nodes
            .iter()
            .filter(move |(_, n)| self.types.is_subtype(&n.ty, ty))
            .map(|(id, _)| *id)
    }

    pub fn find_edge(&self, src: NodeId, label: &str, tgt: NodeId) -> Option<EdgeId> {
        // allocation-free lookup would need a borrowed key type; graphs are small
        self.out_index.get(&(src, label.to_string(), tgt)).copied()
    }

    pub fn has_edge(&self, src: NodeId, label: &str, tgt: NodeId) -> bool {
        self.find_edge(src, label, tgt).is_some()
    }

    /// Outgoing edges of `n` as `(edge, label, target)`, ordered by label then target.
    pub fn out_edges(&self, n: NodeId) -> impl Iterator<Item = (EdgeId, &str, NodeId)> {
        self.out_index
            .range((n, String::new(), NodeId(0))..)
            .take_while(move |((s, _, _), _)| *s == n)
            .map(|((_, l, t), e)| (*e, l.as_str(), *t))
    }

    /// Incoming edges of `n` as `(edge, label, source)`.
    pub fn in_edges(&self, n: NodeId) -> impl Iterator<Item = (EdgeId, &str, NodeId)> {
        self.in_index
            .range((n, String::new(), NodeId(0))..)
            .take_while(move |((t, _, _), _)| *t == n)
            .map(|((_, l, s), e)| (*e, l.as_str(), *s))
    }

    /// Targets of `label` edges leaving `n`.
    pub fn successors<'a>(&'a self, n: NodeId, label: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.out_edges(n)
            .filter(move |(_, l, _)| *l == label)
            .map(|(_, _, t)| t)
    }

    /// Sources of `label` edges entering `n`.
    pub fn predecessors<'a>(&'a self, n: NodeId, label: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.in_edges(n).filter(move |(_, l, _)| *l == label).map(|(_, _, s)| s)
    }

    fn check_attrs(&self, ty: &str, attrs: &BTreeMap<String, Value>) -> Result<(), GraphError> {
        for (k, v) in attrs {
            let decl = self
                .types
                .attribute(ty, k)
                .ok_or_else(|| GraphError::UnknownAttribute {
                    ty: ty.to_string(),
                    attr: k.clone(),
                })?;
            if decl.ty != v.ty() {
                return Err(GraphError::AttributeSchemaMismatch {
                    ty: ty.to_string(),
                    attr: k.clone(),
                    expected: decl.ty,
                    found: v.ty(),
                });
            }
        }
        Ok(())
    }

    /// Adds a node; attributes missing from `attrs` take their schema default.
    pub fn add_node<I, K>(&mut self, ty: &str, attrs: I) -> Result<NodeId, GraphError>
    where
        I: IntoIterator<Item = (K, Value)>,
        K: Into<String>,
    {
        let decl = self
            .types
            .node_type(ty)
            .ok_or_else(|| GraphError::UnknownType(ty.to_string()))?;
        if decl.is_abstract {
            return Err(GraphError::AbstractType(ty.to_string()));
        }
        let given: BTreeMap<String, Value> = attrs.into_iter().map(|(k, v)| (k.into(), v)).collect();
        self.check_attrs(ty, &given)?;
        let mut full: BTreeMap<String, Value> = self
            .types
            .attributes(ty)
            .into_iter()
            .map(|a| (a.name.clone(), a.default.clone()))
            .collect();
        full.extend(given);
        let id = NodeId(self.next_node);
        self.next_node += 1;
        self.nodes.insert(
            id,
            Node {
                ty: ty.to_string(),
                attrs: full,
            },
        );
        Ok(id)
    }

    pub fn add_edge(&mut self, src: NodeId, label: &str, tgt: NodeId) -> Result<EdgeId, GraphError> {
        let st = self.nodes.get(&src).ok_or(GraphError::UnknownNode(src))?;
        let tt = self.nodes.get(&tgt).ok_or(GraphError::UnknownNode(tgt))?;
        if !self.types.edge_allowed(label, &st.ty, &tt.ty) {
            return Err(GraphError::IllTypedEdge {
                label: label.to_string(),
                source_ty: st.ty.clone(),
                target_ty: tt.ty.clone(),
            });
        }
        if self.has_edge(src, label, tgt) {
            return Err(GraphError::DuplicateEdge {
                src,
                label: label.to_string(),
                tgt,
            });
        }
        let id = EdgeId(self.next_edge);
        self.next_edge += 1;
        self.edges.insert(
            id,
            Edge {
                label: label.to_string(),
                src,
                tgt,
            },
        );
        self.out_index.insert((src, label.to_string(), tgt), id);
        self.in_index.insert((tgt, label.to_string(), src), id);
        Ok(id)
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Result<Edge, GraphError> {
        let e = self.edges.remove(&id).ok_or(GraphError::UnknownEdge(id))?;
        self.out_index.remove(&(e.src, e.label.clone(), e.tgt));
        self.in_index.remove(&(e.tgt, e.label.clone(), e.src));
        Ok(e)
    }

    /// Removes a node together with every incident edge; returns the removed edges.
    pub fn remove_node(&mut self, id: NodeId) -> Result<Vec<(EdgeId, Edge)>, GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        let mut incident: Vec<EdgeId> = self.out_edges(id).map(|(e, _, _)| e).collect();
        incident.extend(self.in_edges(id).map(|(e, _, _)| e));
        incident.sort();
        incident.dedup();
        let mut removed = Vec::with_capacity(incident.len());
        for e in incident {
            let edge = self.remove_edge(e)?;
            removed.push((e, edge));
        }
        self.nodes.remove(&id);
        Ok(removed)
    }

    pub fn set_attr(&mut self, id: NodeId, key: &str, value: Value) -> Result<(), GraphError> {
        let ty = self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))?.ty.clone();
        let mut one = BTreeMap::new();
        one.insert(key.to_string(), value);
        self.check_attrs(&ty, &one)?;
        let node = self.nodes.get_mut(&id).ok_or(GraphError::UnknownNode(id))?;
        node.attrs.extend(one);
        Ok(())
    }

    pub fn with_node<I, K>(&self, ty: &str, attrs: I) -> Result<(InstanceGraph, NodeId), GraphError>
    where
        I: IntoIterator<Item = (K, Value)>,
        K: Into<String>,
    {
        let mut g = self.clone();
        let id = g.add_node(ty, attrs)?;
        Ok((g, id))
    }

    pub fn with_edge(&self, src: NodeId, label: &str, tgt: NodeId) -> Result<InstanceGraph, GraphError> {
        let mut g = self.clone();
        g.add_edge(src, label, tgt)?;
        Ok(g)
    }

    pub fn without_node(&self, id: NodeId) -> Result<InstanceGraph, GraphError> {
        let mut g = self.clone();
        g.remove_node(id)?;
        Ok(g)
    }

    pub fn without_edge(&self, id: EdgeId) -> Result<InstanceGraph, GraphError> {
        let mut g = self.clone();
        g.remove_edge(id)?;
        Ok(g)
    }

    pub fn with_attr(&self, id: NodeId, key: &str, value: Value) -> Result<InstanceGraph, GraphError> {
        let mut g = self.clone();
        g.set_attr(id, key, value)?;
        Ok(g)
    }

    /// Inserts a node under a caller-chosen id. Used by deserializers; bumps
    /// the id counter past `id`.
    pub fn insert_node_with_id(
        &mut self,
        id: NodeId,
        ty: &str,
        attrs: BTreeMap<String, Value>,
    ) -> Result<(), GraphError> {
        let saved = self.next_node;
        self.next_node = id.0;
        if self.nodes.contains_key(&id) {
            self.next_node = saved;
            return Err(GraphError::InvalidTypeGraph(alloc::format!("duplicate node id {id}")));
        }
        let res = self.add_node(ty, attrs);
        self.next_node = saved.max(id.0 + 1);
        res.map(|_| ())
    }

    pub fn insert_edge_with_id(&mut self, id: EdgeId, src: NodeId, label: &str, tgt: NodeId) -> Result<(), GraphError> {
        if self.edges.contains_key(&id) {
            return Err(GraphError::InvalidTypeGraph(alloc::format!("duplicate edge id {id}")));
        }
        let saved = self.next_edge;
        self.next_edge = id.0;
        let res = self.add_edge(src, label, tgt);
        self.next_edge = saved.max(id.0 + 1);
        res.map(|_| ())
    }

    /// Full conformance check against the type graph.
    pub fn typecheck(&self) -> Result<(), GraphError> {
        for n in self.nodes.values() {
            let decl = self
                .types
                .node_type(&n.ty)
                .ok_or_else(|| GraphError::UnknownType(n.ty.clone()))?;
            if decl.is_abstract {
                return Err(GraphError::AbstractType(n.ty.clone()));
            }
            self.check_attrs(&n.ty, &n.attrs)?;
            for a in self.types.attributes(&n.ty) {
                if !n.attrs.contains_key(&a.name) {
                    return Err(GraphError::UnknownAttribute {
                        ty: n.ty.clone(),
                        attr: a.name.clone(),
                    });
                }
            }
        }
        for e in self.edges.values() {
            let s = self.nodes.get(&e.src).ok_or(GraphError::UnknownNode(e.src))?;
            let t = self.nodes.get(&e.tgt).ok_or(GraphError::UnknownNode(e.tgt))?;
            if !self.types.edge_allowed(&e.label, &s.ty, &t.ty) {
                return Err(GraphError::IllTypedEdge {
                    label: e.label.clone(),
                    source_ty: s.ty.clone(),
                    target_ty: t.ty.clone(),
                });
            }
        }
        Ok(())
    }
}

/// A structure-preserving map between two graphs (or from a pattern into a
/// host graph, where pattern elements are numbered by their index).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Morphism {
    pub nodes: BTreeMap<NodeId, NodeId>,
    pub edges: BTreeMap<EdgeId, EdgeId>,
}

impl Morphism {
    pub fn node(&self, n: NodeId) -> Option<NodeId> {
        self.nodes.get(&n).copied()
    }

    pub fn is_injective(&self) -> bool {
        let mut ns: Vec<_> = self.nodes.values().collect();
        ns.sort();
        let mut es: Vec<_> = self.edges.values().collect();
        es.sort();
        ns.windows(2).all(|w| w[0] != w[1]) && es.windows(2).all(|w| w[0] != w[1])
    }
}
