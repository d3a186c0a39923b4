//! The C memory model: its type graph, the rule catalog and start graphs
//! built from variable declarations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::dsl::parse_rule;
use crate::graph::{AttrType, GraphError, InstanceGraph, NodeId, TypeGraph, Value};
use crate::rules::{Role, Rule, RuleEdge, RuleNode};

pub const TYPE_GRAPH_NAME: &str = "pointers";

/// Pointer, Address(free), abstract Object(name) with Int, Char and Array,
/// and the ref/cont/succ/fst edges between them.
pub fn build_type_graph() -> Arc<TypeGraph> {
    let tg = TypeGraph::builder(TYPE_GRAPH_NAME)
        .node("Pointer", None, &[])
        .node("Address", None, &[("free", AttrType::Bool, Value::Bool(true))])
        .abstract_node("Object", None, &[("name", AttrType::Str, Value::Str(String::new()))])
        .node("Int", Some("Object"), &[("val", AttrType::Int, Value::Int(0))])
        .node(
            "Char",
            Some("Object"),
            &[("val", AttrType::Str, Value::Str(String::new()))],
        )
        .node("Array", Some("Object"), &[("len", AttrType::Int, Value::Int(0))])
        .edge("ref", "Pointer", "Address")
        .edge("cont", "Address", "Object")
        .edge("succ", "Address", "Address")
        .edge("fst", "Array", "Pointer")
        .build()
        .expect("pointer type graph is valid");
    Arc::new(tg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Declaration {
    Int { name: String, value: i64 },
    Array { name: String, values: Vec<i64> },
    Pointer { name: String },
}

impl Declaration {
    pub fn int(name: &str, value: i64) -> Self {
        Declaration::Int {
            name: name.to_string(),
            value,
        }
    }

    pub fn array(name: &str, values: &[i64]) -> Self {
        Declaration::Array {
            name: name.to_string(),
            values: values.to_vec(),
        }
    }

    pub fn pointer(name: &str) -> Self {
        Declaration::Pointer { name: name.to_string() }
    }

    pub fn name(&self) -> &str {
        match self {
            Declaration::Int { name, .. } | Declaration::Array { name, .. } | Declaration::Pointer { name } => name,
        }
    }

    fn addresses(&self) -> usize {
        match self {
            Declaration::Array { values, .. } => values.len(),
            _ => 0,
        }
    }
}

impl fmt::Display for Declaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Declaration::Int { name, value } => write!(f, "int {name} = {value};"),
            Declaration::Array { name, values } => {
                write!(f, "int {name}[] = {{ ")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(" };")
            }
            Declaration::Pointer { name } => write!(f, "int *{name};"),
        }
    }
}

/// `int s = 0, t = 0; int age[] = { 30, 65, 41, 23 }; int *agep, *maxp;`
pub fn textbook_declarations() -> Vec<Declaration> {
    alloc::vec![
        Declaration::int("s", 0),
        Declaration::int("t", 0),
        Declaration::array("age", &[30, 65, 41, 23]),
        Declaration::pointer("agep"),
        Declaration::pointer("maxp"),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("address pool of {available} cannot hold the {required} addresses the arrays need")]
    PoolTooSmall { required: usize, available: usize },
    #[error("`{0}` is declared twice")]
    DuplicateName(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// What a declared name stands for in a start graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    /// An Int object.
    Int(NodeId),
    /// A named pointer.
    Pointer(NodeId),
    /// The Array object, its first-element pointer and its cells' addresses.
    Array {
        array: NodeId,
        first: NodeId,
        cells: Vec<NodeId>,
    },
}

/// Total addresses needed by the arrays in `decls`.
pub fn required_addresses(decls: &[Declaration]) -> usize {
    decls.iter().map(Declaration::addresses).sum()
}

/// Start graph plus the name bindings of every declaration.
/// `address_pool` counts all addresses; those not used by arrays form a
/// separate chain of free addresses.
pub fn build_start_state(
    decls: &[Declaration],
    address_pool: usize,
) -> Result<(InstanceGraph, BTreeMap<String, Binding>), ModelError> {
    let mut names = BTreeSet::new();
    for d in decls {
        if !names.insert(d.name()) {
            return Err(ModelError::DuplicateName(d.name().to_string()));
        }
    }
    let required = required_addresses(decls);
    if address_pool < required {
        return Err(ModelError::PoolTooSmall {
            required,
            available: address_pool,
        });
    }
    let mut g = InstanceGraph::new(build_type_graph());
    let mut env = BTreeMap::new();
    let no_attrs = Vec::<(&str, Value)>::new;
    for d in decls {
        let binding = match d {
            Declaration::Int { name, value } => {
                Binding::Int(g.add_node("Int", [("name", Value::Str(name.clone())), ("val", Value::Int(*value))])?)
            }
            Declaration::Pointer { .. } => Binding::Pointer(g.add_node("Pointer", no_attrs())?),
            Declaration::Array { name, values } => {
                let array = g.add_node(
                    "Array",
                    [
                        ("name", Value::Str(name.clone())),
                        ("len", Value::Int(values.len() as i64)),
                    ],
                )?;
                let first = g.add_node("Pointer", no_attrs())?;
                g.add_edge(array, "fst", first)?;
                let mut cells = Vec::with_capacity(values.len());
                for (i, v) in values.iter().enumerate() {
                    let addr = g.add_node("Address", [("free", Value::Bool(false))])?;
                    let cell = g.add_node(
                        "Int",
                        [
                            ("name", Value::Str(alloc::format!("{name}[{i}]"))),
                            ("val", Value::Int(*v)),
                        ],
                    )?;
                    g.add_edge(addr, "cont", cell)?;
                    if let Some(prev) = cells.last() {
                        g.add_edge(*prev, "succ", addr)?;
                    } else {
                        g.add_edge(first, "ref", addr)?;
                    }
                    cells.push(addr);
                }
                Binding::Array { array, first, cells }
            }
        };
        env.insert(d.name().to_string(), binding);
    }
    let mut prev: Option<NodeId> = None;
    for _ in required..address_pool {
        let a = g.add_node("Address", no_attrs())?;
        if let Some(p) = prev {
            g.add_edge(p, "succ", a)?;
        }
        prev = Some(a);
    }
    Ok((g, env))
}

pub fn build_start_graph(decls: &[Declaration], address_pool: usize) -> Result<InstanceGraph, ModelError> {
    Ok(build_start_state(decls, address_pool)?.0)
}

const RULE_FILES: &[&str] = &[
    include_str!("../rules/copyReferent.rule"),
    include_str!("../rules/newInt.rule"),
    include_str!("../rules/newPointer.rule"),
    include_str!("../rules/pointerReferent.rule"),
    include_str!("../rules/nullPointerReferent.rule"),
    include_str!("../rules/pointerAssignedNewAddress.rule"),
    include_str!("../rules/pointerArray.rule"),
    include_str!("../rules/pointerInt.rule"),
    include_str!("../rules/nullPointerInt.rule"),
    include_str!("../rules/ext-writeThroughPointer.rule"),
    include_str!("../rules/ext-readIntoAddress.rule"),
    include_str!("../rules/ext-assignInt.rule"),
    include_str!("../rules/ext-clearPointer.rule"),
    include_str!("../rules/ext-nullPointerToAddress.rule"),
    include_str!("../rules/ext-pointerToMaterializedInt.rule"),
];

/// Prefix of the indexed array rules, written `pointerArrayAt[k]`.
pub const POINTER_ARRAY_AT: &str = "pointerArrayAt";

/// Null pointer is assigned the address `k` succ steps after the array's
/// first address.
pub fn pointer_array_at(k: usize) -> Rule {
    let node = |name: String, ty: &str, role: Role, anchor: bool| RuleNode {
        name,
        ty: ty.to_string(),
        role,
        anchor,
    };
    let edge = |src: usize, label: &str, tgt: usize, role: Role| RuleEdge {
        src,
        label: label.to_string(),
        tgt,
        role,
    };
    let mut nodes = alloc::vec![
        node("array".into(), "Array", Role::Reader, true),
        node("first".into(), "Pointer", Role::Reader, false),
        node("pointer".into(), "Pointer", Role::Reader, true),
        node("old".into(), "Address", Role::Embargo, false),
    ];
    let mut edges = alloc::vec![edge(0, "fst", 1, Role::Reader), edge(2, "ref", 3, Role::Embargo),];
    for i in 0..=k {
        let name = if i == k {
            "address".to_string()
        } else {
            alloc::format!("a{i}")
        };
        nodes.push(node(name, "Address", Role::Reader, false));
        let idx = nodes.len() - 1;
        if i == 0 {
            edges.push(edge(1, "ref", idx, Role::Reader));
        } else {
            edges.push(edge(idx - 1, "succ", idx, Role::Reader));
        }
    }
    let target = nodes.len() - 1;
    edges.push(edge(2, "ref", target, Role::Creator));
    Rule {
        name: alloc::format!("{POINTER_ARRAY_AT}[{k}]"),
        description: alloc::format!("Null pointer is assigned address of array element {k}: p = &a[{k}]"),
        params: Vec::new(),
        nodes,
        edges,
        guards: Vec::new(),
        assignments: Vec::new(),
        aliases: Vec::new(),
    }
}

fn parse_indexed(name: &str) -> Option<usize> {
    let rest = name
        .strip_prefix(POINTER_ARRAY_AT)?
        .strip_prefix('[')?
        .strip_suffix(']')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Named rules over the pointer type graph. Names starting with `ext:` are
/// extensions beyond the original rule set.
#[derive(Debug, Clone)]
pub struct Catalog {
    types: Arc<TypeGraph>,
    rules: BTreeMap<String, Rule>,
}

impl Catalog {
    pub fn standard() -> Self {
        let types = build_type_graph();
        let mut rules = BTreeMap::new();
        for src in RULE_FILES {
            let r = parse_rule(src).expect("built-in rule parses");
            r.validate(&types).expect("built-in rule typechecks");
            rules.insert(r.name.clone(), r);
        }
        Catalog { types, rules }
    }

    pub fn types(&self) -> &Arc<TypeGraph> {
        &self.types
    }

    /// Looks up a rule; `pointerArrayAt[k]` is generated on demand.
    pub fn get(&self, name: &str) -> Option<Rule> {
        if let Some(r) = self.rules.get(name) {
            return Some(r.clone());
        }
        parse_indexed(name).map(pointer_array_at)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rules.contains_key(name) || parse_indexed(name).is_some()
    }

    /// Stored rule names in sorted order (indexed rules excluded).
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    /// Adds a rule after checking it against the pointer type graph.
    pub fn insert(&mut self, rule: Rule) -> Result<(), crate::rules::RuleError> {
        rule.validate(&self.types)?;
        self.rules.insert(rule.name.clone(), rule);
        Ok(())
    }
}
