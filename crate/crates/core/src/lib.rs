//! Graph-transformation semantics for C pointer manipulation.
//!
//! Program memory is a typed attributed graph: pointers `ref` addresses,
//! addresses `cont` objects, consecutive addresses are linked by `succ`, and
//! arrays reach their first cell through a `fst` pointer. Statements of a
//! small C subset are executed as applications of rewrite rules from a fixed
//! catalog, and well-formedness and referential-integrity constraints are
//! evaluated on every state.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! HTTP service live in the `ptrgraph` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod constraints;
pub mod dsl;
pub mod frontend;
pub mod graph;
pub mod iso;
pub mod matching;
pub mod pointer_model;
pub mod rules;
pub mod simulator;

mod hash;

pub use constraints::{Constraint, ConstraintCatalog, ConstraintReport, TemporalFormula, Verdict};
pub use graph::{AttrType, EdgeId, GraphError, InstanceGraph, Morphism, NodeId, TypeGraph, Value};
pub use iso::{isomorphic, IsoOptions};
pub use pointer_model::{build_start_graph, build_type_graph, Catalog, Declaration};
pub use rules::{apply_rule, find_matches, Match, Rule};
pub use simulator::{Session, SessionConfig, StepError, TraceStep};
