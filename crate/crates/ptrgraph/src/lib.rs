//! File formats, DOT export, the command-line driver, an interactive REPL and
//! an HTTP session service around `ptrgraph-core`.

pub mod cli;
pub mod dot;
pub mod json;
pub mod repl;
pub mod service;
