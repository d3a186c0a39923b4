//! Seeded random declarations, programs and well-formed graphs.

use rand::seq::SliceRandom;
use rand::Rng;

use ptrgraph_core::graph::{InstanceGraph, NodeId, Value};
use ptrgraph_core::{build_type_graph, Declaration};

use super::interp::{Expr, Memory, Stmt, Target};

pub fn declarations<R: Rng>(rng: &mut R) -> Vec<Declaration> {
    let mut d = Vec::new();
    let ints = rng.gen_range(1..=3);
    for name in ["s", "t", "u"].iter().take(ints) {
        d.push(Declaration::int(name, rng.gen_range(-20..=20)));
    }
    let arrays = rng.gen_range(1..=2);
    for name in ["age", "b"].iter().take(arrays) {
        let len = rng.gen_range(1..=4);
        let vals: Vec<i64> = (0..len).map(|_| rng.gen_range(-20..=80)).collect();
        d.push(Declaration::array(name, &vals));
    }
    let ptrs = rng.gen_range(1..=3);
    for name in ["p", "q", "r"].iter().take(ptrs) {
        d.push(Declaration::pointer(name));
    }
    d.shuffle(rng);
    d
}

struct Names {
    ints: Vec<String>,
    arrays: Vec<(String, usize)>,
    ptrs: Vec<String>,
}

impl Names {
    fn of(decls: &[Declaration]) -> Self {
        let mut n = Names {
            ints: vec![],
            arrays: vec![],
            ptrs: vec![],
        };
        for d in decls {
            match d {
                Declaration::Int { name, .. } => n.ints.push(name.clone()),
                Declaration::Array { name, values } => n.arrays.push((name.clone(), values.len())),
                Declaration::Pointer { name } => n.ptrs.push(name.clone()),
            }
        }
        n
    }

    fn cell<R: Rng>(&self, rng: &mut R) -> (String, usize) {
        let (a, len) = self.arrays.choose(rng).unwrap();
        (a.clone(), rng.gen_range(0..*len))
    }
}

fn expr<R: Rng>(rng: &mut R, n: &Names, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.5);
    if leaf {
        match rng.gen_range(0..4) {
            0 => Expr::Lit(rng.gen_range(-9..=9)),
            1 => Expr::Var(n.ints.choose(rng).unwrap().clone()),
            2 => {
                let (a, k) = n.cell(rng);
                Expr::Cell(a, k)
            }
            _ => Expr::Deref(n.ptrs.choose(rng).unwrap().clone()),
        }
    } else {
        let op = *['+', '-', '*', '/'].choose(rng).unwrap();
        Expr::Bin(op, Box::new(expr(rng, n, depth - 1)), Box::new(expr(rng, n, depth - 1)))
    }
}

fn statement<R: Rng>(rng: &mut R, n: &Names) -> Stmt {
    let pick_ptr = |rng: &mut R| n.ptrs.choose(rng).unwrap().clone();
    match rng.gen_range(0..12) {
        0 | 1 => Stmt::SetVar(n.ints.choose(rng).unwrap().clone(), expr(rng, n, 2)),
        2 => Stmt::SetVar(n.ints.choose(rng).unwrap().clone(), Expr::Deref(pick_ptr(rng))),
        3 => {
            let (a, k) = n.cell(rng);
            Stmt::SetCell(a, k, expr(rng, n, 2))
        }
        4 => Stmt::SetDeref(pick_ptr(rng), expr(rng, n, 2)),
        5 => Stmt::PtrCopy(pick_ptr(rng), pick_ptr(rng)),
        6 => Stmt::PtrArray(pick_ptr(rng), n.arrays.choose(rng).unwrap().0.clone()),
        7 | 8 => {
            let (a, k) = n.cell(rng);
            Stmt::PtrCell(pick_ptr(rng), a, k)
        }
        9 => Stmt::PtrNull(pick_ptr(rng)),
        10 => {
            if rng.gen_bool(0.5) {
                let (a, k) = n.cell(rng);
                Stmt::Scan(Target::Cell(a, k))
            } else {
                Stmt::Scan(Target::Through(pick_ptr(rng)))
            }
        }
        _ => Stmt::Print((0..rng.gen_range(1..=2)).map(|_| expr(rng, n, 1)).collect()),
    }
}

/// A UB-free program of 1..=10 statements; each statement is resampled
/// until the reference interpreter accepts it.
pub fn program<R: Rng>(rng: &mut R, decls: &[Declaration], input: &[i64]) -> Vec<Stmt> {
    let names = Names::of(decls);
    let mut mem = Memory::new(decls, input);
    let len = rng.gen_range(1..=10);
    let mut out = Vec::new();
    while out.len() < len {
        let mut accepted = false;
        for _ in 0..50 {
            let s = statement(rng, &names);
            let mut next = mem.clone();
            if next.exec(&s).is_ok() {
                mem = next;
                out.push(s);
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    out
}

/// A random well-formed pointer-model graph with at most `max_nodes` nodes.
/// Pointers may refer to free or empty addresses, so referential integrity
/// is not guaranteed.
pub fn wf_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> InstanceGraph {
    let mut g = InstanceGraph::new(build_type_graph());
    let mut budget = rng.gen_range(1..=max_nodes);
    let mut take = |k: usize| {
        if budget >= k {
            budget -= k;
            true
        } else {
            false
        }
    };
    let names = ["", "x", "y"];
    let mut objects: Vec<NodeId> = Vec::new();
    let mut pointers: Vec<NodeId> = Vec::new();
    let mut addresses: Vec<NodeId> = Vec::new();
    let arrays = rng.gen_range(0..=2);
    for _ in 0..arrays {
        if !take(2) {
            break;
        }
        let a = g
            .add_node(
                "Array",
                [
                    ("name", Value::Str(names.choose(rng).unwrap().to_string())),
                    ("len", Value::Int(rng.gen_range(0..3))),
                ],
            )
            .unwrap();
        let p = g.add_node("Pointer", Vec::<(&str, Value)>::new()).unwrap();
        g.add_edge(a, "fst", p).unwrap();
        objects.push(a);
        pointers.push(p);
    }
    let target_addrs = rng.gen_range(0..=5);
    for _ in 0..target_addrs {
        if !take(1) {
            break;
        }
        addresses.push(g.add_node("Address", Vec::<(&str, Value)>::new()).unwrap());
    }
    while take(1) {
        if rng.gen_bool(0.5) {
            let i = g
                .add_node(
                    "Int",
                    [
                        ("name", Value::Str(names.choose(rng).unwrap().to_string())),
                        ("val", Value::Int(rng.gen_range(-1..=1))),
                    ],
                )
                .unwrap();
            objects.push(i);
        } else {
            let p = g.add_node("Pointer", Vec::<(&str, Value)>::new()).unwrap();
            pointers.push(p);
        }
    }
    // succ chains over a random order of the addresses
    let mut order = addresses.clone();
    order.shuffle(rng);
    for w in order.windows(2) {
        if rng.gen_bool(0.7) {
            g.add_edge(w[0], "succ", w[1]).unwrap();
        }
    }
    let mut placeable = objects.clone();
    placeable.shuffle(rng);
    for &a in &addresses {
        let filled = rng.gen_bool(0.6) && !placeable.is_empty();
        if filled {
            let o = placeable.pop().unwrap();
            g.add_edge(a, "cont", o).unwrap();
        }
        let free = if rng.gen_bool(0.15) { filled } else { !filled };
        g.set_attr(a, "free", Value::Bool(free)).unwrap();
    }
    for &p in &pointers {
        if !addresses.is_empty() && rng.gen_bool(0.7) {
            g.add_edge(p, "ref", *addresses.choose(rng).unwrap()).unwrap();
        }
    }
    g
}

/// One random statement over `decls`, not necessarily executable.
pub fn statement_text<R: Rng>(rng: &mut R, decls: &[Declaration]) -> String {
    statement(rng, &Names::of(decls)).to_string()
}

/// Textbook-shaped declarations with random names and sizes, sized so the
/// start graph stays small.
pub fn small_start<R: Rng>(rng: &mut R) -> (Vec<Declaration>, usize) {
    let mut d = vec![Declaration::int("s", rng.gen_range(0..3))];
    let len = rng.gen_range(1..=3);
    let vals: Vec<i64> = (0..len).map(|_| rng.gen_range(0..3)).collect();
    d.push(Declaration::array("age", &vals));
    d.push(Declaration::pointer("p"));
    if rng.gen_bool(0.5) {
        d.push(Declaration::pointer("q"));
    }
    (d, rng.gen_range(0..=2))
}
