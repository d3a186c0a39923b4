//! Flat-memory reference interpreter for the straight-line C subset.
//!
//! Ints and arrays live in plain maps, a pointer is an optional
//! (array, index) pair. Anything C leaves undefined is reported as `Ub`.

use std::collections::BTreeMap;
use std::fmt;

use ptrgraph_core::Declaration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    Var(String),
    Cell(String, usize),
    Deref(String),
    Bin(char, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Cell(String, usize),
    Through(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    SetVar(String, Expr),
    SetCell(String, usize, Expr),
    SetDeref(String, Expr),
    PtrCopy(String, String),
    PtrArray(String, String),
    PtrCell(String, String, usize),
    PtrNull(String),
    Scan(Target),
    Print(Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Cell(a, k) => write!(f, "{a}[{k}]"),
            Expr::Deref(p) => write!(f, "*{p}"),
            Expr::Bin(op, l, r) => write!(f, "({l} {op} {r})"),
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::SetVar(x, e) => write!(f, "{x} = {e};"),
            Stmt::SetCell(a, k, e) => write!(f, "{a}[{k}] = {e};"),
            Stmt::SetDeref(p, e) => write!(f, "*{p} = {e};"),
            Stmt::PtrCopy(p, q) => write!(f, "{p} = {q};"),
            Stmt::PtrArray(p, a) => write!(f, "{p} = {a};"),
            Stmt::PtrCell(p, a, k) => write!(f, "{p} = &{a}[{k}];"),
            Stmt::PtrNull(p) => write!(f, "{p} = 0;"),
            Stmt::Scan(Target::Cell(a, k)) => write!(f, "scanf(\"%i\", &{a}[{k}]);"),
            Stmt::Scan(Target::Through(p)) => write!(f, "scanf(\"%i\", {p});"),
            Stmt::Print(args) => {
                let fmt_str: Vec<&str> = args.iter().map(|_| "%i").collect();
                write!(f, "printf(\"{}\"", fmt_str.join(" "))?;
                for a in args {
                    write!(f, ", {a}")?;
                }
                f.write_str(");")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ub(pub String);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Memory {
    pub ints: BTreeMap<String, i64>,
    pub arrays: BTreeMap<String, Vec<i64>>,
    pub pointers: BTreeMap<String, Option<(String, usize)>>,
    pub input: Vec<i64>,
    pub read: usize,
    pub output: String,
}

impl Memory {
    pub fn new(decls: &[Declaration], input: &[i64]) -> Self {
        let mut m = Memory {
            input: input.to_vec(),
            ..Memory::default()
        };
        for d in decls {
            match d {
                Declaration::Int { name, value } => {
                    m.ints.insert(name.clone(), *value);
                }
                Declaration::Array { name, values } => {
                    m.arrays.insert(name.clone(), values.clone());
                }
                Declaration::Pointer { name } => {
                    m.pointers.insert(name.clone(), None);
                }
            }
        }
        m
    }

    fn target(&self, p: &str) -> Result<(String, usize), Ub> {
        self.pointers[p].clone().ok_or_else(|| Ub(format!("{p} is null")))
    }

    pub fn eval(&self, e: &Expr) -> Result<i64, Ub> {
        Ok(match e {
            Expr::Lit(v) => *v,
            Expr::Var(x) => self.ints[x],
            Expr::Cell(a, k) => self.arrays[a][*k],
            Expr::Deref(p) => {
                let (a, k) = self.target(p)?;
                self.arrays[&a][k]
            }
            Expr::Bin(op, l, r) => {
                let (l, r) = (self.eval(l)?, self.eval(r)?);
                let v = match op {
                    '+' => l.checked_add(r),
                    '-' => l.checked_sub(r),
                    '*' => l.checked_mul(r),
                    '/' if r == 0 => return Err(Ub("division by zero".into())),
                    '/' => l.checked_div(r),
                    _ => unreachable!(),
                };
                v.ok_or_else(|| Ub("overflow".into()))?
            }
        })
    }

    pub fn exec(&mut self, s: &Stmt) -> Result<(), Ub> {
        match s {
            Stmt::SetVar(x, e) => {
                let v = self.eval(e)?;
                self.ints.insert(x.clone(), v);
            }
            Stmt::SetCell(a, k, e) => {
                let v = self.eval(e)?;
                self.arrays.get_mut(a).unwrap()[*k] = v;
            }
            Stmt::SetDeref(p, e) => {
                let (a, k) = self.target(p)?;
                let v = self.eval(e)?;
                self.arrays.get_mut(&a).unwrap()[k] = v;
            }
            Stmt::PtrCopy(p, q) => {
                let v = self.pointers[q].clone();
                self.pointers.insert(p.clone(), v);
            }
            Stmt::PtrArray(p, a) => {
                self.pointers.insert(p.clone(), Some((a.clone(), 0)));
            }
            Stmt::PtrCell(p, a, k) => {
                self.pointers.insert(p.clone(), Some((a.clone(), *k)));
            }
            Stmt::PtrNull(p) => {
                self.pointers.insert(p.clone(), None);
            }
            Stmt::Scan(t) => {
                let (a, k) = match t {
                    Target::Cell(a, k) => (a.clone(), *k),
                    Target::Through(p) => self.target(p)?,
                };
                let v = *self.input.get(self.read).ok_or_else(|| Ub("input exhausted".into()))?;
                self.read += 1;
                self.arrays.get_mut(&a).unwrap()[k] = v;
            }
            Stmt::Print(args) => {
                let vals = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                let s: Vec<String> = vals.iter().map(i64::to_string).collect();
                self.output.push_str(&s.join(" "));
            }
        }
        Ok(())
    }
}
