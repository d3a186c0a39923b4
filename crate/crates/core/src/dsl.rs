//! Textual formats for rules, constraints and temporal formulas.
//!
//! Rules are line-oriented:
//!
//! ```text
//! rule nullPointerReferent
//! description "Null pointer takes the address held by another pointer"
//! nodes
//!   anchor target: Pointer
//!   anchor source: Pointer
//!   keep address: Address
//!   forbid old: Address
//! edges
//!   keep source -ref-> address
//!   new target -ref-> address
//!   forbid target -ref-> old
//! ```
//!
//! Sections are `nodes`, `edges`, `guards`, `assign` and `pragma`; node and
//! edge lines start with a role (`keep`, `del`, `new`, `forbid`, or `anchor`
//! for a kept node that callers may pre-bind). Guards are `x.attr = value`,
//! `x.attr != value` or `x != y`; assignments are `set x.attr = operand`
//! where the operand is a literal, a parameter declared with
//! `param name: int`, or another node's attribute. `pragma` accepts
//! `alias x y` to let two nodes share an image.
//!
//! Constraints nest quantifier blocks in braces:
//!
//! ```text
//! constraint isWFfstEx require {
//!   forall {
//!     a: Array
//!     exists {
//!       p: Pointer
//!       a -fst-> p
//!     }
//!   }
//! }
//! ```
//!
//! `not { ... }` adds a negative fragment to the enclosing level. `require`
//! constraints are satisfied when the formula holds; `forbid` constraints
//! are violated when their pattern is found.
//!
//! `#` and `//` start comments in both formats.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::constraints::{Body, Constraint, Fragment, Level, Polarity, Prop, Quantifier, TemporalFormula};
use crate::graph::{AttrType, Value};
use crate::matching::{CmpOp, Guard, Operand, PatternEdge, PatternNode};
use crate::rules::{Assignment, Param, Role, Rule, RuleEdge, RuleNode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: `{element}` is declared with conflicting roles")]
    RoleConflict { line: usize, col: usize, element: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Edge(String),
    Colon,
    Dot,
    Eq,
    Ne,
    Bang,
    Amp,
    Pipe,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Newline,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Edge(l) => write!(f, "`-{l}->`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Newline => f.write_str("end of line"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str, first_line: usize) -> Result<Vec<Spanned>, DslError> {
    let mut out = Vec::new();
    for (ln, raw) in src.lines().enumerate() {
        let line = first_line + ln;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        let err = |col: usize, msg: String| DslError::Syntax { line, col, msg };
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line, col });
            if c.is_whitespace() {
                i += 1;
            } else if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
                break;
            } else if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident(chars[i]) {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<i64>()
                    .map_err(|_| err(col, alloc::format!("integer `{text}` out of range")))?;
                push(&mut out, Tok::Int(v));
            } else if c == '-' {
                // edge label: -label->
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && is_ident(chars[j]) {
                    j += 1;
                }
                if j == start || chars.get(j) != Some(&'-') || chars.get(j + 1) != Some(&'>') {
                    return Err(err(col, "expected an edge of the form `-label->`".into()));
                }
                push(&mut out, Tok::Edge(chars[start..j].iter().collect()));
                i = j + 2;
            } else if c == '"' {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(col, "unterminated string".into())),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some(o) => s.push(*o),
                                None => return Err(err(col, "unterminated string".into())),
                            }
                            i += 2;
                        }
                        Some(o) => {
                            s.push(*o);
                            i += 1;
                        }
                    }
                }
                push(&mut out, Tok::Str(s));
            } else {
                let tok = match c {
                    ':' => Tok::Colon,
                    '.' => Tok::Dot,
                    '=' => Tok::Eq,
                    '!' if chars.get(i + 1) == Some(&'=') => {
                        i += 1;
                        Tok::Ne
                    }
                    '!' => Tok::Bang,
                    '&' => {
                        if chars.get(i + 1) == Some(&'&') {
                            i += 1;
                        }
                        Tok::Amp
                    }
                    '|' => {
                        if chars.get(i + 1) == Some(&'|') {
                            i += 1;
                        }
                        Tok::Pipe
                    }
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ';' => Tok::Semi,
                    other => return Err(err(col, alloc::format!("unexpected character `{other}`"))),
                };
                push(&mut out, tok);
                i += 1;
            }
        }
        out.push(Spanned {
            tok: Tok::Newline,
            line,
            col: chars.len() + 1,
        });
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Cursor {
    fn new(toks: Vec<Spanned>) -> Self {
        let end = toks.last().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        Cursor { toks, pos: 0, end }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.col)).unwrap_or(self.end)
    }

    fn error(&self, msg: impl Into<String>) -> DslError {
        let (line, col) = self.here();
        DslError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), DslError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(alloc::format!("expected {want}, found {t}"))),
            None => Err(self.error(alloc::format!("expected {want}, found end of input"))),
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.error(alloc::format!("expected a name, found {t}"))),
            None => Err(self.error("expected a name, found end of input")),
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Some(Tok::Newline | Tok::Semi)) {
            self.pos += 1;
        }
    }

    fn end_of_item(&mut self) -> Result<(), DslError> {
        match self.peek() {
            None | Some(Tok::Newline | Tok::Semi) => {
                self.skip_separators();
                Ok(())
            }
            Some(Tok::RBrace) => Ok(()),
            Some(t) => Err(self.error(alloc::format!("unexpected {t}"))),
        }
    }
}

fn parse_attr_type(c: &mut Cursor) -> Result<AttrType, DslError> {
    let name = c.ident()?;
    match name.as_str() {
        "int" => Ok(AttrType::Int),
        "bool" => Ok(AttrType::Bool),
        "string" => Ok(AttrType::Str),
        _ => Err(c.error(alloc::format!("unknown attribute type `{name}`"))),
    }
}

/// Literal, parameter or `node.attr`; `lookup` resolves node names.
fn parse_operand(
    c: &mut Cursor,
    lookup: &dyn Fn(&str) -> Option<usize>,
    params: &BTreeMap<String, AttrType>,
) -> Result<Operand, DslError> {
    match c.next() {
        Some(Tok::Int(v)) => Ok(Operand::Lit(Value::Int(v))),
        Some(Tok::Str(s)) => Ok(Operand::Lit(Value::Str(s))),
        Some(Tok::Ident(id)) if id == "true" => Ok(Operand::Lit(Value::Bool(true))),
        Some(Tok::Ident(id)) if id == "false" => Ok(Operand::Lit(Value::Bool(false))),
        Some(Tok::Ident(id)) => {
            if c.peek() == Some(&Tok::Dot) {
                c.pos += 1;
                let attr = c.ident()?;
                let node = lookup(&id).ok_or_else(|| c.error(alloc::format!("unknown node `{id}`")))?;
                Ok(Operand::Attr { node, attr })
            } else if params.contains_key(&id) {
                Ok(Operand::Param(id))
            } else {
                Err(c.error(alloc::format!("unknown parameter `{id}`")))
            }
        }
        Some(t) => {
            c.pos -= 1;
            Err(c.error(alloc::format!("expected a value, found {t}")))
        }
        None => Err(c.error("expected a value")),
    }
}

/// `x.attr op operand` or `x != y`.
fn parse_guard(
    c: &mut Cursor,
    lookup: &dyn Fn(&str) -> Option<usize>,
    params: &BTreeMap<String, AttrType>,
) -> Result<Guard, DslError> {
    let name = c.ident()?;
    let node = lookup(&name).ok_or_else(|| c.error(alloc::format!("unknown node `{name}`")))?;
    match c.next() {
        Some(Tok::Dot) => {
            let attr = c.ident()?;
            let op = match c.next() {
                Some(Tok::Eq) => CmpOp::Eq,
                Some(Tok::Ne) => CmpOp::Ne,
                _ => {
                    c.pos -= 1;
                    return Err(c.error("expected `=` or `!=`"));
                }
            };
            let rhs = parse_operand(c, lookup, params)?;
            Ok(Guard::Attr { node, attr, op, rhs })
        }
        Some(Tok::Ne) => {
            let other = c.ident()?;
            let b = lookup(&other).ok_or_else(|| c.error(alloc::format!("unknown node `{other}`")))?;
            Ok(Guard::Distinct(node, b))
        }
        _ => {
            c.pos -= 1;
            Err(c.error("expected `.attr` or `!=`"))
        }
    }
}

fn parse_role(c: &mut Cursor) -> Result<(Role, bool), DslError> {
    let kw = c.ident()?;
    Ok(match kw.as_str() {
        "keep" => (Role::Reader, false),
        "anchor" => (Role::Reader, true),
        "del" => (Role::Eraser, false),
        "new" => (Role::Creator, false),
        "forbid" => (Role::Embargo, false),
        _ => {
            c.pos -= 1;
            return Err(c.error(alloc::format!(
                "expected a role (keep, anchor, del, new, forbid), found `{kw}`"
            )));
        }
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Nodes,
    Edges,
    Guards,
    Assign,
    Pragma,
}

/// Parses one rule in the line-oriented rule format.
pub fn parse_rule(src: &str) -> Result<Rule, DslError> {
    let mut name: Option<String> = None;
    let mut description = String::new();
    let mut params: Vec<Param> = Vec::new();
    let mut nodes: Vec<RuleNode> = Vec::new();
    let mut edges: Vec<RuleEdge> = Vec::new();
    let mut guards: Vec<Guard> = Vec::new();
    let mut assignments: Vec<Assignment> = Vec::new();
    let mut aliases: Vec<(usize, usize)> = Vec::new();
    let mut section = Section::Header;

    for (ln, raw) in src.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim_start();
        if name.is_none() {
            let content = strip_comment(trimmed).trim();
            if content.is_empty() {
                continue;
            }
            let rest = content
                .strip_prefix("rule")
                .filter(|r| r.starts_with(char::is_whitespace));
            match rest.map(str::trim) {
                Some(n) if !n.is_empty() => {
                    name = Some(n.to_string());
                    continue;
                }
                _ => {
                    return Err(DslError::Syntax {
                        line,
                        col: raw.len() - trimmed.len() + 1,
                        msg: "expected `rule <name>`".into(),
                    })
                }
            }
        }
        let mut c = Cursor::new(lex(raw, line)?);
        c.skip_separators();
        let Some(first) = c.peek().cloned() else {
            continue;
        };
        if let Tok::Ident(kw) = &first {
            let header = match kw.as_str() {
                "nodes" => Some(Section::Nodes),
                "edges" => Some(Section::Edges),
                "guards" => Some(Section::Guards),
                "assign" => Some(Section::Assign),
                "pragma" => Some(Section::Pragma),
                _ => None,
            };
            if let Some(s) = header {
                if c.toks.len() == 2 {
                    section = s;
                    continue;
                }
            }
            if kw == "description" {
                c.pos += 1;
                match c.next() {
                    Some(Tok::Str(s)) => description = s,
                    _ => return Err(c.error("expected a quoted description")),
                }
                c.end_of_item()?;
                continue;
            }
            if kw == "param" {
                c.pos += 1;
                let pname = c.ident()?;
                c.expect(&Tok::Colon)?;
                let ty = parse_attr_type(&mut c)?;
                if params.iter().any(|p| p.name == pname) {
                    return Err(c.error(alloc::format!("parameter `{pname}` declared twice")));
                }
                params.push(Param { name: pname, ty });
                c.end_of_item()?;
                continue;
            }
        }
        let lookup = |n: &str| nodes.iter().position(|x| x.name == n);
        let param_types: BTreeMap<String, AttrType> = params.iter().map(|p| (p.name.clone(), p.ty)).collect();
        match section {
            Section::Header => return Err(c.error("expected a section header (nodes, edges, guards, assign, pragma)")),
            Section::Nodes => {
                let (role, anchor) = parse_role(&mut c)?;
                let (l, col) = c.here();
                let n = c.ident()?;
                c.expect(&Tok::Colon)?;
                let ty = c.ident()?;
                c.end_of_item()?;
                if lookup(&n).is_some() {
                    return Err(DslError::RoleConflict {
                        line: l,
                        col,
                        element: n,
                    });
                }
                nodes.push(RuleNode {
                    name: n,
                    ty,
                    role,
                    anchor,
                });
            }
            Section::Edges => {
                let (role, anchor) = parse_role(&mut c)?;
                if anchor {
                    return Err(c.error("edges cannot be anchors"));
                }
                let (l, col) = c.here();
                let s = c.ident()?;
                let label = match c.next() {
                    Some(Tok::Edge(lbl)) => lbl,
                    _ => {
                        c.pos -= 1;
                        return Err(c.error("expected `-label->`"));
                    }
                };
                let t = c.ident()?;
                c.end_of_item()?;
                let src = lookup(&s).ok_or_else(|| DslError::Syntax {
                    line: l,
                    col,
                    msg: alloc::format!("unknown node `{s}`"),
                })?;
                let tgt = lookup(&t).ok_or_else(|| DslError::Syntax {
                    line: l,
                    col,
                    msg: alloc::format!("unknown node `{t}`"),
                })?;
                if edges.iter().any(|e| e.src == src && e.tgt == tgt && e.label == label) {
                    return Err(DslError::RoleConflict {
                        line: l,
                        col,
                        element: alloc::format!("{s} -{label}-> {t}"),
                    });
                }
                edges.push(RuleEdge { src, label, tgt, role });
            }
            Section::Guards => {
                guards.push(parse_guard(&mut c, &lookup, &param_types)?);
                c.end_of_item()?;
            }
            Section::Assign => {
                if c.peek() == Some(&Tok::Ident("set".into())) {
                    c.pos += 1;
                }
                let n = c.ident()?;
                let node = lookup(&n).ok_or_else(|| c.error(alloc::format!("unknown node `{n}`")))?;
                c.expect(&Tok::Dot)?;
                let attr = c.ident()?;
                c.expect(&Tok::Eq)?;
                let value = parse_operand(&mut c, &lookup, &param_types)?;
                c.end_of_item()?;
                assignments.push(Assignment { node, attr, value });
            }
            Section::Pragma => {
                let kw = c.ident()?;
                if kw != "alias" {
                    c.pos -= 1;
                    return Err(c.error(alloc::format!("unknown pragma `{kw}`")));
                }
                let a = c.ident()?;
                let b = c.ident()?;
                let (Some(a), Some(b)) = (lookup(&a), lookup(&b)) else {
                    return Err(c.error("alias names unknown nodes"));
                };
                c.end_of_item()?;
                aliases.push((a, b));
            }
        }
    }
    let name = name.ok_or(DslError::Syntax {
        line: 1,
        col: 1,
        msg: "empty rule".into(),
    })?;
    Ok(Rule {
        name,
        description,
        params,
        nodes,
        edges,
        guards,
        assignments,
        aliases,
    })
}

fn strip_comment(s: &str) -> &str {
    let cut = [s.find('#'), s.find("//")].into_iter().flatten().min();
    match cut {
        Some(i) => &s[..i],
        None => s,
    }
}

/// Renders a rule back into the rule format.
pub fn print_rule(rule: &Rule) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "rule {}", rule.name);
    if !rule.description.is_empty() {
        let _ = writeln!(s, "description {:?}", rule.description);
    }
    for p in &rule.params {
        let _ = writeln!(s, "param {}: {}", p.name, p.ty);
    }
    let name = |i: usize| rule.nodes[i].name.as_str();
    let operand = |op: &Operand| match op {
        Operand::Lit(v) => alloc::format!("{v}"),
        Operand::Param(p) => p.clone(),
        Operand::Attr { node, attr } => alloc::format!("{}.{}", name(*node), attr),
    };
    if !rule.nodes.is_empty() {
        s.push_str("nodes\n");
        for n in &rule.nodes {
            let role = if n.anchor { "anchor" } else { n.role.keyword() };
            let _ = writeln!(s, "  {role} {}: {}", n.name, n.ty);
        }
    }
    if !rule.edges.is_empty() {
        s.push_str("edges\n");
        for e in &rule.edges {
            let _ = writeln!(s, "  {} {} -{}-> {}", e.role, name(e.src), e.label, name(e.tgt));
        }
    }
    if !rule.guards.is_empty() {
        s.push_str("guards\n");
        for g in &rule.guards {
            match g {
                Guard::Attr { node, attr, op, rhs } => {
                    let _ = writeln!(s, "  {}.{} {} {}", name(*node), attr, op, operand(rhs));
                }
                Guard::Distinct(a, b) => {
                    let _ = writeln!(s, "  {} != {}", name(*a), name(*b));
                }
            }
        }
    }
    if !rule.assignments.is_empty() {
        s.push_str("assign\n");
        for a in &rule.assignments {
            let _ = writeln!(s, "  set {}.{} = {}", name(a.node), a.attr, operand(&a.value));
        }
    }
    if !rule.aliases.is_empty() {
        s.push_str("pragma\n");
        for (a, b) in &rule.aliases {
            let _ = writeln!(s, "  alias {} {}", name(*a), name(*b));
        }
    }
    s
}

struct ConstraintBuilder {
    nodes: Vec<PatternNode>,
    aliases: Vec<(usize, usize)>,
}

impl ConstraintBuilder {
    fn lookup(&self, n: &str) -> Option<usize> {
        self.nodes.iter().position(|x| x.name == n)
    }

    /// Items up to the closing brace (consumed).
    fn block(&mut self, c: &mut Cursor, quantifier: Quantifier, allow_nesting: bool) -> Result<Level, DslError> {
        let mut level = Level {
            quantifier,
            fragment: Fragment::default(),
            negatives: Vec::new(),
            children: Vec::new(),
        };
        let no_params = BTreeMap::new();
        loop {
            c.skip_separators();
            match c.peek() {
                Some(Tok::RBrace) => {
                    c.pos += 1;
                    return Ok(level);
                }
                None => return Err(c.error("missing `}`")),
                _ => {}
            }
            let name = c.ident()?;
            let nested = match name.as_str() {
                "forall" => Some(Quantifier::Forall),
                "exists" => Some(Quantifier::Exists),
                "not" => None,
                _ => {
                    match c.peek() {
                        Some(Tok::Colon) => {
                            c.pos += 1;
                            let ty = c.ident()?;
                            if self.lookup(&name).is_some() {
                                return Err(c.error(alloc::format!("node `{name}` declared twice")));
                            }
                            self.nodes.push(PatternNode { name, ty });
                            level.fragment.nodes.push(self.nodes.len() - 1);
                        }
                        Some(Tok::Edge(_)) => {
                            let Some(Tok::Edge(label)) = c.next() else {
                                unreachable!()
                            };
                            let t = c.ident()?;
                            let src = self
                                .lookup(&name)
                                .ok_or_else(|| c.error(alloc::format!("unknown node `{name}`")))?;
                            let tgt = self
                                .lookup(&t)
                                .ok_or_else(|| c.error(alloc::format!("unknown node `{t}`")))?;
                            level.fragment.edges.push(PatternEdge { src, label, tgt });
                        }
                        Some(Tok::Dot | Tok::Ne) => {
                            c.pos -= 1;
                            let this = &*self;
                            let g = parse_guard(c, &|n| this.lookup(n), &no_params)?;
                            level.fragment.guards.push(g);
                        }
                        Some(Tok::Ident(_)) if name == "alias" => {
                            let a = c.ident()?;
                            let b = c.ident()?;
                            let (Some(a), Some(b)) = (self.lookup(&a), self.lookup(&b)) else {
                                return Err(c.error("alias names unknown nodes"));
                            };
                            self.aliases.push((a, b));
                        }
                        _ => return Err(c.error(alloc::format!("cannot parse item starting with `{name}`"))),
                    }
                    c.end_of_item()?;
                    continue;
                }
            };
            c.skip_separators();
            c.expect(&Tok::LBrace)?;
            match nested {
                Some(q) => {
                    if !allow_nesting {
                        return Err(c.error("quantifiers are not allowed inside `not`"));
                    }
                    let child = self.block(c, q, true)?;
                    level.children.push(child);
                }
                None => {
                    let neg = self.block(c, Quantifier::Exists, false)?;
                    level.negatives.push(neg.fragment);
                }
            }
        }
    }
}

/// Parses every `constraint` in `src`.
pub fn parse_constraints(src: &str) -> Result<Vec<Constraint>, DslError> {
    let mut c = Cursor::new(lex(src, 1)?);
    let mut out = Vec::new();
    loop {
        c.skip_separators();
        if c.peek().is_none() {
            return Ok(out);
        }
        let kw = c.ident()?;
        if kw != "constraint" {
            c.pos -= 1;
            return Err(c.error("expected `constraint`"));
        }
        let name = c.ident()?;
        let polarity = match c.ident()?.as_str() {
            "require" => Polarity::Require,
            "forbid" => Polarity::Forbid,
            _ => {
                c.pos -= 1;
                return Err(c.error("expected `require` or `forbid`"));
            }
        };
        c.skip_separators();
        c.expect(&Tok::LBrace)?;
        let mut b = ConstraintBuilder {
            nodes: Vec::new(),
            aliases: Vec::new(),
        };
        let root = b.block(&mut c, Quantifier::Exists, true)?;
        out.push(Constraint {
            name,
            polarity,
            body: Body::Pattern {
                nodes: b.nodes,
                aliases: b.aliases,
                root,
            },
        });
    }
}

/// Parses `G (phi)` where `phi` combines constraint names with `!`, `&`, `|`
/// and parentheses.
pub fn parse_formula(src: &str) -> Result<TemporalFormula, DslError> {
    let mut c = Cursor::new(lex(src, 1)?);
    c.toks.retain(|t| t.tok != Tok::Newline);
    match c.next() {
        Some(Tok::Ident(g)) if g == "G" => {}
        _ => {
            c.pos = 0;
            return Err(c.error("formula must start with `G`"));
        }
    }
    let body = parse_or(&mut c)?;
    if let Some(t) = c.peek() {
        return Err(c.error(alloc::format!("unexpected {t}")));
    }
    Ok(TemporalFormula { body })
}

fn parse_or(c: &mut Cursor) -> Result<Prop, DslError> {
    let mut lhs = parse_and(c)?;
    while c.peek() == Some(&Tok::Pipe) {
        c.pos += 1;
        let rhs = parse_and(c)?;
        lhs = Prop::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(c: &mut Cursor) -> Result<Prop, DslError> {
    let mut lhs = parse_unary(c)?;
    while c.peek() == Some(&Tok::Amp) {
        c.pos += 1;
        let rhs = parse_unary(c)?;
        lhs = Prop::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_unary(c: &mut Cursor) -> Result<Prop, DslError> {
    match c.next() {
        Some(Tok::Bang) => Ok(Prop::Not(Box::new(parse_unary(c)?))),
        Some(Tok::LParen) => {
            let p = parse_or(c)?;
            c.expect(&Tok::RParen)?;
            Ok(p)
        }
        Some(Tok::Ident(id)) if id == "true" => Ok(Prop::True),
        Some(Tok::Ident(id)) => Ok(Prop::Atom(id)),
        Some(t) => {
            c.pos -= 1;
            Err(c.error(alloc::format!("expected a constraint name, found {t}")))
        }
        None => Err(c.error("unexpected end of formula")),
    }
}
