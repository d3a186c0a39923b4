//! The C statement subset: parsing, printing, evaluation by graph
//! navigation, and elaboration of statements into rule invocations.
//!
//! Supported statements:
//!
//! ```text
//! int s = 0, *p, age[] = { 30, 65 }, buf[3];
//! x = e;   *p = e;   a[k] = e;   p = q;   p = a;   p = &a[k];   p = &x;
//! scanf("%i", &x);   scanf("%i", p);   printf("%i %i\n", e1, e2);
//! ```
//!
//! Expressions combine integer literals, variables, `*p`, `a[k]` and `&lv`
//! with `+ - * /` and parentheses. Subscripts are constants.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{InstanceGraph, NodeId, Value};
use crate::pointer_model::{Binding, Declaration};
use crate::rules::Anchors;

/// Name bindings of the declared variables.
pub type Env = BTreeMap<String, Binding>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(String),
    Deref(String),
    Index(String, i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RValue {
    Var(String),
    Deref(String),
    AddrOf(LValue),
    Index(String, i64),
    Int(i64),
    Arith(BinOp, Box<RValue>, Box<RValue>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Decl(Vec<Declaration>),
    Assign {
        lhs: LValue,
        rhs: RValue,
    },
    /// `target` is the object the address argument designates.
    Scanf {
        format: String,
        target: LValue,
    },
    Printf {
        format: String,
        args: Vec<RValue>,
    },
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LValue::Var(x) => f.write_str(x),
            LValue::Deref(p) => write!(f, "*{p}"),
            LValue::Index(a, k) => write!(f, "{a}[{k}]"),
        }
    }
}

impl fmt::Display for RValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RValue::Var(x) => f.write_str(x),
            RValue::Deref(p) => write!(f, "*{p}"),
            RValue::AddrOf(lv) => write!(f, "&{lv}"),
            RValue::Index(a, k) => write!(f, "{a}[{k}]"),
            RValue::Int(v) => write!(f, "{v}"),
            RValue::Arith(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

fn write_c_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Decl(ds) => {
                f.write_str("int ")?;
                for (i, d) in ds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match d {
                        Declaration::Int { name, value } => write!(f, "{name} = {value}")?,
                        Declaration::Pointer { name } => write!(f, "*{name}")?,
                        Declaration::Array { name, values } if values.is_empty() => write!(f, "{name}[] = {{}}")?,
                        Declaration::Array { name, values } => {
                            write!(f, "{name}[] = {{ ")?;
                            for (j, v) in values.iter().enumerate() {
                                if j > 0 {
                                    f.write_str(", ")?;
                                }
                                write!(f, "{v}")?;
                            }
                            f.write_str(" }")?;
                        }
                    }
                }
                f.write_str(";")
            }
            Statement::Assign { lhs, rhs } => write!(f, "{lhs} = {rhs};"),
            Statement::Scanf { format, target } => {
                f.write_str("scanf(")?;
                write_c_string(f, format)?;
                match target {
                    LValue::Deref(p) => write!(f, ", {p});"),
                    other => write!(f, ", &{other});"),
                }
            }
            Statement::Printf { format, args } => {
                f.write_str("printf(")?;
                write_c_string(f, format)?;
                for a in args {
                    write!(f, ", {a}")?;
                }
                f.write_str(");")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unsupported construct: {construct}")]
    UnsupportedConstruct { line: usize, col: usize, construct: String },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. } | ParseError::UnsupportedConstruct { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Punct(char),
    /// Operators outside the subset (`++`, `==`, `%`, ...).
    Other(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Other(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
    start: usize,
    end: usize,
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "if", "else", "while", "for", "do", "return", "switch", "case", "break", "continue", "goto", "struct", "union",
    "enum", "typedef", "char", "float", "double", "long", "short", "unsigned", "signed", "void", "const", "static",
    "sizeof", "malloc", "calloc", "realloc", "free",
];

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let (mut line, mut line_start) = (1usize, 0usize);
    let mut i = 0;
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        let col = src[line_start..pos].chars().count() + 1;
        let next = bytes.get(i + 1).map(|x| x.1);
        let (tline, tcol) = (line, col);
        let syntax = move |msg: String| ParseError::Syntax {
            line: tline,
            col: tcol,
            msg,
        };
        if c == '\n' {
            line += 1;
            line_start = pos + 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < bytes.len() && bytes[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && next == Some('*') {
            i += 2;
            loop {
                match bytes.get(i) {
                    None => return Err(syntax("unterminated comment".into())),
                    Some((_, '*')) if bytes.get(i + 1).map(|x| x.1) == Some('/') => {
                        i += 2;
                        break;
                    }
                    Some((p, '\n')) => {
                        line += 1;
                        line_start = p + 1;
                        i += 1;
                    }
                    _ => i += 1,
                }
            }
            continue;
        }
        let start = pos;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, d)) = bytes.get(i) {
                if d.is_ascii_alphanumeric() || d == '_' {
                    s.push(d);
                    i += 1;
                } else {
                    break;
                }
            }
            Tok::Ident(s)
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&(_, d)) = bytes.get(i) {
                if d.is_ascii_alphanumeric() {
                    s.push(d);
                    i += 1;
                } else {
                    break;
                }
            }
            let v = s
                .parse::<u64>()
                .map_err(|_| syntax(alloc::format!("bad integer literal `{s}`")))?;
            Tok::Int(v)
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match bytes.get(i).map(|x| x.1) {
                    None | Some('\n') => return Err(syntax("unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = bytes.get(i + 1).map(|x| x.1);
                        s.push(match e {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(syntax("unknown escape in string".into())),
                        });
                        i += 2;
                    }
                    Some(d) => {
                        s.push(d);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else {
            let two: String = [Some(c), next].iter().flatten().collect();
            const MULTI: &[&str] = &[
                "++", "--", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=", "->", "&&", "||", "<<", ">>",
            ];
            if MULTI.contains(&two.as_str()) {
                i += 2;
                Tok::Other(two)
            } else if "=;,*&[](){}+-/".contains(c) {
                i += 1;
                Tok::Punct(c)
            } else if "%<>!.?:|^~".contains(c) {
                i += 1;
                Tok::Other(c.to_string())
            } else {
                return Err(syntax(alloc::format!("unexpected character `{c}`")));
            }
        };
        let end = bytes.get(i).map(|x| x.0).unwrap_or(src.len());
        out.push(Spanned {
            tok,
            line,
            col,
            start,
            end,
        });
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Spanned>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        Ok(Parser {
            src,
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(s) => (s.line, s.col),
            None => {
                let line = self.src.lines().count().max(1);
                let col = self.src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
                (line, col)
            }
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn unsupported(&self, what: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::UnsupportedConstruct {
            line,
            col,
            construct: what.into(),
        }
    }

    /// Error for the current token, distinguishing constructs outside the
    /// subset from plain mistakes.
    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(Tok::Other(op)) => self.unsupported(alloc::format!("operator `{op}`")),
            Some(Tok::Ident(k)) if UNSUPPORTED_KEYWORDS.contains(&k.as_str()) => {
                self.unsupported(alloc::format!("`{k}`"))
            }
            Some(t) => self.syntax(alloc::format!("expected {expected}, found {t}")),
            None => self.syntax(alloc::format!("expected {expected}, found end of input")),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&alloc::format!("`{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !UNSUPPORTED_KEYWORDS.contains(&s.as_str()) && s != "int" => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat('-');
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v as i128;
                let v = if neg { -v } else { v };
                let v = i64::try_from(v).map_err(|_| self.syntax("integer literal out of range"))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn subscript(&mut self) -> Result<i64, ParseError> {
        if self.peek() == Some(&Tok::Punct(']')) {
            return Err(self.syntax("expected an index"));
        }
        let neg = self.peek() == Some(&Tok::Punct('-'));
        let lit = matches!(self.peek_at(usize::from(neg)), Some(Tok::Int(_)))
            && self.peek_at(usize::from(neg) + 1) == Some(&Tok::Punct(']'));
        if !lit {
            return Err(self.unsupported("non-constant subscript"));
        }
        let k = self.signed_int()?;
        self.expect(']')?;
        Ok(k)
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        match self.peek() {
            Some(Tok::Ident(k)) if k == "int" => {
                self.pos += 1;
                self.declaration()
            }
            Some(Tok::Ident(k)) if k == "scanf" => {
                self.pos += 1;
                self.scanf()
            }
            Some(Tok::Ident(k)) if k == "printf" => {
                self.pos += 1;
                self.printf()
            }
            Some(Tok::Ident(k))
                if self.peek_at(1) == Some(&Tok::Punct('(')) && !UNSUPPORTED_KEYWORDS.contains(&k.as_str()) =>
            {
                Err(self.unsupported(alloc::format!("call to `{k}`")))
            }
            _ => {
                let lhs = self.lvalue()?;
                if !self.eat('=') {
                    return Err(self.unexpected("`=`"));
                }
                let rhs = self.rvalue()?;
                Ok(Statement::Assign { lhs, rhs })
            }
        }
    }

    fn declaration(&mut self) -> Result<Statement, ParseError> {
        let mut out = Vec::new();
        loop {
            if self.eat('*') {
                let name = self.ident()?;
                if self.peek() == Some(&Tok::Punct('=')) {
                    return Err(self.unsupported("pointer initializer"));
                }
                out.push(Declaration::Pointer { name });
            } else {
                let name = self.ident()?;
                if self.eat('[') {
                    let size = match self.peek() {
                        Some(Tok::Int(_)) => {
                            let v = self.signed_int()?;
                            Some(usize::try_from(v).map_err(|_| self.syntax("bad array size"))?)
                        }
                        _ => None,
                    };
                    self.expect(']')?;
                    let mut values = Vec::new();
                    if self.eat('=') {
                        self.expect('{')?;
                        if !self.eat('}') {
                            loop {
                                values.push(self.signed_int()?);
                                if self.eat('}') {
                                    break;
                                }
                                self.expect(',')?;
                                if self.eat('}') {
                                    break;
                                }
                            }
                        }
                    } else if size.is_none() {
                        return Err(self.syntax("array without size needs an initializer"));
                    }
                    if let Some(n) = size {
                        if values.len() > n {
                            return Err(self.syntax("too many initializers"));
                        }
                        values.resize(n, 0);
                    }
                    out.push(Declaration::Array { name, values });
                } else {
                    let value = if self.eat('=') { self.signed_int()? } else { 0 };
                    out.push(Declaration::Int { name, value });
                }
            }
            if !self.eat(',') {
                break;
            }
        }
        Ok(Statement::Decl(out))
    }

    fn format(&mut self) -> Result<(String, usize), ParseError> {
        let (line, col) = self.here();
        let Some(Tok::Str(s)) = self.peek().cloned() else {
            return Err(self.unexpected("a format string"));
        };
        self.pos += 1;
        let n = count_conversions(&s).map_err(|c| ParseError::UnsupportedConstruct {
            line,
            col,
            construct: alloc::format!("conversion `{c}`"),
        })?;
        Ok((s, n))
    }

    fn scanf(&mut self) -> Result<Statement, ParseError> {
        self.expect('(')?;
        let (format, n) = self.format()?;
        if n != 1 {
            return Err(self.unsupported("scanf needs exactly one conversion"));
        }
        self.expect(',')?;
        let target = if self.eat('&') {
            self.lvalue()?
        } else {
            // a pointer variable already holds the address
            LValue::Deref(self.ident()?)
        };
        if self.peek() == Some(&Tok::Punct(',')) {
            return Err(self.unsupported("scanf needs exactly one conversion"));
        }
        self.expect(')')?;
        Ok(Statement::Scanf { format, target })
    }

    fn printf(&mut self) -> Result<Statement, ParseError> {
        self.expect('(')?;
        let (line, col) = self.here();
        let (format, n) = self.format()?;
        let mut args = Vec::new();
        while self.eat(',') {
            args.push(self.rvalue()?);
        }
        self.expect(')')?;
        if args.len() != n {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: alloc::format!("format expects {n} arguments, got {}", args.len()),
            });
        }
        Ok(Statement::Printf { format, args })
    }

    fn lvalue(&mut self) -> Result<LValue, ParseError> {
        if self.eat('(') {
            let lv = self.lvalue()?;
            self.expect(')')?;
            return Ok(lv);
        }
        if self.eat('*') {
            if self.peek() == Some(&Tok::Punct('(')) || self.peek() == Some(&Tok::Punct('*')) {
                return Err(self.unsupported("dereference of an expression"));
            }
            return Ok(LValue::Deref(self.ident()?));
        }
        let name = self.ident()?;
        if self.eat('[') {
            return Ok(LValue::Index(name, self.subscript()?));
        }
        Ok(LValue::Var(name))
    }

    fn rvalue(&mut self) -> Result<RValue, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = RValue::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<RValue, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = RValue::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<RValue, ParseError> {
        match self.peek() {
            Some(Tok::Punct('-')) => {
                if let Some(Tok::Int(_)) = self.peek_at(1) {
                    return Ok(RValue::Int(self.signed_int()?));
                }
                self.pos += 1;
                let inner = self.unary()?;
                Ok(RValue::Arith(BinOp::Sub, Box::new(RValue::Int(0)), Box::new(inner)))
            }
            Some(Tok::Punct('*')) => match self.lvalue()? {
                LValue::Deref(p) => Ok(RValue::Deref(p)),
                _ => unreachable!("`*` starts a dereference"),
            },
            Some(Tok::Punct('&')) => {
                self.pos += 1;
                Ok(RValue::AddrOf(self.lvalue()?))
            }
            Some(Tok::Punct('(')) => {
                self.pos += 1;
                let e = self.rvalue()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Int(_)) => Ok(RValue::Int(self.signed_int()?)),
            Some(Tok::Ident(k))
                if self.peek_at(1) == Some(&Tok::Punct('(')) && !UNSUPPORTED_KEYWORDS.contains(&k.as_str()) =>
            {
                Err(self.unsupported(alloc::format!("call to `{k}`")))
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident()?;
                if self.eat('[') {
                    Ok(RValue::Index(name, self.subscript()?))
                } else {
                    Ok(RValue::Var(name))
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

/// Number of `%i`/`%d` conversions (with optional `h`/`l` width); any other
/// conversion is returned as an error.
fn count_conversions(fmt: &str) -> Result<usize, String> {
    let mut n = 0;
    let mut it = fmt.chars().peekable();
    while let Some(c) = it.next() {
        if c != '%' {
            continue;
        }
        let mut spec = String::from("%");
        if it.peek() == Some(&'%') {
            it.next();
            continue;
        }
        while let Some(&m) = it.peek() {
            if m == 'h' || m == 'l' {
                spec.push(m);
                it.next();
            } else {
                break;
            }
        }
        match it.next() {
            Some(d @ ('i' | 'd')) => {
                spec.push(d);
                n += 1;
            }
            Some(d) => {
                spec.push(d);
                return Err(spec);
            }
            None => return Err(spec),
        }
    }
    Ok(n)
}

/// One parsed statement with its source text and position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub statement: Statement,
    pub text: String,
    pub line: usize,
}

/// Parses a program: statements terminated by `;`, any number per line.
pub fn parse_program(src: &str) -> Result<Vec<Parsed>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while p.pos < p.toks.len() {
        let first = p.pos;
        let statement = p.statement()?;
        p.expect(';')?;
        let (start, line) = (p.toks[first].start, p.toks[first].line);
        let end = p.toks[p.pos - 1].end;
        out.push(Parsed {
            statement,
            text: src[start..end].to_string(),
            line,
        });
    }
    Ok(out)
}

/// Parses exactly one statement; the trailing `;` may be omitted.
pub fn parse_statement(src: &str) -> Result<Statement, ParseError> {
    let mut p = Parser::new(src)?;
    if p.toks.is_empty() {
        return Err(p.syntax("empty statement"));
    }
    let s = p.statement()?;
    p.eat(';');
    if p.pos < p.toks.len() {
        return Err(p.unexpected("end of statement"));
    }
    Ok(s)
}

/// Parses a declarations file: only `int ...;` statements.
pub fn parse_declarations(src: &str) -> Result<Vec<Declaration>, ParseError> {
    let mut out = Vec::new();
    for p in parse_program(src)? {
        match p.statement {
            Statement::Decl(ds) => out.extend(ds),
            _ => {
                return Err(ParseError::Syntax {
                    line: p.line,
                    col: 1,
                    msg: alloc::format!("expected a declaration, found `{}`", p.text),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("`{0}` is not declared")]
    UnboundName(String),
    #[error("`{0}` is a null pointer")]
    NullDereference(String),
    #[error("`{0}` refers to an address that holds no object")]
    DanglingReference(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("index {index} is outside `{name}` of length {len}")]
    IndexOutOfBounds { name: String, index: i64, len: i64 },
    #[error("`{0}` has no address in this memory model")]
    AddressOfUnaddressed(String),
    #[error("input stream is exhausted")]
    InputExhausted,
    #[error("no free address left")]
    PoolExhausted,
    #[error("division by zero")]
    DivisionByZero,
    #[error("undefined behaviour: {0}")]
    UndefinedBehavior(String),
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtValue {
    Int(i64),
    /// An address node, `None` for null.
    Addr(Option<NodeId>),
}

fn binding<'e>(env: &'e Env, name: &str) -> Result<&'e Binding, ExecError> {
    env.get(name).ok_or_else(|| ExecError::UnboundName(name.to_string()))
}

/// The pointer node a name stands for; arrays decay to their first pointer.
fn pointer_node(env: &Env, name: &str) -> Result<NodeId, ExecError> {
    match binding(env, name)? {
        Binding::Pointer(p) => Ok(*p),
        Binding::Array { first, .. } => Ok(*first),
        Binding::Int(_) => Err(ExecError::TypeMismatch(alloc::format!("`{name}` is not a pointer"))),
    }
}

fn referenced(g: &InstanceGraph, p: NodeId) -> Option<NodeId> {
    g.successors(p, "ref").next()
}

fn content(g: &InstanceGraph, addr: NodeId) -> Option<NodeId> {
    g.successors(addr, "cont").next()
}

fn int_object(g: &InstanceGraph, obj: NodeId, what: &str) -> Result<i64, ExecError> {
    match (g.node_type(obj), g.attr(obj, "val")) {
        (Some("Int"), Some(Value::Int(v))) => Ok(*v),
        _ => Err(ExecError::TypeMismatch(alloc::format!("{what} is not an int"))),
    }
}

fn address_of_object(g: &InstanceGraph, obj: NodeId) -> Option<NodeId> {
    g.predecessors(obj, "cont").next()
}

/// Int object `*p` designates.
fn deref_object(g: &InstanceGraph, env: &Env, p: &str) -> Result<(NodeId, NodeId), ExecError> {
    let ptr = pointer_node(env, p)?;
    let addr = referenced(g, ptr).ok_or_else(|| ExecError::NullDereference(p.to_string()))?;
    let obj = content(g, addr).ok_or_else(|| ExecError::DanglingReference(p.to_string()))?;
    int_object(g, obj, &alloc::format!("`*{p}`"))?;
    Ok((addr, obj))
}

/// Address of `a[k]`, reached from the first address along succ.
fn cell_address(g: &InstanceGraph, env: &Env, a: &str, k: i64) -> Result<NodeId, ExecError> {
    let Binding::Array { array, first, .. } = binding(env, a)? else {
        return Err(ExecError::TypeMismatch(alloc::format!("`{a}` is not an array")));
    };
    let len = g.attr(*array, "len").and_then(Value::as_int).unwrap_or(0);
    if k < 0 || k >= len {
        return Err(ExecError::IndexOutOfBounds {
            name: a.to_string(),
            index: k,
            len,
        });
    }
    let mut addr = referenced(g, *first).ok_or_else(|| ExecError::NullDereference(a.to_string()))?;
    for _ in 0..k {
        addr = g
            .successors(addr, "succ")
            .next()
            .ok_or_else(|| ExecError::DanglingReference(alloc::format!("{a}[{k}]")))?;
    }
    Ok(addr)
}

fn cell_object(g: &InstanceGraph, env: &Env, a: &str, k: i64) -> Result<NodeId, ExecError> {
    let addr = cell_address(g, env, a, k)?;
    let obj = content(g, addr).ok_or_else(|| ExecError::DanglingReference(alloc::format!("{a}[{k}]")))?;
    int_object(g, obj, &alloc::format!("`{a}[{k}]`"))?;
    Ok(obj)
}

/// Address an `&lv` expression yields.
fn address_of(g: &InstanceGraph, env: &Env, lv: &LValue) -> Result<Option<NodeId>, ExecError> {
    match lv {
        LValue::Deref(p) => Ok(referenced(g, pointer_node(env, p)?)),
        LValue::Index(a, k) => cell_address(g, env, a, *k).map(Some),
        LValue::Var(x) => match binding(env, x)? {
            Binding::Int(obj) => address_of_object(g, *obj)
                .map(Some)
                .ok_or_else(|| ExecError::AddressOfUnaddressed(x.clone())),
            Binding::Pointer(_) => Err(ExecError::AddressOfUnaddressed(x.clone())),
            Binding::Array { .. } => Err(ExecError::UnsupportedConstruct(alloc::format!(
                "address of array `{x}`"
            ))),
        },
    }
}

/// Evaluates an expression by navigating the memory graph.
pub fn eval_rvalue(rv: &RValue, g: &InstanceGraph, env: &Env) -> Result<RtValue, ExecError> {
    match rv {
        RValue::Int(v) => Ok(RtValue::Int(*v)),
        RValue::Var(x) => match binding(env, x)? {
            Binding::Int(obj) => int_object(g, *obj, x).map(RtValue::Int),
            Binding::Pointer(p) => Ok(RtValue::Addr(referenced(g, *p))),
            Binding::Array { first, .. } => Ok(RtValue::Addr(referenced(g, *first))),
        },
        RValue::Deref(p) => {
            let (_, obj) = deref_object(g, env, p)?;
            int_object(g, obj, p).map(RtValue::Int)
        }
        RValue::Index(a, k) => {
            let obj = cell_object(g, env, a, *k)?;
            int_object(g, obj, a).map(RtValue::Int)
        }
        RValue::AddrOf(lv) => address_of(g, env, lv).map(RtValue::Addr),
        RValue::Arith(op, l, r) => {
            let (RtValue::Int(a), RtValue::Int(b)) = (eval_rvalue(l, g, env)?, eval_rvalue(r, g, env)?) else {
                return Err(ExecError::TypeMismatch("arithmetic needs int operands".into()));
            };
            Ok(RtValue::Int(match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Div => {
                    if b == 0 {
                        return Err(ExecError::DivisionByZero);
                    }
                    a.wrapping_div(b)
                }
            }))
        }
    }
}

fn eval_int(rv: &RValue, g: &InstanceGraph, env: &Env, what: &str) -> Result<i64, ExecError> {
    match eval_rvalue(rv, g, env)? {
        RtValue::Int(v) => Ok(v),
        RtValue::Addr(_) => Err(ExecError::TypeMismatch(alloc::format!(
            "{what} expects an int, `{rv}` is an address"
        ))),
    }
}

/// A rule to apply with its anchor bindings and parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleCall {
    pub rule: String,
    pub anchors: Anchors,
    pub params: BTreeMap<String, Value>,
}

impl RuleCall {
    fn new(rule: &str, anchors: &[(&str, NodeId)]) -> Self {
        RuleCall {
            rule: rule.to_string(),
            anchors: anchors.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            params: BTreeMap::new(),
        }
    }

    fn with_value(mut self, v: i64) -> Self {
        self.params.insert("value".into(), Value::Int(v));
        self
    }
}

/// How to carry out a statement. Statements without a rule leave the memory
/// graph unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub call: Option<RuleCall>,
    pub inputs_consumed: usize,
    pub output: Option<String>,
}

impl Plan {
    fn rule(call: RuleCall) -> Self {
        Plan {
            call: Some(call),
            ..Plan::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ElabOptions {
    /// Writing through a null or dangling pointer is an error instead of the
    /// allocating rules.
    pub strict_c: bool,
    /// `&x` on an unaddressed int places it at a free address.
    pub materialize_addresses: bool,
}

fn has_free_address(g: &InstanceGraph) -> bool {
    g.nodes_of_type("Address")
        .any(|a| g.attr(a, "free") == Some(&Value::Bool(true)) && content(g, a).is_none())
}

/// An int variable that has no address yet.
fn unaddressed_int(g: &InstanceGraph, env: &Env, rv: &RValue) -> Option<NodeId> {
    let RValue::Var(x) = rv else { return None };
    match env.get(x) {
        Some(Binding::Int(obj)) if address_of_object(g, *obj).is_none() => Some(*obj),
        _ => None,
    }
}

fn printf_output(format: &str, values: &[i64]) -> String {
    let mut out = String::new();
    let mut vals = values.iter();
    let mut it = format.chars().peekable();
    while let Some(c) = it.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        if it.peek() == Some(&'%') {
            it.next();
            out.push('%');
            continue;
        }
        while matches!(it.peek(), Some('h' | 'l')) {
            it.next();
        }
        it.next();
        if let Some(v) = vals.next() {
            out.push_str(&alloc::format!("{v}"));
        }
    }
    out
}

/// Chooses the rule, anchors and parameters that carry out `stmt` in `g`.
/// `input` is the unread part of the input stream.
pub fn elaborate(
    stmt: &Statement,
    g: &InstanceGraph,
    env: &Env,
    input: &[i64],
    opts: ElabOptions,
) -> Result<Plan, ExecError> {
    match stmt {
        Statement::Decl(_) => Err(ExecError::UnsupportedConstruct(
            "declarations are only allowed before the program".into(),
        )),
        Statement::Printf { format, args } => {
            let mut vals = Vec::new();
            for a in args {
                vals.push(eval_int(a, g, env, "printf")?);
            }
            Ok(Plan {
                output: Some(printf_output(format, &vals)),
                ..Plan::default()
            })
        }
        Statement::Scanf { target, .. } => {
            let value = *input.first().ok_or(ExecError::InputExhausted)?;
            let call = match target {
                LValue::Var(x) => match binding(env, x)? {
                    Binding::Int(obj) => match address_of_object(g, *obj) {
                        Some(addr) => RuleCall::new("ext:readIntoAddress", &[("address", addr)]),
                        None => RuleCall::new("ext:assignInt", &[("target", *obj)]),
                    },
                    _ => return Err(ExecError::TypeMismatch(alloc::format!("scanf into non-int `{x}`"))),
                },
                LValue::Index(a, k) => {
                    cell_object(g, env, a, *k)?;
                    RuleCall::new("ext:readIntoAddress", &[("address", cell_address(g, env, a, *k)?)])
                }
                LValue::Deref(p) => {
                    let (addr, _) = deref_object(g, env, p)?;
                    RuleCall::new("ext:readIntoAddress", &[("address", addr)])
                }
            };
            Ok(Plan {
                call: Some(call.with_value(value)),
                inputs_consumed: 1,
                output: None,
            })
        }
        Statement::Assign { lhs, rhs } => elaborate_assign(lhs, rhs, g, env, opts),
    }
}

fn elaborate_assign(
    lhs: &LValue,
    rhs: &RValue,
    g: &InstanceGraph,
    env: &Env,
    opts: ElabOptions,
) -> Result<Plan, ExecError> {
    match lhs {
        LValue::Var(x) => match binding(env, x)? {
            Binding::Array { .. } => Err(ExecError::TypeMismatch(alloc::format!("array `{x}` is not assignable"))),
            Binding::Pointer(p) => elaborate_pointer_assign(*p, x, rhs, g, env, opts),
            Binding::Int(obj) => {
                if let RValue::Deref(q) = rhs {
                    let ptr = pointer_node(env, q)?;
                    deref_object(g, env, q)?;
                    if address_of_object(g, *obj).is_none() {
                        return Ok(Plan::rule(RuleCall::new(
                            "copyReferent",
                            &[("pointer", ptr), ("target", *obj)],
                        )));
                    }
                }
                let v = eval_int(rhs, g, env, &alloc::format!("`{x}`"))?;
                Ok(Plan::rule(
                    RuleCall::new("ext:assignInt", &[("target", *obj)]).with_value(v),
                ))
            }
        },
        LValue::Index(a, k) => {
            let obj = cell_object(g, env, a, *k)?;
            let v = eval_int(rhs, g, env, &alloc::format!("`{a}[{k}]`"))?;
            Ok(Plan::rule(
                RuleCall::new("ext:assignInt", &[("target", obj)]).with_value(v),
            ))
        }
        LValue::Deref(p) => {
            let ptr = pointer_node(env, p)?;
            match referenced(g, ptr) {
                Some(addr) if content(g, addr).is_some() => {
                    deref_object(g, env, p)?;
                    let v = eval_int(rhs, g, env, &alloc::format!("`*{p}`"))?;
                    Ok(Plan::rule(
                        RuleCall::new("ext:writeThroughPointer", &[("pointer", ptr)]).with_value(v),
                    ))
                }
                Some(_) => {
                    if opts.strict_c {
                        return Err(ExecError::UndefinedBehavior(alloc::format!(
                            "`{p}` refers to unallocated memory"
                        )));
                    }
                    let Some(value) = unaddressed_int(g, env, rhs) else {
                        return Err(ExecError::DanglingReference(p.clone()));
                    };
                    Ok(Plan::rule(RuleCall::new(
                        "pointerInt",
                        &[("pointer", ptr), ("value", value)],
                    )))
                }
                None => {
                    if opts.strict_c {
                        return Err(ExecError::NullDereference(p.clone()));
                    }
                    let Some(value) = unaddressed_int(g, env, rhs) else {
                        return Err(ExecError::NullDereference(p.clone()));
                    };
                    if !has_free_address(g) {
                        return Err(ExecError::PoolExhausted);
                    }
                    Ok(Plan::rule(RuleCall::new(
                        "nullPointerInt",
                        &[("pointer", ptr), ("value", value)],
                    )))
                }
            }
        }
    }
}

fn elaborate_pointer_assign(
    p: NodeId,
    name: &str,
    rhs: &RValue,
    g: &InstanceGraph,
    env: &Env,
    opts: ElabOptions,
) -> Result<Plan, ExecError> {
    let current = referenced(g, p);
    // the pointer whose value is copied, when the right side names one
    let source = match rhs {
        RValue::Var(q) | RValue::AddrOf(LValue::Deref(q)) => match binding(env, q)? {
            Binding::Int(_) if matches!(rhs, RValue::Var(_)) => {
                return Err(ExecError::TypeMismatch(alloc::format!(
                    "cannot assign int `{q}` to pointer `{name}`"
                )))
            }
            _ => Some(pointer_node(env, q)?),
        },
        _ => None,
    };
    if let Some(sp) = source {
        let target = referenced(g, sp);
        if sp == p || target == current {
            return Ok(Plan::default());
        }
        return Ok(match (target, current) {
            (None, Some(_)) => Plan::rule(RuleCall::new("ext:clearPointer", &[("pointer", p)])),
            (Some(_), None) => Plan::rule(RuleCall::new("nullPointerReferent", &[("target", p), ("source", sp)])),
            (Some(_), Some(_)) => Plan::rule(RuleCall::new("pointerReferent", &[("target", p), ("source", sp)])),
            (None, None) => Plan::default(),
        });
    }
    match rhs {
        RValue::Int(0) => Ok(match current {
            Some(_) => Plan::rule(RuleCall::new("ext:clearPointer", &[("pointer", p)])),
            None => Plan::default(),
        }),
        RValue::AddrOf(LValue::Index(a, k)) => {
            cell_object(g, env, a, *k)?;
            let addr = cell_address(g, env, a, *k)?;
            if current == Some(addr) {
                return Ok(Plan::default());
            }
            if current.is_some() {
                return Ok(Plan::rule(RuleCall::new(
                    "pointerAssignedNewAddress",
                    &[("pointer", p), ("address", addr)],
                )));
            }
            let Binding::Array { array, .. } = binding(env, a)? else {
                unreachable!("cell_address checked")
            };
            let rule = if *k == 0 {
                String::from("pointerArray")
            } else {
                alloc::format!("{}[{k}]", crate::pointer_model::POINTER_ARRAY_AT)
            };
            Ok(Plan::rule(RuleCall::new(&rule, &[("array", *array), ("pointer", p)])))
        }
        RValue::AddrOf(LValue::Var(x)) => {
            let Binding::Int(obj) = binding(env, x)? else {
                return address_of(g, env, &LValue::Var(x.clone())).map(|_| Plan::default());
            };
            match address_of_object(g, *obj) {
                Some(addr) if current == Some(addr) => Ok(Plan::default()),
                Some(addr) => Ok(Plan::rule(match current {
                    None => RuleCall::new("ext:nullPointerToAddress", &[("pointer", p), ("address", addr)]),
                    Some(_) => RuleCall::new("pointerAssignedNewAddress", &[("pointer", p), ("address", addr)]),
                })),
                None if opts.materialize_addresses => {
                    if !has_free_address(g) {
                        return Err(ExecError::PoolExhausted);
                    }
                    Ok(Plan::rule(match current {
                        None => RuleCall::new("nullPointerInt", &[("pointer", p), ("value", *obj)]),
                        Some(_) => RuleCall::new("ext:pointerToMaterializedInt", &[("pointer", p), ("value", *obj)]),
                    }))
                }
                None => Err(ExecError::AddressOfUnaddressed(x.clone())),
            }
        }
        other => match eval_rvalue(other, g, env)? {
            RtValue::Int(_) => Err(ExecError::TypeMismatch(alloc::format!(
                "cannot assign int `{other}` to pointer `{name}`"
            ))),
            RtValue::Addr(_) => Err(ExecError::UnsupportedConstruct(alloc::format!(
                "pointer expression `{other}`"
            ))),
        },
    }
}
