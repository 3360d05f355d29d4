// SPDX-License-Identifier: Apache-2.0

//! Event-action mini-language.
//!
//! ```text
//! self.checked_files.add(file)
//! return file in self.checked_files
//! ```
//!
//! Statements are separated by `;` or newlines:
//! `self.S.add(x)`, `self.S.remove(x)`, `self.C.incr()`, `self.C.decr()`,
//! `self.M.put(k, v)`, `self.M.remove(k)`, `return <expr>`.
//!
//! Expressions: `or and not`, `== != < <= > >=`, `x in self.S`,
//! `x not in self.S`, `self.S.contains(x)`, `len(self.S)`, `self.C` (a
//! counter's value), `self.M.get(k)`, `self.M.has(k)`, bare parameter
//! names, `event.<field>` for payload fields, and integer, string and
//! boolean literals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::VarKind;

/// Runtime value of an expression or a stored element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(Arc<str>),
    /// An object identity token.
    Obj(Arc<str>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Obj(o) => f.write_str(o),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Bool,
    Int,
    Str,
    Obj,
    /// Known only at run time (payload fields, map values, set elements).
    Any,
}

impl Ty {
    fn of(v: &Value) -> Ty {
        match v {
            Value::Bool(_) => Ty::Bool,
            Value::Int(_) => Ty::Int,
            Value::Str(_) => Ty::Str,
            Value::Obj(_) => Ty::Obj,
        }
    }

    fn fits(self, want: Ty) -> bool {
        self == want || self == Ty::Any || want == Ty::Any
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Lit(Value),
    Param(String),
    Field(String),
    Counter(String),
    Contains { var: String, elem: Box<Expr> },
    Len(String),
    MapGet { var: String, key: Box<Expr> },
    MapHas { var: String, key: Box<Expr> },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    SetAdd { var: String, elem: Expr },
    SetRemove { var: String, elem: Expr },
    Incr(String),
    Decr(String),
    MapPut { var: String, key: Expr, value: Expr },
    MapRemove { var: String, key: Expr },
    Return(Expr),
}

/// A parsed action program. Equality is on the source text.
#[derive(Clone, Debug)]
pub struct ActionProgram {
    source: String,
    stmts: Vec<Stmt>,
}

impl PartialEq for ActionProgram {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for ActionProgram {}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("action syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("parameter `{0}` is not bound by this event")]
    UndeclaredParameter(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Newline,
}

const SYMS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "!", "(", ")", ".", ",", ";",
];

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ActionError> {
    let err = |offset, message: &str| ActionError::Syntax {
        offset,
        message: message.to_string(),
    };
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            out.push((Tok::Newline, i));
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_digit() || (c == '-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i].parse().map_err(|_| err(start, "integer out of range"))?;
            out.push((Tok::Int(n), start));
        } else if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            let body_start = i;
            while i < bytes.len() && bytes[i] as char != c {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(err(start, "unterminated string"));
            }
            out.push((Tok::Str(src[body_start..i].to_string()), start));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if let Some(s) = SYMS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push((Tok::Sym(s), i));
            i += s.len();
        } else {
            return Err(err(i, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn error(&self, message: impl Into<String>) -> ActionError {
        ActionError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(x)) if x == w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ActionError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ActionError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn program(&mut self) -> Result<Vec<Stmt>, ActionError> {
        let mut stmts = Vec::new();
        loop {
            while self.eat_sym(";") || matches!(self.peek(), Some(Tok::Newline)) {
                if matches!(self.peek(), Some(Tok::Newline)) {
                    self.pos += 1;
                }
            }
            if self.peek().is_none() {
                return Ok(stmts);
            }
            stmts.push(self.stmt()?);
            match self.peek() {
                None | Some(Tok::Newline) | Some(Tok::Sym(";")) => {}
                _ => return Err(self.error("expected end of statement")),
            }
        }
    }

    /// `self.<var>` prefix; returns the variable name.
    fn self_var(&mut self) -> Result<String, ActionError> {
        if !self.eat_word("self") {
            return Err(self.error("expected `self`"));
        }
        self.expect_sym(".")?;
        self.ident()
    }

    fn stmt(&mut self) -> Result<Stmt, ActionError> {
        if self.eat_word("return") {
            return Ok(Stmt::Return(self.expr()?));
        }
        let var = self.self_var()?;
        self.expect_sym(".")?;
        let method = self.ident()?;
        self.expect_sym("(")?;
        let stmt = match method.as_str() {
            "add" => Stmt::SetAdd { var, elem: self.expr()? },
            // map removal is resolved in `check` once the kind is known
            "remove" | "discard" => Stmt::SetRemove { var, elem: self.expr()? },
            "incr" | "increment" => Stmt::Incr(var),
            "decr" | "decrement" => Stmt::Decr(var),
            "put" => {
                let key = self.expr()?;
                self.expect_sym(",")?;
                let value = self.expr()?;
                Stmt::MapPut { var, key, value }
            }
            other => return Err(self.error(format!("unknown method `{other}`"))),
        };
        self.expect_sym(")")?;
        Ok(stmt)
    }

    fn expr(&mut self) -> Result<Expr, ActionError> {
        let mut lhs = self.conj()?;
        while self.eat_word("or") || self.eat_sym("||") {
            lhs = Expr::Or(Box::new(lhs), Box::new(self.conj()?));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Expr, ActionError> {
        let mut lhs = self.negation()?;
        while self.eat_word("and") || self.eat_sym("&&") {
            lhs = Expr::And(Box::new(lhs), Box::new(self.negation()?));
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Expr, ActionError> {
        if self.eat_word("not") || self.eat_sym("!") {
            return Ok(Expr::Not(Box::new(self.negation()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ActionError> {
        let lhs = self.primary()?;
        let ops = [
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ];
        for (sym, op) in ops {
            if self.eat_sym(sym) {
                return Ok(Expr::Cmp(op, Box::new(lhs), Box::new(self.primary()?)));
            }
        }
        if self.eat_word("in") {
            let var = self.self_var()?;
            return Ok(Expr::Contains { var, elem: Box::new(lhs) });
        }
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == "not")
            && matches!(self.toks.get(self.pos + 1), Some((Tok::Ident(w), _)) if w == "in")
        {
            self.pos += 2;
            let var = self.self_var()?;
            return Ok(Expr::Not(Box::new(Expr::Contains { var, elem: Box::new(lhs) })));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, ActionError> {
        let tok = self.peek().cloned();
        match tok {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::Lit(Value::Int(n)))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Lit(Value::Str(s.into())))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Ident(word)) => match word.as_str() {
                "true" | "True" => {
                    self.pos += 1;
                    Ok(Expr::Lit(Value::Bool(true)))
                }
                "false" | "False" => {
                    self.pos += 1;
                    Ok(Expr::Lit(Value::Bool(false)))
                }
                "len" => {
                    self.pos += 1;
                    self.expect_sym("(")?;
                    let var = self.self_var()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Len(var))
                }
                "event" => {
                    self.pos += 1;
                    self.expect_sym(".")?;
                    Ok(Expr::Field(self.ident()?))
                }
                "self" => {
                    let var = self.self_var()?;
                    if !self.eat_sym(".") {
                        return Ok(Expr::Counter(var));
                    }
                    let method = self.ident()?;
                    self.expect_sym("(")?;
                    let arg = Box::new(self.expr()?);
                    self.expect_sym(")")?;
                    match method.as_str() {
                        "contains" => Ok(Expr::Contains { var, elem: arg }),
                        "get" => Ok(Expr::MapGet { var, key: arg }),
                        "has" => Ok(Expr::MapHas { var, key: arg }),
                        other => Err(self.error(format!("unknown method `{other}`"))),
                    }
                }
                "and" | "or" | "not" | "in" | "return" => Err(self.error(format!("unexpected `{word}`"))),
                _ => {
                    self.pos += 1;
                    Ok(Expr::Param(word))
                }
            },
            _ => Err(self.error("expected expression")),
        }
    }
}

/// What an action program may refer to: declared variables and the
/// parameters bound by its event.
pub struct ActionScope<'a> {
    pub variables: &'a BTreeMap<String, VarKind>,
    pub params: &'a BTreeSet<String>,
}

impl ActionProgram {
    /// Parses a program without checking it against a scope.
    pub fn parse(source: &str) -> Result<ActionProgram, ActionError> {
        let toks = lex(source)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: source.len(),
        };
        let stmts = p.program()?;
        Ok(ActionProgram {
            source: source.to_string(),
            stmts,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn statements(&self) -> &[Stmt] {
        &self.stmts
    }

    /// Checks the program against `scope` and returns the executable form,
    /// with `remove` on maps resolved to map removal.
    pub fn checked(&self, scope: &ActionScope) -> Result<ActionProgram, ActionError> {
        let mut program = self.clone();
        for stmt in &mut program.stmts {
            if let Stmt::SetRemove { var, elem } = stmt {
                if scope.variables.get(var) == Some(&VarKind::Map) {
                    *stmt = Stmt::MapRemove {
                        var: var.clone(),
                        key: elem.clone(),
                    };
                }
            }
        }
        for stmt in &program.stmts {
            check_stmt(stmt, scope)?;
        }
        Ok(program)
    }

    /// Variables the program mentions, in order of first use.
    pub fn variables(&self) -> Vec<&str> {
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
            match e {
                Expr::Counter(v) | Expr::Len(v) => out.push(v),
                Expr::Contains { var, elem: x } | Expr::MapGet { var, key: x } | Expr::MapHas { var, key: x } => {
                    out.push(var);
                    walk(x, out);
                }
                Expr::Not(x) => walk(x, out),
                Expr::And(a, b) | Expr::Or(a, b) | Expr::Cmp(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Lit(_) | Expr::Param(_) | Expr::Field(_) => {}
            }
        }
        let mut out = Vec::new();
        for stmt in &self.stmts {
            match stmt {
                Stmt::SetAdd { var, elem } | Stmt::SetRemove { var, elem } | Stmt::MapRemove { var, key: elem } => {
                    out.push(var.as_str());
                    walk(elem, &mut out);
                }
                Stmt::Incr(var) | Stmt::Decr(var) => out.push(var),
                Stmt::MapPut { var, key, value } => {
                    out.push(var);
                    walk(key, &mut out);
                    walk(value, &mut out);
                }
                Stmt::Return(e) => walk(e, &mut out),
            }
        }
        let mut seen = BTreeSet::new();
        out.retain(|v| seen.insert(*v));
        out
    }
}

fn kind_of(scope: &ActionScope, var: &str, want: VarKind, what: &str) -> Result<(), ActionError> {
    match scope.variables.get(var) {
        None => Err(ActionError::UndeclaredVariable(var.to_string())),
        Some(k) if *k == want => Ok(()),
        Some(k) => Err(ActionError::Type(format!(
            "`{what}` needs a {} but `{var}` is a {}",
            want.name(),
            k.name()
        ))),
    }
}

fn expect(ty: Ty, want: Ty, context: &str) -> Result<(), ActionError> {
    if ty.fits(want) {
        Ok(())
    } else {
        Err(ActionError::Type(format!("{context}: expected {want:?}, found {ty:?}")))
    }
}

fn check_stmt(stmt: &Stmt, scope: &ActionScope) -> Result<(), ActionError> {
    match stmt {
        Stmt::SetAdd { var, elem } => {
            kind_of(scope, var, VarKind::Set, "add")?;
            type_of(elem, scope).map(drop)
        }
        Stmt::SetRemove { var, elem } => {
            kind_of(scope, var, VarKind::Set, "remove")?;
            type_of(elem, scope).map(drop)
        }
        Stmt::Incr(var) => kind_of(scope, var, VarKind::Counter, "incr"),
        Stmt::Decr(var) => kind_of(scope, var, VarKind::Counter, "decr"),
        Stmt::MapPut { var, key, value } => {
            kind_of(scope, var, VarKind::Map, "put")?;
            type_of(key, scope)?;
            type_of(value, scope).map(drop)
        }
        Stmt::MapRemove { var, key } => {
            kind_of(scope, var, VarKind::Map, "remove")?;
            type_of(key, scope).map(drop)
        }
        Stmt::Return(e) => expect(type_of(e, scope)?, Ty::Bool, "return"),
    }
}

fn type_of(e: &Expr, scope: &ActionScope) -> Result<Ty, ActionError> {
    Ok(match e {
        Expr::Lit(v) => Ty::of(v),
        Expr::Param(p) => {
            if !scope.params.contains(p) {
                return Err(ActionError::UndeclaredParameter(p.clone()));
            }
            Ty::Obj
        }
        Expr::Field(_) => Ty::Any,
        Expr::Counter(v) => {
            kind_of(scope, v, VarKind::Counter, "value")?;
            Ty::Int
        }
        Expr::Len(v) => {
            if !scope.variables.contains_key(v) {
                return Err(ActionError::UndeclaredVariable(v.clone()));
            }
            if scope.variables[v] == VarKind::Counter {
                return Err(ActionError::Type(format!("`len` of counter `{v}`")));
            }
            Ty::Int
        }
        Expr::Contains { var, elem } => {
            kind_of(scope, var, VarKind::Set, "in")?;
            type_of(elem, scope)?;
            Ty::Bool
        }
        Expr::MapGet { var, key } => {
            kind_of(scope, var, VarKind::Map, "get")?;
            type_of(key, scope)?;
            Ty::Any
        }
        Expr::MapHas { var, key } => {
            kind_of(scope, var, VarKind::Map, "has")?;
            type_of(key, scope)?;
            Ty::Bool
        }
        Expr::Not(x) => {
            expect(type_of(x, scope)?, Ty::Bool, "not")?;
            Ty::Bool
        }
        Expr::And(a, b) | Expr::Or(a, b) => {
            expect(type_of(a, scope)?, Ty::Bool, "boolean operand")?;
            expect(type_of(b, scope)?, Ty::Bool, "boolean operand")?;
            Ty::Bool
        }
        Expr::Cmp(op, a, b) => {
            let (ta, tb) = (type_of(a, scope)?, type_of(b, scope)?);
            match op {
                CmpOp::Eq | CmpOp::Ne => {
                    if !ta.fits(tb) {
                        return Err(ActionError::Type(format!(
                            "`{}` compares {ta:?} with {tb:?}",
                            op.symbol()
                        )));
                    }
                }
                _ => {
                    expect(ta, Ty::Int, op.symbol())?;
                    expect(tb, Ty::Int, op.symbol())?;
                }
            }
            Ty::Bool
        }
    })
}

/// Stored value of one state variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarValue {
    Set(BTreeSet<Value>),
    Counter(i64),
    Map(BTreeMap<Value, Value>),
}

/// The variable store of one spec in one monitoring session.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarStore {
    vars: BTreeMap<String, VarValue>,
}

impl VarStore {
    pub fn new<'a>(decls: impl IntoIterator<Item = (&'a str, VarKind)>) -> Self {
        let vars = decls
            .into_iter()
            .map(|(name, kind)| {
                let v = match kind {
                    VarKind::Set => VarValue::Set(BTreeSet::new()),
                    VarKind::Counter => VarValue::Counter(0),
                    VarKind::Map => VarValue::Map(BTreeMap::new()),
                };
                (name.to_string(), v)
            })
            .collect();
        VarStore { vars }
    }

    pub fn get(&self, name: &str) -> Option<&VarValue> {
        self.vars.get(name)
    }

    fn slot(&mut self, name: &str) -> Result<&mut VarValue, ActionError> {
        self.vars
            .get_mut(name)
            .ok_or_else(|| ActionError::UndeclaredVariable(name.to_string()))
    }
}

/// Values visible to an action: the event's bound parameters and payload.
#[derive(Clone, Debug, Default)]
pub struct ActionEnv<'a> {
    pub params: BTreeMap<&'a str, Value>,
    pub fields: Option<&'a BTreeMap<String, Value>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionOutcome {
    Proceed,
    Suppress,
}

fn type_error(what: &str, v: &Value) -> ActionError {
    ActionError::Runtime(format!("{what} expects {}, got `{v}`", if what == "condition" { "a boolean" } else { "an integer" }))
}

fn eval(e: &Expr, store: &VarStore, env: &ActionEnv) -> Result<Value, ActionError> {
    let as_bool = |v: Value| match v {
        Value::Bool(b) => Ok(b),
        other => Err(type_error("condition", &other)),
    };
    Ok(match e {
        Expr::Lit(v) => v.clone(),
        Expr::Param(p) => env
            .params
            .get(p.as_str())
            .cloned()
            .ok_or_else(|| ActionError::UndeclaredParameter(p.clone()))?,
        Expr::Field(f) => env
            .fields
            .and_then(|fields| fields.get(f))
            .cloned()
            .ok_or_else(|| ActionError::Runtime(format!("event has no field `{f}`")))?,
        Expr::Counter(v) => match store.get(v) {
            Some(VarValue::Counter(n)) => Value::Int(*n),
            _ => return Err(ActionError::Runtime(format!("`{v}` is not a counter"))),
        },
        Expr::Len(v) => match store.get(v) {
            Some(VarValue::Set(s)) => Value::Int(s.len() as i64),
            Some(VarValue::Map(m)) => Value::Int(m.len() as i64),
            _ => return Err(ActionError::Runtime(format!("`len` of `{v}`"))),
        },
        Expr::Contains { var, elem } => {
            let x = eval(elem, store, env)?;
            match store.get(var) {
                Some(VarValue::Set(s)) => Value::Bool(s.contains(&x)),
                _ => return Err(ActionError::Runtime(format!("`{var}` is not a set"))),
            }
        }
        Expr::MapGet { var, key } => {
            let k = eval(key, store, env)?;
            match store.get(var) {
                Some(VarValue::Map(m)) => m
                    .get(&k)
                    .cloned()
                    .ok_or_else(|| ActionError::Runtime(format!("key `{k}` not in `{var}`")))?,
                _ => return Err(ActionError::Runtime(format!("`{var}` is not a map"))),
            }
        }
        Expr::MapHas { var, key } => {
            let k = eval(key, store, env)?;
            match store.get(var) {
                Some(VarValue::Map(m)) => Value::Bool(m.contains_key(&k)),
                _ => return Err(ActionError::Runtime(format!("`{var}` is not a map"))),
            }
        }
        Expr::Not(x) => Value::Bool(!as_bool(eval(x, store, env)?)?),
        Expr::And(a, b) => Value::Bool(as_bool(eval(a, store, env)?)? && as_bool(eval(b, store, env)?)?),
        Expr::Or(a, b) => Value::Bool(as_bool(eval(a, store, env)?)? || as_bool(eval(b, store, env)?)?),
        Expr::Cmp(op, a, b) => {
            let (x, y) = (eval(a, store, env)?, eval(b, store, env)?);
            let ordered = |x: Value, y: Value| match (x, y) {
                (Value::Int(x), Value::Int(y)) => Ok(x.cmp(&y)),
                (Value::Int(_), other) | (other, _) => Err(type_error(op.symbol(), &other)),
            };
            Value::Bool(match op {
                CmpOp::Eq | CmpOp::Ne => {
                    if std::mem::discriminant(&x) != std::mem::discriminant(&y) {
                        return Err(ActionError::Runtime(format!("`{}` compares `{x}` with `{y}`", op.symbol())));
                    }
                    (x == y) == (*op == CmpOp::Eq)
                }
                CmpOp::Lt => ordered(x, y)?.is_lt(),
                CmpOp::Le => ordered(x, y)?.is_le(),
                CmpOp::Gt => ordered(x, y)?.is_gt(),
                CmpOp::Ge => ordered(x, y)?.is_ge(),
            })
        }
    })
}

/// Runs `program` against `store`. Mutations apply in statement order;
/// `return false` suppresses the event, anything else proceeds.
pub fn eval_action(program: &ActionProgram, store: &mut VarStore, env: &ActionEnv) -> Result<ActionOutcome, ActionError> {
    for stmt in &program.stmts {
        match stmt {
            Stmt::SetAdd { var, elem } | Stmt::SetRemove { var, elem } => {
                let x = eval(elem, store, env)?;
                match store.slot(var)? {
                    VarValue::Set(s) => {
                        if matches!(stmt, Stmt::SetAdd { .. }) {
                            s.insert(x);
                        } else {
                            s.remove(&x);
                        }
                    }
                    _ => return Err(ActionError::Runtime(format!("`{var}` is not a set"))),
                }
            }
            Stmt::Incr(var) | Stmt::Decr(var) => {
                let delta = if matches!(stmt, Stmt::Incr(_)) { 1 } else { -1 };
                match store.slot(var)? {
                    VarValue::Counter(n) => *n = n.saturating_add(delta),
                    _ => return Err(ActionError::Runtime(format!("`{var}` is not a counter"))),
                }
            }
            Stmt::MapPut { var, key, value } => {
                let (k, v) = (eval(key, store, env)?, eval(value, store, env)?);
                match store.slot(var)? {
                    VarValue::Map(m) => {
                        m.insert(k, v);
                    }
                    _ => return Err(ActionError::Runtime(format!("`{var}` is not a map"))),
                }
            }
            Stmt::MapRemove { var, key } => {
                let k = eval(key, store, env)?;
                match store.slot(var)? {
                    VarValue::Map(m) => {
                        m.remove(&k);
                    }
                    _ => return Err(ActionError::Runtime(format!("`{var}` is not a map"))),
                }
            }
            Stmt::Return(e) => {
                return match eval(e, store, env)? {
                    Value::Bool(true) => Ok(ActionOutcome::Proceed),
                    Value::Bool(false) => Ok(ActionOutcome::Suppress),
                    other => Err(type_error("condition", &other)),
                };
            }
        }
    }
    Ok(ActionOutcome::Proceed)
}
