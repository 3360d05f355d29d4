// SPDX-License-Identifier: Apache-2.0

//! Extended regular expressions compiled by syntactic derivatives.
//!
//! Syntax, loosest to tightest binding:
//!
//! ```text
//! r | s      union
//! r & s      intersection
//! r s        concatenation (juxtaposition)
//! ~r         complement
//! r* r+ r?   repetition
//! name  epsilon  empty  ( r )
//! ```
//!
//! Expressions are hash-consed and kept in a similarity normal form (union
//! and intersection are flattened, sorted and deduplicated; concatenation
//! is right-nested; units and zeros are absorbed), which bounds the number
//! of distinct derivatives.

use std::collections::HashMap;

use super::lexer::{tokenize, Cursor, Tok};
use super::{can_reach, explore, Alphabet, Category, EventId, MonitorTemplate, SynthError};

type ReId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Re {
    Empty,
    Eps,
    Sym(EventId),
    Cat(ReId, ReId),
    Star(ReId),
    Or(Vec<ReId>),
    And(Vec<ReId>),
    Not(ReId),
}

const EMPTY: ReId = 0;
const EPS: ReId = 1;

/// Hash-consing arena with memoized nullability and derivatives.
struct Arena {
    nodes: Vec<Re>,
    ids: HashMap<Re, ReId>,
    nullable: Vec<bool>,
    derivs: HashMap<(ReId, EventId), ReId>,
}

impl Arena {
    fn new() -> Self {
        let mut arena = Arena {
            nodes: Vec::new(),
            ids: HashMap::new(),
            nullable: Vec::new(),
            derivs: HashMap::new(),
        };
        arena.intern(Re::Empty);
        arena.intern(Re::Eps);
        arena
    }

    fn intern(&mut self, re: Re) -> ReId {
        if let Some(&id) = self.ids.get(&re) {
            return id;
        }
        let nullable = match &re {
            Re::Empty | Re::Sym(_) => false,
            Re::Eps | Re::Star(_) => true,
            Re::Cat(a, b) => self.nullable[*a as usize] && self.nullable[*b as usize],
            Re::Or(xs) => xs.iter().any(|x| self.nullable[*x as usize]),
            Re::And(xs) => xs.iter().all(|x| self.nullable[*x as usize]),
            Re::Not(x) => !self.nullable[*x as usize],
        };
        let id = self.nodes.len() as ReId;
        self.nodes.push(re.clone());
        self.ids.insert(re, id);
        self.nullable.push(nullable);
        id
    }

    fn node(&self, id: ReId) -> &Re {
        &self.nodes[id as usize]
    }

    fn is_nullable(&self, id: ReId) -> bool {
        self.nullable[id as usize]
    }

    fn sym(&mut self, e: EventId) -> ReId {
        self.intern(Re::Sym(e))
    }

    fn universal(&mut self) -> ReId {
        self.intern(Re::Not(EMPTY))
    }

    fn cat(&mut self, a: ReId, b: ReId) -> ReId {
        if a == EMPTY || b == EMPTY {
            return EMPTY;
        }
        if a == EPS {
            return b;
        }
        if b == EPS {
            return a;
        }
        if let Re::Cat(x, y) = *self.node(a) {
            let tail = self.cat(y, b);
            return self.cat(x, tail);
        }
        self.intern(Re::Cat(a, b))
    }

    fn star(&mut self, a: ReId) -> ReId {
        match self.node(a) {
            Re::Empty | Re::Eps => EPS,
            Re::Star(_) => a,
            _ => self.intern(Re::Star(a)),
        }
    }

    fn not(&mut self, a: ReId) -> ReId {
        match *self.node(a) {
            Re::Not(inner) => inner,
            _ => self.intern(Re::Not(a)),
        }
    }

    fn or(&mut self, items: Vec<ReId>) -> ReId {
        let universal = self.universal();
        let mut flat = Vec::new();
        for item in items {
            match self.node(item) {
                Re::Or(xs) => flat.extend(xs.iter().copied()),
                _ => flat.push(item),
            }
        }
        flat.retain(|&x| x != EMPTY);
        if flat.contains(&universal) {
            return universal;
        }
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => EMPTY,
            1 => flat[0],
            _ => self.intern(Re::Or(flat)),
        }
    }

    fn and(&mut self, items: Vec<ReId>) -> ReId {
        let universal = self.universal();
        let mut flat = Vec::new();
        for item in items {
            match self.node(item) {
                Re::And(xs) => flat.extend(xs.iter().copied()),
                _ => flat.push(item),
            }
        }
        if flat.contains(&EMPTY) {
            return EMPTY;
        }
        flat.retain(|&x| x != universal);
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => universal,
            1 => flat[0],
            _ => self.intern(Re::And(flat)),
        }
    }

    fn derive(&mut self, r: ReId, e: EventId) -> ReId {
        if let Some(&d) = self.derivs.get(&(r, e)) {
            return d;
        }
        let d = match self.node(r).clone() {
            Re::Empty | Re::Eps => EMPTY,
            Re::Sym(s) => {
                if s == e {
                    EPS
                } else {
                    EMPTY
                }
            }
            Re::Cat(a, b) => {
                let da = self.derive(a, e);
                let left = self.cat(da, b);
                if self.is_nullable(a) {
                    let db = self.derive(b, e);
                    self.or(vec![left, db])
                } else {
                    left
                }
            }
            Re::Star(a) => {
                let da = self.derive(a, e);
                self.cat(da, r)
            }
            Re::Or(xs) => {
                let ds = xs.iter().map(|&x| self.derive(x, e)).collect();
                self.or(ds)
            }
            Re::And(xs) => {
                let ds = xs.iter().map(|&x| self.derive(x, e)).collect();
                self.and(ds)
            }
            Re::Not(a) => {
                let da = self.derive(a, e);
                self.not(da)
            }
        };
        self.derivs.insert((r, e), d);
        d
    }

    fn render(&self, id: ReId, alphabet: &Alphabet) -> String {
        match self.node(id) {
            Re::Empty => "empty".into(),
            Re::Eps => "epsilon".into(),
            Re::Sym(e) => alphabet.name(*e).to_string(),
            Re::Cat(a, b) => format!("{} {}", self.render_atom(*a, alphabet), self.render_cat_tail(*b, alphabet)),
            Re::Star(a) => format!("{}*", self.render_atom(*a, alphabet)),
            Re::Or(xs) => xs
                .iter()
                .map(|&x| self.render_atom(x, alphabet))
                .collect::<Vec<_>>()
                .join(" | "),
            Re::And(xs) => xs
                .iter()
                .map(|&x| self.render_atom(x, alphabet))
                .collect::<Vec<_>>()
                .join(" & "),
            Re::Not(a) => format!("~{}", self.render_atom(*a, alphabet)),
        }
    }

    fn render_cat_tail(&self, id: ReId, alphabet: &Alphabet) -> String {
        match self.node(id) {
            Re::Cat(..) => self.render(id, alphabet),
            _ => self.render_atom(id, alphabet),
        }
    }

    fn render_atom(&self, id: ReId, alphabet: &Alphabet) -> String {
        match self.node(id) {
            Re::Empty | Re::Eps | Re::Sym(_) | Re::Star(_) | Re::Not(_) => self.render(id, alphabet),
            _ => format!("({})", self.render(id, alphabet)),
        }
    }
}

const SYMBOLS: &[&str] = &["(", ")", "|", "&", "~", "*", "+", "?"];

struct Parser<'a, 'b> {
    cur: Cursor<'a>,
    arena: &'b mut Arena,
    events: &'b Alphabet,
}

impl Parser<'_, '_> {
    fn union(&mut self) -> Result<ReId, SynthError> {
        let mut items = vec![self.intersection()?];
        while self.cur.eat_sym("|") {
            items.push(self.intersection()?);
        }
        Ok(self.arena.or(items))
    }

    fn intersection(&mut self) -> Result<ReId, SynthError> {
        let mut items = vec![self.concat()?];
        while self.cur.eat_sym("&") {
            items.push(self.concat()?);
        }
        Ok(self.arena.and(items))
    }

    fn starts_unary(&self) -> bool {
        matches!(self.cur.peek(), Some(Tok::Ident(_)) | Some(Tok::Sym("(")) | Some(Tok::Sym("~")))
    }

    fn concat(&mut self) -> Result<ReId, SynthError> {
        if !self.starts_unary() {
            return Err(self.cur.error("expected expression"));
        }
        let mut parts = Vec::new();
        while self.starts_unary() {
            parts.push(self.unary()?);
        }
        let mut acc = EPS;
        for part in parts.into_iter().rev() {
            acc = self.arena.cat(part, acc);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ReId, SynthError> {
        if self.cur.eat_sym("~") {
            let inner = self.unary()?;
            return Ok(self.arena.not(inner));
        }
        let mut atom = self.atom()?;
        loop {
            if self.cur.eat_sym("*") {
                atom = self.arena.star(atom);
            } else if self.cur.eat_sym("+") {
                let star = self.arena.star(atom);
                atom = self.arena.cat(atom, star);
            } else if self.cur.eat_sym("?") {
                atom = self.arena.or(vec![atom, EPS]);
            } else {
                return Ok(atom);
            }
        }
    }

    fn atom(&mut self) -> Result<ReId, SynthError> {
        if self.cur.eat_sym("(") {
            let inner = self.union()?;
            self.cur.expect_sym(")")?;
            return Ok(inner);
        }
        let name = self.cur.expect_ident()?;
        match name {
            "epsilon" => Ok(EPS),
            "empty" => Ok(EMPTY),
            _ => {
                let e = self
                    .events
                    .id(name)
                    .ok_or_else(|| SynthError::UnknownEvent(name.to_string()))?;
                Ok(self.arena.sym(e))
            }
        }
    }
}

/// Compiles an ERE over `events` into a deterministic template.
///
/// A state is `Match` when its residual expression is nullable, `Violation`
/// when no extension can ever match, `Undetermined` otherwise.
pub fn compile_ere(formula: &str, events: &Alphabet) -> Result<MonitorTemplate, SynthError> {
    let mut arena = Arena::new();
    let root = {
        let mut parser = Parser {
            cur: Cursor::new(tokenize(formula, SYMBOLS)?, formula.len()),
            arena: &mut arena,
            events,
        };
        let root = parser.union()?;
        parser.cur.expect_end()?;
        root
    };
    let (keys, table) = explore(root, events.len(), |&r, e| arena.derive(r, e))?;
    let nullable: Vec<bool> = keys.iter().map(|&k| arena.is_nullable(k)).collect();
    let live = can_reach(&table, &nullable);
    let categories = keys
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if nullable[i] {
                Category::Match
            } else if !live[i] {
                Category::Violation
            } else {
                Category::Undetermined
            }
        })
        .collect();
    let names = keys
        .iter()
        .enumerate()
        .map(|(i, &k)| format!("q{i} <{}>", arena.render(k, events)))
        .collect();
    Ok(MonitorTemplate::from_parts(events.clone(), names, table, categories, 0))
}

/// Event names referenced by an ERE formula.
pub fn referenced_events(formula: &str) -> Result<Vec<String>, SynthError> {
    Ok(tokenize(formula, SYMBOLS)?
        .into_iter()
        .filter_map(|t| match t.tok {
            Tok::Ident(name) if name != "epsilon" && name != "empty" => Some(name.to_string()),
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(t: &MonitorTemplate, word: &[&str]) -> Category {
        t.category(t.run(word.iter().copied()).unwrap()).clone()
    }

    #[test]
    fn check_use() {
        let t = compile_ere("check use", &Alphabet::new(["check", "use"])).unwrap();
        assert_eq!(verdict(&t, &["check", "use"]), Category::Match);
        assert_eq!(verdict(&t, &["use"]), Category::Violation);
        assert_eq!(verdict(&t, &["check"]), Category::Undetermined);
        assert_eq!(verdict(&t, &["check", "use", "use"]), Category::Violation);
    }

    #[test]
    fn star_is_one_state() {
        let t = compile_ere("a*", &Alphabet::new(["a"])).unwrap();
        // one live state plus the implicit sink
        assert_eq!(t.num_states(), 2);
        for n in 0..5 {
            let word = vec!["a"; n];
            assert_eq!(verdict(&t, &word), Category::Match);
        }
    }

    #[test]
    fn unsafe_dict_iterator() {
        let events = Alphabet::new(["createDict", "updateDict", "createIter", "next"]);
        let t = compile_ere("createDict updateDict* createIter next* updateDict+ next", &events).unwrap();
        assert_eq!(
            verdict(&t, &["createDict", "createIter", "updateDict", "next"]),
            Category::Match
        );
        assert_eq!(verdict(&t, &["createDict", "createIter", "next"]), Category::Undetermined);
        assert_eq!(verdict(&t, &["next"]), Category::Violation);
    }

    #[test]
    fn complement_and_intersection() {
        let ab = Alphabet::new(["a", "b"]);
        let t = compile_ere("~(a b)", &ab).unwrap();
        assert_eq!(verdict(&t, &["a", "b"]), Category::Undetermined);
        assert_eq!(verdict(&t, &["a"]), Category::Match);
        assert_eq!(verdict(&t, &["a", "b", "a"]), Category::Match);

        // a* & b* only matches the empty word
        let t = compile_ere("a* & b*", &ab).unwrap();
        assert_eq!(verdict(&t, &[]), Category::Match);
        assert_eq!(verdict(&t, &["a"]), Category::Violation);

        // syntactically non-empty but semantically empty
        let t = compile_ere("a & b", &ab).unwrap();
        assert_eq!(verdict(&t, &[]), Category::Violation);
    }

    #[test]
    fn operators() {
        let ab = Alphabet::new(["a", "b"]);
        let t = compile_ere("a+ b?", &ab).unwrap();
        assert_eq!(verdict(&t, &["a"]), Category::Match);
        assert_eq!(verdict(&t, &["a", "a", "b"]), Category::Match);
        assert_eq!(verdict(&t, &["b"]), Category::Violation);
        let t = compile_ere("epsilon | empty", &ab).unwrap();
        assert_eq!(verdict(&t, &[]), Category::Match);
    }

    #[test]
    fn errors() {
        let ab = Alphabet::new(["a"]);
        assert_eq!(compile_ere("a b", &ab).unwrap_err(), SynthError::UnknownEvent("b".into()));
        assert!(matches!(compile_ere("(a", &ab).unwrap_err(), SynthError::Syntax { .. }));
        assert!(matches!(compile_ere("a |", &ab).unwrap_err(), SynthError::Syntax { .. }));
        assert!(matches!(compile_ere("", &ab).unwrap_err(), SynthError::Syntax { .. }));
    }
}
