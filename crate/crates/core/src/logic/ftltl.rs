// SPDX-License-Identifier: Apache-2.0

//! Future-time LTL over finite traces.
//!
//! Each trace position carries exactly one event, so an atomic proposition
//! `e` holds iff the current event is `e`. A formula is evaluated on a word
//! where position `|w|` (the empty suffix) is also a valid position: atoms
//! and `X` are false there, `φ U ψ`, `[] φ`, `<> φ` reduce to their
//! argument.
//!
//! Monitor states are residual obligations obtained by progression, kept in
//! a canonical disjunctive normal form over temporal literals so the state
//! space is finite. A state is `Match` when every continuation satisfies
//! the formula, `Violation` when none does.
//!
//! Syntax: `true false ! not && and /\ || or \/ => -> <=> <-> X next
//! [] always <> eventually U until ( )`.

use std::collections::{BTreeSet, HashMap};

use super::lexer::{tokenize, Cursor, Tok};
use super::{can_reach, explore, Alphabet, Category, EventId, MonitorTemplate, SynthError};

type FId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Ltl {
    True,
    False,
    Prop(EventId),
    Not(FId),
    And(FId, FId),
    Or(FId, FId),
    Next(FId),
    Until(FId, FId),
    Always(FId),
    Eventually(FId),
}

#[derive(Default)]
struct LtlArena {
    nodes: Vec<Ltl>,
    ids: HashMap<Ltl, FId>,
}

impl LtlArena {
    fn intern(&mut self, f: Ltl) -> FId {
        if let Some(&id) = self.ids.get(&f) {
            return id;
        }
        let id = self.nodes.len() as FId;
        self.nodes.push(f.clone());
        self.ids.insert(f, id);
        id
    }

    fn node(&self, id: FId) -> &Ltl {
        &self.nodes[id as usize]
    }
}

const SYMBOLS: &[&str] = &[
    "(", ")", "!", "[]", "<>", "&&", "||", "/\\", "\\/", "=>", "->", "<=>", "<->",
];

struct LtlParser<'a, 'b> {
    cur: Cursor<'a>,
    arena: &'b mut LtlArena,
    events: &'b Alphabet,
}

impl LtlParser<'_, '_> {
    fn parse(mut self) -> Result<FId, SynthError> {
        let f = self.iff()?;
        self.cur.expect_end()?;
        Ok(f)
    }

    fn not(&mut self, f: FId) -> FId {
        self.arena.intern(Ltl::Not(f))
    }

    fn iff(&mut self) -> Result<FId, SynthError> {
        let lhs = self.implies()?;
        if self.cur.eat_sym("<=>") || self.cur.eat_sym("<->") {
            let rhs = self.iff()?;
            let both = self.arena.intern(Ltl::And(lhs, rhs));
            let (nl, nr) = (self.not(lhs), self.not(rhs));
            let neither = self.arena.intern(Ltl::And(nl, nr));
            return Ok(self.arena.intern(Ltl::Or(both, neither)));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<FId, SynthError> {
        let lhs = self.or()?;
        if self.cur.eat_sym("=>") || self.cur.eat_sym("->") {
            let rhs = self.implies()?;
            let nl = self.not(lhs);
            return Ok(self.arena.intern(Ltl::Or(nl, rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<FId, SynthError> {
        let mut lhs = self.and()?;
        while self.cur.eat_sym("||") || self.cur.eat_sym("\\/") || self.cur.eat_keyword("or") {
            let rhs = self.and()?;
            lhs = self.arena.intern(Ltl::Or(lhs, rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<FId, SynthError> {
        let mut lhs = self.binary_temporal()?;
        while self.cur.eat_sym("&&") || self.cur.eat_sym("/\\") || self.cur.eat_keyword("and") {
            let rhs = self.binary_temporal()?;
            lhs = self.arena.intern(Ltl::And(lhs, rhs));
        }
        Ok(lhs)
    }

    fn binary_temporal(&mut self) -> Result<FId, SynthError> {
        let lhs = self.unary()?;
        if self.cur.eat_keyword("U") || self.cur.eat_keyword("until") {
            let rhs = self.binary_temporal()?;
            return Ok(self.arena.intern(Ltl::Until(lhs, rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FId, SynthError> {
        if self.cur.eat_sym("!") || self.cur.eat_keyword("not") {
            let f = self.unary()?;
            return Ok(self.not(f));
        }
        if self.cur.eat_sym("[]") || self.cur.eat_keyword("always") {
            let f = self.unary()?;
            return Ok(self.arena.intern(Ltl::Always(f)));
        }
        if self.cur.eat_sym("<>") || self.cur.eat_keyword("eventually") {
            let f = self.unary()?;
            return Ok(self.arena.intern(Ltl::Eventually(f)));
        }
        if self.cur.eat_keyword("X") || self.cur.eat_keyword("next") {
            let f = self.unary()?;
            return Ok(self.arena.intern(Ltl::Next(f)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<FId, SynthError> {
        if self.cur.eat_sym("(") {
            let f = self.iff()?;
            self.cur.expect_sym(")")?;
            return Ok(f);
        }
        let name = self.cur.expect_ident()?;
        match name {
            "true" => Ok(self.arena.intern(Ltl::True)),
            "false" => Ok(self.arena.intern(Ltl::False)),
            _ if is_keyword(name) => Err(self.cur.error(format!("unexpected keyword `{name}`"))),
            _ => {
                let e = self
                    .events
                    .id(name)
                    .ok_or_else(|| SynthError::UnknownEvent(name.to_string()))?;
                Ok(self.arena.intern(Ltl::Prop(e)))
            }
        }
    }
}

fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "not" | "and" | "or" | "X" | "next" | "U" | "until" | "always" | "eventually"
    )
}

/// A literal: a temporal (or atomic) formula, positive or negated.
type Lit = (FId, bool);
type Clause = BTreeSet<Lit>;
/// Canonical DNF: a set of clauses, none containing a complementary pair,
/// none a superset of another.
type Dnf = BTreeSet<Clause>;

fn dnf_const(value: bool) -> Dnf {
    if value {
        BTreeSet::from([Clause::new()])
    } else {
        Dnf::new()
    }
}

fn dnf_lit(lit: Lit) -> Dnf {
    BTreeSet::from([BTreeSet::from([lit])])
}

fn absorb(clauses: impl IntoIterator<Item = Clause>) -> Dnf {
    let mut sorted: Vec<Clause> = clauses.into_iter().collect();
    sorted.sort_by_key(|c| c.len());
    let mut kept: Vec<Clause> = Vec::new();
    for clause in sorted {
        if !kept.iter().any(|k| k.is_subset(&clause)) {
            kept.push(clause);
        }
    }
    kept.into_iter().collect()
}

fn dnf_or(a: Dnf, b: Dnf) -> Dnf {
    absorb(a.into_iter().chain(b))
}

fn dnf_and(a: &Dnf, b: &Dnf) -> Dnf {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            let merged: Clause = x.union(y).copied().collect();
            if !merged.iter().any(|&(f, pos)| merged.contains(&(f, !pos))) {
                out.push(merged);
            }
        }
    }
    absorb(out)
}

fn dnf_not(d: &Dnf) -> Dnf {
    let mut acc = dnf_const(true);
    for clause in d {
        let negated: Dnf = absorb(clause.iter().map(|&(f, pos)| BTreeSet::from([(f, !pos)])));
        acc = dnf_and(&acc, &negated);
        if acc.is_empty() {
            break;
        }
    }
    acc
}

struct Progression<'a> {
    arena: &'a LtlArena,
    cache: HashMap<(FId, EventId), Dnf>,
}

impl Progression<'_> {
    fn dnf(&self, f: FId) -> Dnf {
        match *self.arena.node(f) {
            Ltl::True => dnf_const(true),
            Ltl::False => dnf_const(false),
            Ltl::Not(g) => dnf_not(&self.dnf(g)),
            Ltl::And(g, h) => dnf_and(&self.dnf(g), &self.dnf(h)),
            Ltl::Or(g, h) => dnf_or(self.dnf(g), self.dnf(h)),
            _ => dnf_lit((f, true)),
        }
    }

    fn prog(&mut self, f: FId, e: EventId) -> Dnf {
        if let Some(d) = self.cache.get(&(f, e)) {
            return d.clone();
        }
        let d = match *self.arena.node(f) {
            Ltl::True => dnf_const(true),
            Ltl::False => dnf_const(false),
            Ltl::Prop(p) => dnf_const(p == e),
            Ltl::Not(g) => dnf_not(&self.prog(g, e)),
            Ltl::And(g, h) => dnf_and(&self.prog(g, e), &self.prog(h, e)),
            Ltl::Or(g, h) => dnf_or(self.prog(g, e), self.prog(h, e)),
            Ltl::Next(g) => self.dnf(g),
            Ltl::Until(g, h) => {
                let now = dnf_and(&self.prog(g, e), &dnf_lit((f, true)));
                dnf_or(self.prog(h, e), now)
            }
            Ltl::Always(g) => dnf_and(&self.prog(g, e), &dnf_lit((f, true))),
            Ltl::Eventually(g) => dnf_or(self.prog(g, e), dnf_lit((f, true))),
        };
        self.cache.insert((f, e), d.clone());
        d
    }

    fn prog_state(&mut self, state: &Dnf, e: EventId) -> Dnf {
        let mut out = dnf_const(false);
        for clause in state {
            let mut acc = dnf_const(true);
            for &(f, pos) in clause {
                let p = self.prog(f, e);
                let p = if pos { p } else { dnf_not(&p) };
                acc = dnf_and(&acc, &p);
                if acc.is_empty() {
                    break;
                }
            }
            out = dnf_or(out, acc);
        }
        out
    }

    /// Truth on the empty suffix.
    fn at_end(&self, f: FId) -> bool {
        match *self.arena.node(f) {
            Ltl::True => true,
            Ltl::False | Ltl::Prop(_) | Ltl::Next(_) => false,
            Ltl::Not(g) => !self.at_end(g),
            Ltl::And(g, h) => self.at_end(g) && self.at_end(h),
            Ltl::Or(g, h) => self.at_end(g) || self.at_end(h),
            Ltl::Until(_, h) => self.at_end(h),
            Ltl::Always(g) | Ltl::Eventually(g) => self.at_end(g),
        }
    }

    fn state_at_end(&self, state: &Dnf) -> bool {
        state
            .iter()
            .any(|clause| clause.iter().all(|&(f, pos)| self.at_end(f) == pos))
    }
}

fn render_state(arena: &LtlArena, state: &Dnf, events: &Alphabet) -> String {
    if state.is_empty() {
        return "false".into();
    }
    state
        .iter()
        .map(|clause| {
            if clause.is_empty() {
                return "true".to_string();
            }
            clause
                .iter()
                .map(|&(f, pos)| {
                    let body = render(arena, f, events);
                    if pos {
                        body
                    } else {
                        format!("!{body}")
                    }
                })
                .collect::<Vec<_>>()
                .join(" && ")
        })
        .collect::<Vec<_>>()
        .join(" || ")
}

fn render(arena: &LtlArena, f: FId, events: &Alphabet) -> String {
    let r = |g| render(arena, g, events);
    match *arena.node(f) {
        Ltl::True => "true".into(),
        Ltl::False => "false".into(),
        Ltl::Prop(e) => events.name(e).to_string(),
        Ltl::Not(g) => format!("!{}", r(g)),
        Ltl::And(g, h) => format!("({} && {})", r(g), r(h)),
        Ltl::Or(g, h) => format!("({} || {})", r(g), r(h)),
        Ltl::Next(g) => format!("X {}", r(g)),
        Ltl::Until(g, h) => format!("({} U {})", r(g), r(h)),
        Ltl::Always(g) => format!("[] {}", r(g)),
        Ltl::Eventually(g) => format!("<> {}", r(g)),
    }
}

/// Compiles a future-time LTL formula over `events` into a three-valued
/// finite-trace monitor.
pub fn compile_ftltl(formula: &str, events: &Alphabet) -> Result<MonitorTemplate, SynthError> {
    let mut arena = LtlArena::default();
    let root = LtlParser {
        cur: Cursor::new(tokenize(formula, SYMBOLS)?, formula.len()),
        arena: &mut arena,
        events,
    }
    .parse()?;
    let mut progression = Progression {
        arena: &arena,
        cache: HashMap::new(),
    };
    let initial = progression.dnf(root);
    let (keys, table) = explore(initial, events.len(), |state, e| progression.prog_state(state, e))?;
    let accepting: Vec<bool> = keys.iter().map(|k| progression.state_at_end(k)).collect();
    let rejecting: Vec<bool> = accepting.iter().map(|a| !a).collect();
    let may_accept = can_reach(&table, &accepting);
    let may_reject = can_reach(&table, &rejecting);
    let categories = (0..keys.len())
        .map(|i| match (may_accept[i], may_reject[i]) {
            (false, _) => Category::Violation,
            (true, false) => Category::Match,
            (true, true) => Category::Undetermined,
        })
        .collect();
    let names = keys
        .iter()
        .enumerate()
        .map(|(i, k)| format!("q{i} <{}>", render_state(&arena, k, events)))
        .collect();
    Ok(MonitorTemplate::from_parts(events.clone(), names, table, categories, 0))
}

/// Event names used in a formula, for cross-reference validation.
pub fn referenced_events(formula: &str) -> Result<Vec<String>, SynthError> {
    Ok(tokenize(formula, SYMBOLS)?
        .into_iter()
        .filter_map(|t| match t.tok {
            Tok::Ident(name) if !is_keyword(name) && name != "true" && name != "false" => Some(name.to_string()),
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdicts(t: &MonitorTemplate, word: &[&str]) -> Vec<Category> {
        let mut s = t.initial();
        word.iter()
            .map(|e| {
                let (n, c) = t.step(s, e).unwrap();
                s = n;
                c.clone()
            })
            .collect()
    }

    #[test]
    fn always_not() {
        let t = compile_ftltl("[] !b", &Alphabet::new(["a", "b"])).unwrap();
        assert_eq!(
            verdicts(&t, &["a", "a", "b", "a"]),
            vec![
                Category::Undetermined,
                Category::Undetermined,
                Category::Violation,
                Category::Violation
            ]
        );
    }

    #[test]
    fn eventually() {
        let t = compile_ftltl("<> a", &Alphabet::new(["a", "b"])).unwrap();
        assert_eq!(
            verdicts(&t, &["b", "a", "b"]),
            vec![Category::Undetermined, Category::Match, Category::Match]
        );
    }

    #[test]
    fn response() {
        let t = compile_ftltl("[](a => X b)", &Alphabet::new(["a", "b"])).unwrap();
        assert_eq!(
            verdicts(&t, &["a", "a"]),
            vec![Category::Undetermined, Category::Violation]
        );
        assert_eq!(
            verdicts(&t, &["a", "b", "b"]),
            vec![Category::Undetermined; 3]
        );
    }

    #[test]
    fn semantic_tautology_is_match() {
        // valid but never syntactically `true` under progression alone
        let t = compile_ftltl("<> a || [] !a", &Alphabet::new(["a", "b"])).unwrap();
        assert_eq!(t.category(t.initial()), &Category::Match);
    }

    #[test]
    fn until_and_errors() {
        let ab = Alphabet::new(["a", "b"]);
        let t = compile_ftltl("a U b", &ab).unwrap();
        assert_eq!(verdicts(&t, &["a", "a", "b"]).last(), Some(&Category::Match));
        assert_eq!(verdicts(&t, &["a", "b"]).first(), Some(&Category::Undetermined));
        assert_eq!(verdicts(&t, &["b"]), vec![Category::Match]);
        assert_eq!(compile_ftltl("[] c", &ab).unwrap_err(), SynthError::UnknownEvent("c".into()));
        assert!(matches!(compile_ftltl("[] (a", &ab).unwrap_err(), SynthError::Syntax { .. }));
        assert!(matches!(compile_ftltl("a U", &ab).unwrap_err(), SynthError::Syntax { .. }));
    }
}
