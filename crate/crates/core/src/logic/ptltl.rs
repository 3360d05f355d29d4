// SPDX-License-Identifier: Apache-2.0

//! Past-time LTL.
//!
//! The monitor state is the vector of truth values of every subformula at
//! the last position seen. Before the first event no value is defined and
//! the state is `Undetermined`; afterwards the state is `Match` when the
//! formula holds at the current position and `Violation` otherwise.
//!
//! Operators: `(*)`/`previously`, `[*]`/`historically`, `<*>`/`once`,
//! `S`/`since`, plus `! not && and || or => -> <=> <->` and `true false`.
//! A single leading `[]` is accepted and ignored: the verdict is already
//! re-evaluated at every event.

use std::collections::HashMap;

use super::lexer::{tokenize, Cursor, Tok};
use super::{explore, Alphabet, Category, EventId, MonitorTemplate, SynthError};

const SYMBOLS: &[&str] = &[
    "(", ")", "(*)", "[*]", "<*>", "[]", "!", "&&", "||", "=>", "->", "<=>", "<->",
];

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Past {
    Const(bool),
    Atom(EventId),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Previously(usize),
    Historically(usize),
    Once(usize),
    Since(usize, usize),
}

/// Subformulas in topological order: children precede parents.
#[derive(Default)]
struct Formula {
    nodes: Vec<Past>,
    ids: HashMap<Past, usize>,
}

impl Formula {
    fn add(&mut self, p: Past) -> usize {
        if let Some(&id) = self.ids.get(&p) {
            return id;
        }
        self.nodes.push(p.clone());
        self.ids.insert(p, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Truth values at a new position holding `event`, given the values at
    /// the previous position (`None` at the first position).
    fn update(&self, prev: Option<&[bool]>, event: EventId) -> Vec<bool> {
        let mut now = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            let before = |j: usize| prev.is_some_and(|p| p[j]);
            now[i] = match *node {
                Past::Const(b) => b,
                Past::Atom(a) => a == event,
                Past::Not(a) => !now[a],
                Past::And(a, b) => now[a] && now[b],
                Past::Or(a, b) => now[a] || now[b],
                Past::Previously(a) => before(a),
                Past::Historically(a) => now[a] && (prev.is_none() || before(i)),
                Past::Once(a) => now[a] || before(i),
                Past::Since(a, b) => now[b] || (now[a] && before(i)),
            };
        }
        now
    }
}

fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "not" | "and" | "or" | "previously" | "historically" | "once" | "S" | "since" | "true" | "false"
    )
}

struct Parser<'a, 'b> {
    cur: Cursor<'a>,
    f: &'b mut Formula,
    events: &'b Alphabet,
}

impl Parser<'_, '_> {
    fn iff(&mut self) -> Result<usize, SynthError> {
        let lhs = self.implies()?;
        if self.cur.eat_sym("<=>") || self.cur.eat_sym("<->") {
            let rhs = self.iff()?;
            let both = self.f.add(Past::And(lhs, rhs));
            let nl = self.f.add(Past::Not(lhs));
            let nr = self.f.add(Past::Not(rhs));
            let neither = self.f.add(Past::And(nl, nr));
            return Ok(self.f.add(Past::Or(both, neither)));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<usize, SynthError> {
        let lhs = self.or()?;
        if self.cur.eat_sym("=>") || self.cur.eat_sym("->") {
            let rhs = self.implies()?;
            let nl = self.f.add(Past::Not(lhs));
            return Ok(self.f.add(Past::Or(nl, rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<usize, SynthError> {
        let mut lhs = self.and()?;
        while self.cur.eat_sym("||") || self.cur.eat_keyword("or") {
            let rhs = self.and()?;
            lhs = self.f.add(Past::Or(lhs, rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<usize, SynthError> {
        let mut lhs = self.since()?;
        while self.cur.eat_sym("&&") || self.cur.eat_keyword("and") {
            let rhs = self.since()?;
            lhs = self.f.add(Past::And(lhs, rhs));
        }
        Ok(lhs)
    }

    fn since(&mut self) -> Result<usize, SynthError> {
        let lhs = self.unary()?;
        if self.cur.eat_keyword("S") || self.cur.eat_keyword("since") {
            let rhs = self.since()?;
            return Ok(self.f.add(Past::Since(lhs, rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<usize, SynthError> {
        let op: Option<fn(usize) -> Past> = if self.cur.eat_sym("!") || self.cur.eat_keyword("not") {
            Some(Past::Not)
        } else if self.cur.eat_sym("(*)") || self.cur.eat_keyword("previously") {
            Some(Past::Previously)
        } else if self.cur.eat_sym("[*]") || self.cur.eat_keyword("historically") {
            Some(Past::Historically)
        } else if self.cur.eat_sym("<*>") || self.cur.eat_keyword("once") {
            Some(Past::Once)
        } else {
            None
        };
        match op {
            Some(op) => {
                let inner = self.unary()?;
                Ok(self.f.add(op(inner)))
            }
            None => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<usize, SynthError> {
        if self.cur.eat_sym("(") {
            let inner = self.iff()?;
            self.cur.expect_sym(")")?;
            return Ok(inner);
        }
        let name = self.cur.expect_ident()?;
        match name {
            "true" => Ok(self.f.add(Past::Const(true))),
            "false" => Ok(self.f.add(Past::Const(false))),
            _ if is_keyword(name) => Err(self.cur.error(format!("unexpected keyword `{name}`"))),
            _ => {
                let e = self
                    .events
                    .id(name)
                    .ok_or_else(|| SynthError::UnknownEvent(name.to_string()))?;
                Ok(self.f.add(Past::Atom(e)))
            }
        }
    }
}

/// Compiles a past-time LTL formula over `events`.
pub fn compile_ptltl(formula: &str, events: &Alphabet) -> Result<MonitorTemplate, SynthError> {
    let mut f = Formula::default();
    let mut cur = Cursor::new(tokenize(formula, SYMBOLS)?, formula.len());
    cur.eat_sym("[]");
    let top = {
        let mut p = Parser {
            cur,
            f: &mut f,
            events,
        };
        let top = p.iff()?;
        p.cur.expect_end()?;
        top
    };
    let (keys, table) = explore(None::<Vec<bool>>, events.len(), |state, e| {
        Some(f.update(state.as_deref(), e))
    })?;
    let categories = keys
        .iter()
        .map(|k| match k {
            None => Category::Undetermined,
            Some(bits) if bits[top] => Category::Match,
            Some(_) => Category::Violation,
        })
        .collect();
    let names = keys
        .iter()
        .enumerate()
        .map(|(i, k)| match k {
            None => format!("q{i} <start>"),
            Some(bits) => {
                let bits: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
                format!("q{i} <{bits}>")
            }
        })
        .collect();
    Ok(MonitorTemplate::from_parts(events.clone(), names, table, categories, 0))
}

/// Event names used in a formula, for cross-reference validation.
pub fn referenced_events(formula: &str) -> Result<Vec<String>, SynthError> {
    Ok(tokenize(formula, SYMBOLS)?
        .into_iter()
        .filter_map(|t| match t.tok {
            Tok::Ident(name) if !is_keyword(name) => Some(name.to_string()),
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdicts(formula: &str, events: &[&str], word: &[&str]) -> Vec<Category> {
        let t = compile_ptltl(formula, &Alphabet::new(events)).unwrap();
        let mut s = t.initial();
        word.iter()
            .map(|e| {
                let (n, c) = t.step(s, e).unwrap();
                s = n;
                c.clone()
            })
            .collect()
    }

    use Category::{Match as M, Violation as V};

    #[test]
    fn historically_not() {
        assert_eq!(verdicts("historically !b", &["a", "b"], &["a", "b", "a"]), vec![M, V, V]);
    }

    #[test]
    fn previously_at_origin_is_false() {
        assert_eq!(verdicts("b => previously a", &["a", "b"], &["b"]), vec![V]);
        assert_eq!(verdicts("b => (*) a", &["a", "b"], &["a", "b", "b"]), vec![M, M, V]);
    }

    #[test]
    fn since() {
        assert_eq!(verdicts("a since b", &["a", "b"], &["b", "a", "a"]), vec![M, M, M]);
        assert_eq!(verdicts("a S b", &["a", "b"], &["a", "b"]), vec![V, M]);
    }

    #[test]
    fn sort_before_search() {
        let f = "[](binsearch => (*)(!modify S sort))";
        let ev = ["sort", "modify", "binsearch"];
        assert_eq!(verdicts(f, &ev, &["sort", "binsearch"]), vec![M, M]);
        assert_eq!(verdicts(f, &ev, &["sort", "modify", "binsearch"]), vec![M, M, V]);
        assert_eq!(verdicts(f, &ev, &["binsearch"]), vec![V]);
    }

    #[test]
    fn initial_state_is_undetermined() {
        let t = compile_ptltl("once a", &Alphabet::new(["a"])).unwrap();
        assert_eq!(t.category(t.initial()), &Category::Undetermined);
    }

    #[test]
    fn errors_and_references() {
        let ab = Alphabet::new(["a"]);
        assert_eq!(compile_ptltl("once c", &ab).unwrap_err(), SynthError::UnknownEvent("c".into()));
        assert!(matches!(compile_ptltl("a S", &ab).unwrap_err(), SynthError::Syntax { .. }));
        assert_eq!(
            referenced_events("[](binsearch => (*)(!modify S sort))").unwrap(),
            vec!["binsearch", "modify", "sort"]
        );
    }
}
