// SPDX-License-Identifier: Apache-2.0

//! Context-free monitors by grammar derivatives.
//!
//! ```text
//! S -> a S b | epsilon
//! ```
//!
//! Rules are separated by newlines or `;`, alternatives by `|`. The
//! left-hand side of the first rule is the start symbol. Identifiers that
//! never appear on a left-hand side are terminals and must be events;
//! `epsilon` (or `ε`) is the empty sequence.
//!
//! A monitor state is a node of a shared grammar graph. Stepping takes the
//! derivative of the node with respect to the event and compacts the
//! result. Nonterminals are forwarding nodes, so recursion (left recursion
//! included) shows up as cycles; nullability and productivity are least
//! fixpoints over those cycles.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Mutex;

use super::lexer::{tokenize, Cursor, Tok};
use super::{Alphabet, Category, EventId, StateId, SynthError};

const SYMBOLS: &[&str] = &["->", "::=", "|", ";", "ε"];

/// Symbol on a rule's right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Terminal(EventId),
    Nonterminal(usize),
}

/// A parsed grammar. Nonterminal 0 is the start symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    pub nonterminals: Vec<String>,
    /// `(lhs, rhs)` pairs; an empty rhs derives the empty word.
    pub rules: Vec<(usize, Vec<Symbol>)>,
}

impl Grammar {
    pub fn parse(src: &str, events: &Alphabet) -> Result<Grammar, SynthError> {
        let tokens = tokenize(src, SYMBOLS)?;
        // Rule heads: an identifier followed by an arrow.
        let is_arrow = |t: Option<&Tok>| matches!(t, Some(Tok::Sym("->")) | Some(Tok::Sym("::=")));
        let mut heads: Vec<&str> = Vec::new();
        for w in tokens.windows(2) {
            if let Tok::Ident(name) = w[0].tok {
                if is_arrow(Some(&w[1].tok)) && !heads.contains(&name) {
                    heads.push(name);
                }
            }
        }
        if heads.is_empty() {
            return Err(SynthError::syntax(0, "grammar declares no rules"));
        }
        let index: HashMap<&str, usize> = heads.iter().enumerate().map(|(i, h)| (*h, i)).collect();

        let mut cur = Cursor::new(tokens, src.len());
        let mut rules = Vec::new();
        while !cur.at_end() {
            if cur.eat_sym(";") {
                continue;
            }
            let lhs = index[cur.expect_ident()?];
            if !(cur.eat_sym("->") || cur.eat_sym("::=")) {
                return Err(cur.error("expected `->`"));
            }
            let mut rhs = Vec::new();
            loop {
                match cur.peek() {
                    Some(Tok::Ident(_)) if is_arrow(cur.peek_at(1)) => break,
                    Some(Tok::Ident(name)) => {
                        let name = *name;
                        cur.bump();
                        if name == "epsilon" {
                            continue;
                        }
                        let sym = match index.get(name) {
                            Some(&n) => Symbol::Nonterminal(n),
                            None => Symbol::Terminal(
                                events
                                    .id(name)
                                    .ok_or_else(|| SynthError::UnknownEvent(name.to_string()))?,
                            ),
                        };
                        rhs.push(sym);
                    }
                    Some(Tok::Sym("ε")) => {
                        cur.bump();
                    }
                    Some(Tok::Sym("|")) => {
                        cur.bump();
                        rules.push((lhs, std::mem::take(&mut rhs)));
                    }
                    Some(Tok::Sym(";")) | None => break,
                    Some(_) => return Err(cur.error("unexpected symbol in rule body")),
                }
            }
            rules.push((lhs, rhs));
        }
        Ok(Grammar {
            nonterminals: heads.iter().map(|h| h.to_string()).collect(),
            rules,
        })
    }

    /// Terminals that occur in some rule.
    pub fn terminals(&self) -> BTreeSet<EventId> {
        self.rules
            .iter()
            .flat_map(|(_, rhs)| rhs.iter())
            .filter_map(|s| match s {
                Symbol::Terminal(t) => Some(*t),
                Symbol::Nonterminal(_) => None,
            })
            .collect()
    }

    fn render(&self, events: &Alphabet) -> String {
        let mut out = String::new();
        for (lhs, rhs) in &self.rules {
            let body: Vec<&str> = rhs
                .iter()
                .map(|s| match s {
                    Symbol::Terminal(t) => events.name(*t),
                    Symbol::Nonterminal(n) => &self.nonterminals[*n],
                })
                .collect();
            let body = if body.is_empty() { "epsilon".to_string() } else { body.join(" ") };
            let _ = writeln!(out, "rule {} -> {}", self.nonterminals[*lhs], body);
        }
        out
    }
}

type NodeId = u32;
const EMPTY: NodeId = 0;
const EPS: NodeId = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Empty,
    Eps,
    Term(EventId),
    Alt(NodeId, NodeId),
    Cat(NodeId, NodeId),
    /// Forwarding node for nonterminals and cyclic derivatives; the target
    /// is filled in once computed.
    Fwd(Option<NodeId>),
}

struct Graph {
    nodes: Vec<Node>,
    consed: HashMap<Node, NodeId>,
    derivs: HashMap<(NodeId, EventId), NodeId>,
    compacted: HashMap<NodeId, NodeId>,
    canonical: Vec<bool>,
    /// Placeholders handed out during the compaction in progress.
    touched: Vec<bool>,
    nullable: Vec<Option<bool>>,
    productive: Vec<Option<bool>>,
    steps: HashMap<(StateId, EventId), StateId>,
}

impl Graph {
    fn new() -> Self {
        let mut g = Graph {
            nodes: Vec::new(),
            consed: HashMap::new(),
            derivs: HashMap::new(),
            compacted: HashMap::new(),
            canonical: Vec::new(),
            touched: Vec::new(),
            nullable: Vec::new(),
            productive: Vec::new(),
            steps: HashMap::new(),
        };
        g.cons(Node::Empty);
        g.cons(Node::Eps);
        g.canonical[EMPTY as usize] = true;
        g.canonical[EPS as usize] = true;
        g
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.canonical.push(false);
        self.touched.push(false);
        self.nullable.push(None);
        self.productive.push(None);
        (self.nodes.len() - 1) as NodeId
    }

    fn cons(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.consed.get(&node) {
            return id;
        }
        let id = self.push(node);
        self.consed.insert(node, id);
        id
    }

    fn node(&self, id: NodeId) -> Node {
        self.nodes[id as usize]
    }

    fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> {
        let (a, b) = match self.node(id) {
            Node::Alt(a, b) | Node::Cat(a, b) => (Some(a), Some(b)),
            Node::Fwd(t) => (t, None),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }

    /// Least fixpoint of a monotone node property over the uncached part
    /// of the graph reachable from `root`.
    fn fixpoint(&mut self, root: NodeId, nullable: bool) -> bool {
        let cached = |g: &Graph, n: NodeId| {
            if nullable {
                g.nullable[n as usize]
            } else {
                g.productive[n as usize]
            }
        };
        if let Some(v) = cached(self, root) {
            return v;
        }
        let mut region = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if cached(self, n).is_some() || !seen.insert(n) {
                continue;
            }
            region.push(n);
            stack.extend(self.children(n));
        }
        let mut value: HashMap<NodeId, bool> = region.iter().map(|&n| (n, false)).collect();
        let get = |value: &HashMap<NodeId, bool>, g: &Graph, n: NodeId| {
            value.get(&n).copied().or_else(|| cached(g, n)).unwrap_or(false)
        };
        loop {
            let mut changed = false;
            for &n in &region {
                if value[&n] {
                    continue;
                }
                let v = match self.node(n) {
                    Node::Empty => false,
                    Node::Eps => true,
                    Node::Term(_) => !nullable,
                    Node::Alt(a, b) => get(&value, self, a) || get(&value, self, b),
                    Node::Cat(a, b) => get(&value, self, a) && get(&value, self, b),
                    Node::Fwd(t) => t.is_some_and(|t| get(&value, self, t)),
                };
                if v {
                    value.insert(n, true);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (n, v) in value {
            if nullable {
                self.nullable[n as usize] = Some(v);
            } else {
                self.productive[n as usize] = Some(v);
            }
        }
        cached(self, root).unwrap_or(false)
    }

    fn derive(&mut self, n: NodeId, e: EventId) -> NodeId {
        if let Some(&d) = self.derivs.get(&(n, e)) {
            return d;
        }
        let d = match self.node(n) {
            Node::Empty | Node::Eps => EMPTY,
            Node::Term(t) => {
                if t == e {
                    EPS
                } else {
                    EMPTY
                }
            }
            Node::Alt(a, b) => {
                let (da, db) = (self.derive(a, e), self.derive(b, e));
                self.cons(Node::Alt(da, db))
            }
            Node::Cat(a, b) => {
                let da = self.derive(a, e);
                let left = self.cons(Node::Cat(da, b));
                if self.fixpoint(a, true) {
                    let db = self.derive(b, e);
                    self.cons(Node::Alt(left, db))
                } else {
                    left
                }
            }
            Node::Fwd(target) => {
                let p = self.push(Node::Fwd(None));
                self.derivs.insert((n, e), p);
                let target = target.expect("derivative of an incomplete node");
                let d = self.derive(target, e);
                self.nodes[p as usize] = Node::Fwd(Some(d));
                p
            }
        };
        self.derivs.insert((n, e), d);
        d
    }

    /// Rebuilds the graph under `n` without unproductive branches, `ε`
    /// units or needless forwarding. The result is canonical.
    fn compact(&mut self, n: NodeId) -> NodeId {
        if self.canonical[n as usize] {
            return n;
        }
        if let Some(&c) = self.compacted.get(&n) {
            if let Node::Fwd(None) = self.node(c) {
                self.touched[c as usize] = true;
            }
            return c;
        }
        if !self.fixpoint(n, false) {
            self.compacted.insert(n, EMPTY);
            return EMPTY;
        }
        let c = match self.node(n) {
            Node::Empty => EMPTY,
            Node::Eps => EPS,
            Node::Term(_) => self.cons(self.node(n)),
            Node::Alt(a, b) => {
                let (a, b) = (self.compact(a), self.compact(b));
                if a == EMPTY || a == b {
                    b
                } else if b == EMPTY {
                    a
                } else {
                    self.cons(Node::Alt(a.min(b), a.max(b)))
                }
            }
            Node::Cat(a, b) => {
                let (a, b) = (self.compact(a), self.compact(b));
                if a == EMPTY || b == EMPTY {
                    EMPTY
                } else if a == EPS {
                    b
                } else if b == EPS {
                    a
                } else {
                    self.cons(Node::Cat(a, b))
                }
            }
            Node::Fwd(target) => {
                let p = self.push(Node::Fwd(None));
                self.compacted.insert(n, p);
                let t = self.compact(target.expect("compaction of an incomplete node"));
                if self.touched[p as usize] {
                    self.nodes[p as usize] = Node::Fwd(Some(t));
                    self.canonical[p as usize] = true;
                    p
                } else {
                    t
                }
            }
        };
        self.canonical[c as usize] = true;
        self.compacted.insert(n, c);
        c
    }
}

/// Grammar-derivative monitor template.
///
/// States are produced on demand; stepping is memoized, so repeated
/// `(state, event)` pairs are table lookups.
pub struct DerivativeTemplate {
    alphabet: Alphabet,
    grammar: Grammar,
    initial: StateId,
    keep: Option<BTreeSet<Category>>,
    graph: Mutex<Graph>,
}

impl fmt::Debug for DerivativeTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DerivativeTemplate")
            .field("alphabet", &self.alphabet)
            .field("grammar", &self.grammar)
            .finish_non_exhaustive()
    }
}

/// Compiles a grammar over `events` into a derivative template.
pub fn compile_cfg(grammar: &str, events: &Alphabet) -> Result<DerivativeTemplate, SynthError> {
    let grammar = Grammar::parse(grammar, events)?;
    let mut g = Graph::new();
    let fwd: Vec<NodeId> = grammar.nonterminals.iter().map(|_| g.push(Node::Fwd(None))).collect();
    let mut bodies: Vec<NodeId> = vec![EMPTY; fwd.len()];
    for (lhs, rhs) in &grammar.rules {
        let seq = rhs.iter().rev().fold(EPS, |tail, sym| {
            let head = match *sym {
                Symbol::Terminal(t) => g.cons(Node::Term(t)),
                Symbol::Nonterminal(n) => fwd[n],
            };
            if tail == EPS {
                head
            } else {
                g.cons(Node::Cat(head, tail))
            }
        });
        bodies[*lhs] = if bodies[*lhs] == EMPTY {
            seq
        } else {
            g.cons(Node::Alt(bodies[*lhs], seq))
        };
    }
    for (f, body) in fwd.iter().zip(&bodies) {
        g.nodes[*f as usize] = Node::Fwd(Some(*body));
    }
    let initial = g.compact(fwd[0]);
    Ok(DerivativeTemplate {
        alphabet: events.clone(),
        grammar,
        initial,
        keep: None,
        graph: Mutex::new(g),
    })
}

impl DerivativeTemplate {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    /// Derivative of `state` by `event`, compacted.
    pub fn next(&self, state: StateId, event: EventId) -> StateId {
        let mut g = self.graph.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(&s) = g.steps.get(&(state, event)) {
            return s;
        }
        let d = g.derive(state, event);
        let s = g.compact(d);
        g.steps.insert((state, event), s);
        s
    }

    /// `Match` iff the consumed word is in the language, `Violation` iff no
    /// extension of it is.
    pub fn category(&self, state: StateId) -> Category {
        let category = if state == EMPTY {
            Category::Violation
        } else if self.graph.lock().unwrap_or_else(|e| e.into_inner()).fixpoint(state, true) {
            Category::Match
        } else {
            Category::Undetermined
        };
        match &self.keep {
            Some(keep) if !keep.contains(&category) => Category::Undetermined,
            _ => category,
        }
    }

    /// Categories outside `keep` are reported as `Undetermined`.
    pub fn restrict_categories(&mut self, keep: &BTreeSet<Category>) {
        self.keep = Some(keep.clone());
    }

    /// Whether no word can be accepted from `state`.
    pub fn is_dead(&self, state: StateId) -> bool {
        state == EMPTY
    }

    /// Number of grammar-graph nodes allocated so far.
    pub fn graph_size(&self) -> usize {
        self.graph.lock().unwrap_or_else(|e| e.into_inner()).nodes.len()
    }

    pub fn listing(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "alphabet: {}", self.alphabet.names().collect::<Vec<_>>().join(" "));
        let _ = writeln!(out, "start: {}", self.grammar.nonterminals[0]);
        out.push_str(&self.grammar.render(&self.alphabet));
        let _ = writeln!(out, "initial [{}]", self.category(self.initial));
        out
    }
}

/// Terminal and nonterminal names used in a grammar; terminals are the
/// identifiers that never head a rule.
pub fn referenced_events(grammar: &str) -> Result<Vec<String>, SynthError> {
    let tokens = tokenize(grammar, SYMBOLS)?;
    let heads: BTreeSet<&str> = tokens
        .windows(2)
        .filter_map(|w| match (&w[0].tok, &w[1].tok) {
            (Tok::Ident(h), Tok::Sym("->")) | (Tok::Ident(h), Tok::Sym("::=")) => Some(*h),
            _ => None,
        })
        .collect();
    Ok(tokens
        .iter()
        .filter_map(|t| match t.tok {
            Tok::Ident(name) if !heads.contains(name) && name != "epsilon" => Some(name.to_string()),
            _ => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(t: &DerivativeTemplate, word: &[&str]) -> Category {
        let mut s = t.initial();
        for e in word {
            s = t.next(s, t.alphabet().id(e).unwrap());
        }
        t.category(s)
    }

    #[test]
    fn no_additional_output() {
        let t = compile_cfg("S -> finish | output S", &Alphabet::new(["output", "finish"])).unwrap();
        assert_eq!(run(&t, &["output", "output", "finish"]), Category::Match);
        assert_eq!(run(&t, &["finish", "output"]), Category::Violation);
        assert_eq!(run(&t, &["output"]), Category::Undetermined);
        // the residual after `output` is the start state again
        let out = t.alphabet().id("output").unwrap();
        assert_eq!(t.next(t.initial(), out), t.initial());
    }

    #[test]
    fn epsilon_start() {
        let t = compile_cfg("S -> epsilon", &Alphabet::new(["a"])).unwrap();
        assert_eq!(run(&t, &[]), Category::Match);
        assert_eq!(run(&t, &["a"]), Category::Violation);
        let t = compile_cfg("S -> ε", &Alphabet::new(["a"])).unwrap();
        assert_eq!(run(&t, &[]), Category::Match);
    }

    #[test]
    fn balanced() {
        let t = compile_cfg("S -> a S b | epsilon", &Alphabet::new(["a", "b"])).unwrap();
        assert_eq!(run(&t, &["a", "a", "b", "b"]), Category::Match);
        assert_eq!(run(&t, &["a", "b", "b"]), Category::Violation);
        assert_eq!(run(&t, &["a", "a", "b"]), Category::Undetermined);
    }

    #[test]
    fn left_recursion() {
        let t = compile_cfg("E -> E plus T | T\nT -> x", &Alphabet::new(["x", "plus"])).unwrap();
        assert_eq!(run(&t, &["x", "plus", "x", "plus", "x"]), Category::Match);
        assert_eq!(run(&t, &["x", "plus"]), Category::Undetermined);
        assert_eq!(run(&t, &["plus"]), Category::Violation);
    }

    #[test]
    fn bounded_growth_on_regular_grammar() {
        let t = compile_cfg("S -> finish | output S", &Alphabet::new(["output", "finish"])).unwrap();
        let out = t.alphabet().id("output").unwrap();
        let mut s = t.initial();
        for _ in 0..10 {
            s = t.next(s, out);
        }
        let size = t.graph_size();
        for _ in 0..1000 {
            s = t.next(s, out);
        }
        assert_eq!(t.graph_size(), size);
    }

    #[test]
    fn errors() {
        let ab = Alphabet::new(["a"]);
        assert_eq!(compile_cfg("S -> a c", &ab).unwrap_err(), SynthError::UnknownEvent("c".into()));
        assert!(matches!(compile_cfg("a b", &ab).unwrap_err(), SynthError::Syntax { .. }));
        assert!(matches!(compile_cfg("S -> a -", &ab).unwrap_err(), SynthError::Syntax { .. }));
    }

    #[test]
    fn references() {
        assert_eq!(referenced_events("S -> a S b | epsilon").unwrap(), vec!["a", "b"]);
    }
}
