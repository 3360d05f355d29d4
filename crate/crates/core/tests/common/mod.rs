// SPDX-License-Identifier: Apache-2.0

//! Reference implementations shared by the integration tests.
//!
//! Everything here is written against definitions, not against the engine:
//! instances are string maps, slices follow the recursive definition, the
//! parametric oracle enumerates instances by brute force, and each formalism
//! has a direct semantic evaluator.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use paramon::compile::{compile_spec, CompiledSpec};
use paramon::engine::{run_trace, Algorithm, EngineConfig};
use paramon::logic::{Alphabet, Category, MonitorTemplate};
use paramon::report::Report;
use paramon::spec::parse_spec;
use paramon::trace::{DeathRecord, EventRecord, TraceRecord};
use rand::Rng;
use serde_json::json;

// ---------------------------------------------------------------------------
// Specs and runs

pub fn compile_json(text: &str) -> Arc<CompiledSpec> {
    Arc::new(compile_spec(parse_spec(text).expect("spec parses")).expect("spec compiles"))
}

pub fn catalog_spec(name: &str) -> Arc<CompiledSpec> {
    let spec = paramon::catalog::bundled()
        .into_iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("no bundled spec {name}"));
    Arc::new(compile_spec(spec).expect("bundled spec compiles"))
}

pub fn run(spec: &Arc<CompiledSpec>, algorithm: Algorithm, mgc: bool, trace: &[TraceRecord]) -> Report {
    let config = EngineConfig {
        algorithm,
        mgc,
        slice_cap: None,
    };
    run_trace(vec![spec.clone()], config, trace)
}

/// `(theta, seq, category)` of every record, sorted.
pub fn hit_keys(report: &Report) -> Vec<(String, u64, String)> {
    let mut keys: Vec<_> = report
        .records
        .iter()
        .map(|r| (r.theta.clone(), r.seq, r.category.clone()))
        .collect();
    keys.sort();
    keys
}

pub fn ev(seq: u64, name: &str, params: &[(&str, &str)]) -> TraceRecord {
    let mut rec = EventRecord::new(seq, name);
    for (p, t) in params {
        rec = rec.param(*p, *t);
    }
    TraceRecord::Event(rec)
}

pub fn death(seq: u64, objects: &[&str]) -> TraceRecord {
    TraceRecord::Death(DeathRecord {
        seq,
        objects: objects.iter().map(|s| s.to_string()).collect(),
    })
}

// ---------------------------------------------------------------------------
// Instances as plain maps

pub type Inst = BTreeMap<String, String>;

pub fn inst(pairs: &[(&str, &str)]) -> Inst {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

pub fn le(a: &Inst, b: &Inst) -> bool {
    a.iter().all(|(k, v)| b.get(k) == Some(v))
}

pub fn compatible(a: &Inst, b: &Inst) -> bool {
    a.iter().all(|(k, v)| b.get(k).map_or(true, |w| w == v))
}

pub fn join(a: &Inst, b: &Inst) -> Inst {
    let mut out = a.clone();
    out.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

pub fn render(i: &Inst) -> String {
    let body: Vec<String> = i.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", body.join(", "))
}

/// Slice by the recursive definition: the slice of `τ·e⟨θ'⟩` is the slice
/// of `τ` extended by `e` exactly when `θ' ⊑ θ`.
pub fn recursive_slice(trace: &[(String, Inst)], theta: &Inst) -> Vec<String> {
    match trace.split_last() {
        None => Vec::new(),
        Some(((e, t), rest)) => {
            let mut s = recursive_slice(rest, theta);
            if le(t, theta) {
                s.push(e.clone());
            }
            s
        }
    }
}

/// Every instance over `params` whose values come from `objects[param]`.
pub fn all_instances(objects: &BTreeMap<String, BTreeSet<String>>) -> Vec<Inst> {
    let mut out = vec![Inst::new()];
    for (p, objs) in objects {
        let mut next = Vec::new();
        for i in &out {
            next.push(i.clone());
            for o in objs {
                let mut j = i.clone();
                j.insert(p.clone(), o.clone());
                next.push(j);
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Random specs and traces

#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub json: String,
    /// `(name, type)` pairs.
    pub params: Vec<(String, String)>,
    /// Events with their bound parameters.
    pub events: Vec<(String, Vec<String>)>,
    pub all_creation: bool,
}

fn random_regex<R: Rng>(rng: &mut R, events: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return events[rng.gen_range(0..events.len())].clone();
    }
    let a = random_regex(rng, events, depth - 1);
    match rng.gen_range(0..5) {
        0 => format!("({a} | {})", random_regex(rng, events, depth - 1)),
        1 | 2 => format!("({a} {})", random_regex(rng, events, depth - 1)),
        3 => format!("({a})*"),
        _ => format!("({a})+"),
    }
}

/// An FSM or ERE spec over up to three parameters, without actions.
pub fn random_spec<R: Rng>(rng: &mut R, force_all_creation: bool) -> RandomSpec {
    let nparams = rng.gen_range(1..=3);
    let params: Vec<(String, String)> = (0..nparams)
        .map(|i| (["a", "b", "c"][i].to_string(), ["Ta", "Tb", "Tc"][i].to_string()))
        .collect();
    let nevents = rng.gen_range(2..=4);
    let events: Vec<(String, Vec<String>)> = (0..nevents)
        .map(|i| {
            let mask = rng.gen_range(1..(1u32 << nparams));
            let bound = (0..nparams)
                .filter(|p| mask & (1 << p) != 0)
                .map(|p| params[p].0.clone())
                .collect();
            (format!("e{i}"), bound)
        })
        .collect();
    let names: Vec<String> = events.iter().map(|(e, _)| e.clone()).collect();

    let (formalism, formula, handlers) = if rng.gen_bool(0.7) {
        let nstates = rng.gen_range(2..=4);
        let mut formula = String::new();
        for s in 0..nstates {
            let mut arcs = Vec::new();
            for e in &names {
                if arcs.is_empty() || rng.gen_bool(0.85) {
                    arcs.push(format!("{e} -> q{}", rng.gen_range(0..nstates)));
                }
            }
            formula.push_str(&format!("q{s} [{}] ", arcs.join(", ")));
        }
        formula.push_str(&format!("alias Violation = q{}", rng.gen_range(1..nstates)));
        ("fsm", formula, json!({"Violation": "{theta}"}))
    } else {
        let handlers = if rng.gen_bool(0.5) {
            json!({"Match": "{theta}"})
        } else {
            json!({"Match": "{theta}", "Violation": "{theta}"})
        };
        ("ere", random_regex(rng, &names, 3), handlers)
    };

    let all_creation = force_all_creation || rng.gen_bool(0.3);
    let creation: Vec<String> = if force_all_creation {
        names.clone()
    } else if all_creation {
        Vec::new()
    } else {
        let mut c: Vec<String> = names.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
        if c.is_empty() {
            c.push(names[rng.gen_range(0..names.len())].clone());
        }
        c
    };
    // naming every event is the same as naming none
    let all_creation = all_creation || creation.len() == names.len();

    let mut decl = serde_json::Map::new();
    for (e, bound) in &events {
        decl.insert(e.clone(), json!({"selectors": [["m", e]], "params": bound}));
    }
    let doc = json!({
        "Name": "Random",
        "Parameters": params.iter().map(|(p, t)| json!([p, t])).collect::<Vec<_>>(),
        "Formalism": formalism,
        "Formula": formula,
        "Creation_Events": creation,
        "Events": {"After": decl},
        "Handlers": handlers,
    });
    RandomSpec {
        json: doc.to_string(),
        params,
        events,
        all_creation,
    }
}

/// A random trace over the spec's events. Each parameter draws from a
/// small pool of live objects; with `death_rate > 0` a pooled object may die
/// after an event and is replaced by a fresh one.
pub fn random_trace<R: Rng>(rng: &mut R, spec: &RandomSpec, len: usize, pool: usize, death_rate: f64) -> Vec<TraceRecord> {
    let mut counters = vec![0usize; spec.params.len()];
    let fresh = |p: usize, counters: &mut Vec<usize>| {
        counters[p] += 1;
        format!("{}#{}{}", spec.params[p].1, spec.params[p].0, counters[p])
    };
    let mut pools: Vec<Vec<String>> = (0..spec.params.len())
        .map(|p| (0..pool).map(|_| fresh(p, &mut counters)).collect())
        .collect();
    let mut out = Vec::new();
    let mut seq = 0;
    for _ in 0..len {
        seq += 1;
        let (name, bound) = &spec.events[rng.gen_range(0..spec.events.len())];
        let mut rec = EventRecord::new(seq, name.as_str());
        for b in bound {
            let p = spec.params.iter().position(|(n, _)| n == b).unwrap();
            rec = rec.param(b.as_str(), pools[p][rng.gen_range(0..pool)].clone());
        }
        out.push(TraceRecord::Event(rec));
        if death_rate > 0.0 && rng.gen_bool(death_rate) {
            let p = rng.gen_range(0..spec.params.len());
            let slot = rng.gen_range(0..pool);
            let replacement = fresh(p, &mut counters);
            let dead = std::mem::replace(&mut pools[p][slot], replacement);
            seq += 1;
            out.push(TraceRecord::Death(DeathRecord {
                seq,
                objects: vec![dead],
            }));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Parametric oracle

/// The records a parametric monitor must produce, by brute force.
///
/// Instances are enumerated by closing the event instances under joins.
/// With `creation_aware`, a brand-new instance may start only on a creation
/// event while joins with existing instances are always allowed. Each
/// instance inherits the history of the largest existing instance below it
/// at birth; its state after event `j` is the template run over the events
/// below it between the start of that history and `j`.
pub fn oracle_hits(spec: &CompiledSpec, trace: &[TraceRecord], creation_aware: bool) -> Vec<(String, u64, String)> {
    let decl = &spec.spec;
    let all_creation = !creation_aware || decl.creation_events.is_empty() || decl.events.iter().all(|e| decl.creation_events.contains(&e.name));
    let events: Vec<(String, Inst, u64)> = trace
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Event(e) => {
                let d = decl.event(&e.name)?;
                let i: Inst = d
                    .bound_params
                    .iter()
                    .map(|p| (p.clone(), e.params[p].clone()))
                    .collect();
                Some((e.name.clone(), i, e.seq))
            }
            _ => None,
        })
        .collect();

    // (instance, birth, start of inherited history)
    let mut dom: Vec<(Inst, usize, usize)> = Vec::new();
    if all_creation {
        dom.push((Inst::new(), 0, 0));
    }
    for (k, (name, theta, _)) in events.iter().enumerate() {
        let creation = all_creation || decl.creation_events.contains(name);
        let prev = dom.len();
        let mut targets: Vec<Inst> = Vec::new();
        for (rho, _, _) in &dom[..prev] {
            if compatible(theta, rho) {
                targets.push(join(theta, rho));
            }
        }
        if creation {
            targets.push(theta.clone());
        }
        for t in targets {
            if dom.iter().any(|(i, _, _)| *i == t) {
                continue;
            }
            let src = dom[..prev]
                .iter()
                .filter(|(i, _, _)| le(i, &t))
                .max_by_key(|(i, _, _)| i.len());
            let start = src.map_or(k, |(_, _, s)| *s);
            dom.push((t, k, start));
        }
    }

    let template = &spec.template;
    let mut hits = Vec::new();
    for (theta, birth, start) in &dom {
        let mut state = template.initial();
        for (j, (name, t, seq)) in events.iter().enumerate().skip(*start) {
            if !le(t, theta) {
                continue;
            }
            state = template.step(state, name).unwrap().0;
            let category = template.category(state);
            if j >= *birth && spec.handled.contains(&category) {
                hits.push((render(theta), *seq, category.name().to_string()));
            }
        }
    }
    hits.sort();
    hits
}

// ---------------------------------------------------------------------------
// Formula tokenizer shared by the semantic oracles

const SYMBOLS: &[&str] = &[
    "(*)", "[*]", "<*>", "<=>", "[]", "<>", "=>", "&&", "||", "->", "!", "(", ")", "|", "&", "~", "*", "+", "?", ";",
];

pub fn tokenize(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = src;
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            return out;
        }
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            out.push(sym.to_string());
            rest = &rest[sym.len()..];
            continue;
        }
        let end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
            .unwrap_or(rest.len());
        assert!(end > 0, "oracle tokenizer stuck at {rest:?}");
        out.push(rest[..end].to_string());
        rest = &rest[end..];
    }
}

struct Toks {
    toks: Vec<String>,
    pos: usize,
}

impl Toks {
    fn new(src: &str) -> Self {
        Toks {
            toks: tokenize(src),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn eat(&mut self, t: &str) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn next(&mut self) -> String {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }
}

/// Category an oracle assigns to a word.
pub fn verdict(matched: bool, viable: bool) -> Category {
    if matched {
        Category::Match
    } else if !viable {
        Category::Violation
    } else {
        Category::Undetermined
    }
}

/// Every word over `alphabet` of length at most `max`.
pub fn words(alphabet: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for w in &layer {
            for a in 0..alphabet {
                let mut v = w.clone();
                v.push(a);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Regular expressions

#[derive(Clone, Debug)]
pub enum Re {
    Sym(usize),
    Eps,
    Empty,
    Alt(Box<Re>, Box<Re>),
    Cat(Box<Re>, Box<Re>),
    Star(Box<Re>),
}

impl Re {
    /// Parses `| juxtaposition * + ? ( ) epsilon empty` over `alphabet`.
    pub fn parse(src: &str, alphabet: &[&str]) -> Re {
        let mut t = Toks::new(src);
        let r = Re::alt(&mut t, alphabet);
        assert!(t.peek().is_none(), "trailing tokens in {src:?}");
        r
    }

    fn alt(t: &mut Toks, ab: &[&str]) -> Re {
        let mut r = Re::cat(t, ab);
        while t.eat("|") {
            r = Re::Alt(Box::new(r), Box::new(Re::cat(t, ab)));
        }
        r
    }

    fn cat(t: &mut Toks, ab: &[&str]) -> Re {
        let mut r = Re::post(t, ab);
        while matches!(t.peek(), Some(s) if s == "(" || s.chars().next().unwrap().is_ascii_alphabetic()) {
            r = Re::Cat(Box::new(r), Box::new(Re::post(t, ab)));
        }
        r
    }

    fn post(t: &mut Toks, ab: &[&str]) -> Re {
        let mut r = Re::atom(t, ab);
        loop {
            if t.eat("*") {
                r = Re::Star(Box::new(r));
            } else if t.eat("+") {
                r = Re::Cat(Box::new(r.clone()), Box::new(Re::Star(Box::new(r))));
            } else if t.eat("?") {
                r = Re::Alt(Box::new(r), Box::new(Re::Eps));
            } else {
                return r;
            }
        }
    }

    fn atom(t: &mut Toks, ab: &[&str]) -> Re {
        let tok = t.next();
        match tok.as_str() {
            "(" => {
                let r = Re::alt(t, ab);
                assert!(t.eat(")"));
                r
            }
            "epsilon" => Re::Eps,
            "empty" => Re::Empty,
            name => Re::Sym(ab.iter().position(|a| *a == name).unwrap_or_else(|| panic!("unknown event {name}"))),
        }
    }

    fn nonempty(&self) -> bool {
        match self {
            Re::Empty => false,
            Re::Sym(_) | Re::Eps | Re::Star(_) => true,
            Re::Alt(a, b) => a.nonempty() || b.nonempty(),
            Re::Cat(a, b) => a.nonempty() && b.nonempty(),
        }
    }

    /// Positions `j` such that `w[i..j]` is in the language.
    fn ends(&self, w: &[usize], i: usize) -> BTreeSet<usize> {
        match self {
            Re::Sym(a) => (i < w.len() && w[i] == *a).then_some(i + 1).into_iter().collect(),
            Re::Eps => [i].into(),
            Re::Empty => BTreeSet::new(),
            Re::Alt(a, b) => a.ends(w, i).union(&b.ends(w, i)).copied().collect(),
            Re::Cat(a, b) => a.ends(w, i).into_iter().flat_map(|j| b.ends(w, j)).collect(),
            Re::Star(a) => {
                let mut reached: BTreeSet<usize> = [i].into();
                let mut todo = vec![i];
                while let Some(j) = todo.pop() {
                    for k in a.ends(w, j) {
                        if reached.insert(k) {
                            todo.push(k);
                        }
                    }
                }
                reached
            }
        }
    }

    /// Whether `w[i..]` is a prefix of some word in the language.
    fn viable(&self, w: &[usize], i: usize) -> bool {
        if i == w.len() {
            return self.nonempty();
        }
        match self {
            Re::Sym(a) => i + 1 == w.len() && w[i] == *a,
            Re::Eps | Re::Empty => false,
            Re::Alt(a, b) => a.viable(w, i) || b.viable(w, i),
            Re::Cat(a, b) => (a.viable(w, i) && b.nonempty()) || a.ends(w, i).into_iter().any(|j| b.viable(w, j)),
            Re::Star(_) => self.ends(w, i).into_iter().any(|j| match self {
                Re::Star(a) => j == w.len() || a.viable(w, j),
                _ => unreachable!(),
            }),
        }
    }

    pub fn verdict(&self, w: &[usize]) -> Category {
        verdict(self.ends(w, 0).contains(&w.len()), self.viable(w, 0))
    }
}

// ---------------------------------------------------------------------------
// Context-free grammars: exact membership and viable-prefix tests by a
// CYK-style least fixpoint over spans of the input word.

pub struct Cfg {
    pub rules: Vec<(usize, Vec<Sym>)>,
    pub nonterminals: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sym {
    T(usize),
    N(usize),
}

impl Cfg {
    pub fn parse(src: &str, alphabet: &[&str]) -> Cfg {
        let mut lhs_names: Vec<String> = Vec::new();
        let mut raw: Vec<(String, Vec<Vec<String>>)> = Vec::new();
        for rule in src.split([';', '\n']).map(str::trim).filter(|r| !r.is_empty()) {
            let (lhs, rhs) = rule.split_once("->").expect("rule has ->");
            let lhs = lhs.trim().to_string();
            if !lhs_names.contains(&lhs) {
                lhs_names.push(lhs.clone());
            }
            let alts = rhs
                .split('|')
                .map(|alt| alt.split_whitespace().filter(|s| *s != "epsilon").map(String::from).collect())
                .collect();
            raw.push((lhs, alts));
        }
        let sym = |s: &str| match lhs_names.iter().position(|n| n == s) {
            Some(n) => Sym::N(n),
            None => Sym::T(alphabet.iter().position(|a| *a == s).unwrap_or_else(|| panic!("unknown terminal {s}"))),
        };
        let mut rules = Vec::new();
        for (lhs, alts) in &raw {
            let l = lhs_names.iter().position(|n| n == lhs).unwrap();
            for alt in alts {
                rules.push((l, alt.iter().map(|s| sym(s)).collect()));
            }
        }
        Cfg {
            rules,
            nonterminals: lhs_names,
        }
    }

    fn productive(&self) -> Vec<bool> {
        let mut prod = vec![false; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for (l, rhs) in &self.rules {
                if !prod[*l]
                    && rhs.iter().all(|s| match s {
                        Sym::T(_) => true,
                        Sym::N(n) => prod[*n],
                    })
                {
                    prod[*l] = true;
                    changed = true;
                }
            }
            if !changed {
                return prod;
            }
        }
    }

    pub fn verdict(&self, w: &[usize]) -> Category {
        let n = w.len();
        let prod = self.productive();
        // exact[(A, i, j)]: A derives w[i..j]
        let mut exact: HashSet<(usize, usize, usize)> = HashSet::new();
        // pre[(A, i)]: w[i..] is a prefix of something A derives
        let mut pre: HashSet<(usize, usize)> = HashSet::new();
        let derives = |exact: &HashSet<(usize, usize, usize)>, s: Sym, i: usize, j: usize| match s {
            Sym::T(t) => j == i + 1 && i < n && w[i] == t,
            Sym::N(a) => exact.contains(&(a, i, j)),
        };
        loop {
            let mut changed = false;
            for (l, rhs) in &self.rules {
                for i in 0..=n {
                    // positions reachable after consuming a prefix of rhs exactly
                    let mut reach: BTreeSet<usize> = [i].into();
                    let mut viable = false;
                    for (k, s) in rhs.iter().enumerate() {
                        let rest_productive = rhs[k + 1..].iter().all(|r| match r {
                            Sym::T(_) => true,
                            Sym::N(m) => prod[*m],
                        });
                        for &p in &reach {
                            let sym_pre = match *s {
                                Sym::T(t) => p == n || (p + 1 == n && w[p] == t),
                                Sym::N(a) => {
                                    if p == n {
                                        prod[a]
                                    } else {
                                        pre.contains(&(a, p))
                                    }
                                }
                            };
                            viable |= sym_pre && rest_productive;
                        }
                        let mut next = BTreeSet::new();
                        for &p in &reach {
                            for q in p..=n {
                                if derives(&exact, *s, p, q) {
                                    next.insert(q);
                                }
                            }
                        }
                        reach = next;
                    }
                    if rhs.is_empty() {
                        viable = i == n;
                    }
                    for &j in &reach {
                        changed |= exact.insert((*l, i, j));
                    }
                    if viable && i < n {
                        changed |= pre.insert((*l, i));
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let start_viable = if n == 0 { prod[0] } else { pre.contains(&(0, 0)) };
        verdict(exact.contains(&(0, 0, n)), start_viable)
    }
}

// ---------------------------------------------------------------------------
// Temporal logic

#[derive(Clone, Debug)]
pub enum Ltl {
    True,
    False,
    Atom(usize),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Always(Box<Ltl>),
    Eventually(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Prev(Box<Ltl>),
    Historically(Box<Ltl>),
    Once(Box<Ltl>),
    Since(Box<Ltl>, Box<Ltl>),
}

fn bx(f: Ltl) -> Box<Ltl> {
    Box::new(f)
}

impl Ltl {
    /// Precedence, loosest first: `<=>`, `=>`, `||`, `&&`, `U`/`S`, unary.
    pub fn parse(src: &str, alphabet: &[&str]) -> Ltl {
        let mut t = Toks::new(src);
        let f = Ltl::iff(&mut t, alphabet);
        assert!(t.peek().is_none(), "trailing tokens in {src:?}");
        f
    }

    fn iff(t: &mut Toks, ab: &[&str]) -> Ltl {
        let l = Ltl::imp(t, ab);
        if t.eat("<=>") {
            let r = Ltl::iff(t, ab);
            let (a, b) = (l.clone(), r.clone());
            return Ltl::Or(
                bx(Ltl::And(bx(l), bx(r))),
                bx(Ltl::And(bx(Ltl::Not(bx(a))), bx(Ltl::Not(bx(b))))),
            );
        }
        l
    }

    fn imp(t: &mut Toks, ab: &[&str]) -> Ltl {
        let l = Ltl::or(t, ab);
        if t.eat("=>") || t.eat("->") {
            return Ltl::Or(bx(Ltl::Not(bx(l))), bx(Ltl::imp(t, ab)));
        }
        l
    }

    fn or(t: &mut Toks, ab: &[&str]) -> Ltl {
        let mut l = Ltl::and(t, ab);
        while t.eat("||") {
            l = Ltl::Or(bx(l), bx(Ltl::and(t, ab)));
        }
        l
    }

    fn and(t: &mut Toks, ab: &[&str]) -> Ltl {
        let mut l = Ltl::until(t, ab);
        while t.eat("&&") {
            l = Ltl::And(bx(l), bx(Ltl::until(t, ab)));
        }
        l
    }

    fn until(t: &mut Toks, ab: &[&str]) -> Ltl {
        let l = Ltl::unary(t, ab);
        if t.eat("U") {
            return Ltl::Until(bx(l), bx(Ltl::until(t, ab)));
        }
        if t.eat("S") {
            return Ltl::Since(bx(l), bx(Ltl::until(t, ab)));
        }
        l
    }

    fn unary(t: &mut Toks, ab: &[&str]) -> Ltl {
        let tok = t.next();
        match tok.as_str() {
            "!" => Ltl::Not(bx(Ltl::unary(t, ab))),
            "X" => Ltl::Next(bx(Ltl::unary(t, ab))),
            "[]" => Ltl::Always(bx(Ltl::unary(t, ab))),
            "<>" => Ltl::Eventually(bx(Ltl::unary(t, ab))),
            "(*)" => Ltl::Prev(bx(Ltl::unary(t, ab))),
            "[*]" => Ltl::Historically(bx(Ltl::unary(t, ab))),
            "<*>" => Ltl::Once(bx(Ltl::unary(t, ab))),
            "(" => {
                let f = Ltl::iff(t, ab);
                assert!(t.eat(")"));
                f
            }
            "true" => Ltl::True,
            "false" => Ltl::False,
            name => Ltl::Atom(ab.iter().position(|a| *a == name).unwrap_or_else(|| panic!("unknown event {name}"))),
        }
    }

    /// Finite-trace future semantics at position `i ∈ [0, |w|]`; the end
    /// position satisfies no atom and no `X`.
    pub fn future(&self, w: &[usize], i: usize) -> bool {
        let n = w.len();
        match self {
            Ltl::True => true,
            Ltl::False => false,
            Ltl::Atom(a) => i < n && w[i] == *a,
            Ltl::Not(f) => !f.future(w, i),
            Ltl::And(f, g) => f.future(w, i) && g.future(w, i),
            Ltl::Or(f, g) => f.future(w, i) || g.future(w, i),
            Ltl::Next(f) => i < n && f.future(w, i + 1),
            Ltl::Always(f) => (i..=n).all(|j| f.future(w, j)),
            Ltl::Eventually(f) => (i..=n).any(|j| f.future(w, j)),
            Ltl::Until(f, g) => (i..=n).any(|j| g.future(w, j) && (i..j).all(|k| f.future(w, k))),
            _ => panic!("past operator in a future formula"),
        }
    }

    /// Past semantics at position `i < |w|`.
    pub fn past(&self, w: &[usize], i: usize) -> bool {
        match self {
            Ltl::True => true,
            Ltl::False => false,
            Ltl::Atom(a) => w[i] == *a,
            Ltl::Not(f) => !f.past(w, i),
            Ltl::And(f, g) => f.past(w, i) && g.past(w, i),
            Ltl::Or(f, g) => f.past(w, i) || g.past(w, i),
            Ltl::Prev(f) => i > 0 && f.past(w, i - 1),
            Ltl::Historically(f) => (0..=i).all(|j| f.past(w, j)),
            Ltl::Once(f) => (0..=i).any(|j| f.past(w, j)),
            Ltl::Since(f, g) => (0..=i).any(|j| g.past(w, j) && (j + 1..=i).all(|k| f.past(w, k))),
            // a leading always is a no-op for past monitors
            Ltl::Always(f) => f.past(w, i),
            _ => panic!("future operator in a past formula"),
        }
    }

    pub fn past_verdict(&self, w: &[usize]) -> Category {
        match w.len() {
            0 => Category::Undetermined,
            n if self.past(w, n - 1) => Category::Match,
            _ => Category::Violation,
        }
    }

    /// Verdict of a prefix by quantifying over its extensions of length up
    /// to `bound`. Exact once `bound` reaches the state count of any
    /// automaton for the language.
    pub fn future_verdict(&self, w: &[usize], alphabet: usize, bound: usize) -> Category {
        let mut all = true;
        let mut any = false;
        for u in words(alphabet, bound) {
            let mut full = w.to_vec();
            full.extend(u);
            if self.future(&full, 0) {
                any = true;
            } else {
                all = false;
            }
            if any && !all {
                return Category::Undetermined;
            }
        }
        if all {
            Category::Match
        } else {
            Category::Violation
        }
    }
}

// ---------------------------------------------------------------------------
// Automata

/// State count of the minimal complete automaton for the language of words
/// ending in a `Match` state, by Moore partition refinement.
pub fn minimal_size(t: &MonitorTemplate) -> usize {
    let reach = t.reachable();
    let states: Vec<u32> = t.states().filter(|s| reach[*s as usize]).collect();
    let mut class: HashMap<u32, usize> = states
        .iter()
        .map(|&s| (s, usize::from(*t.category(s) == Category::Match)))
        .collect();
    let mut count = class.values().collect::<BTreeSet<_>>().len();
    loop {
        let mut sigs: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut next = HashMap::new();
        for &s in &states {
            let sig = (class[&s], t.alphabet().ids().map(|e| class[&t.next(s, e)]).collect());
            let n = sigs.len();
            next.insert(s, *sigs.entry(sig).or_insert(n));
        }
        let new_count = sigs.len();
        class = next;
        if new_count == count {
            return count;
        }
        count = new_count;
    }
}

pub fn reachable_count(t: &MonitorTemplate) -> usize {
    t.reachable().iter().filter(|r| **r).count()
}

pub fn alphabet(names: &[&str]) -> Alphabet {
    Alphabet::new(names.iter().copied())
}

// ---------------------------------------------------------------------------
// Template-versus-oracle sweeps

/// Compares `step`/`category` of a template against `oracle` on every word
/// up to `max_len`; returns the number of words checked.
fn sweep(
    events: &[&str],
    max_len: usize,
    initial: u32,
    step: impl Fn(u32, usize) -> u32,
    category: impl Fn(u32) -> Category,
    oracle: impl Fn(&[usize]) -> Category,
) -> Result<usize, String> {
    let all = words(events.len(), max_len);
    for w in &all {
        let state = w.iter().fold(initial, |s, &e| step(s, e));
        let got = category(state);
        let want = oracle(w);
        if got != want {
            let word: Vec<&str> = w.iter().map(|&e| events[e]).collect();
            return Err(format!("word {word:?}: template says {got}, oracle says {want}"));
        }
    }
    Ok(all.len())
}

pub fn check_ere(formula: &str, events: &[&str], max_len: usize) -> Result<usize, String> {
    let t = paramon::logic::compile_ere(formula, &alphabet(events)).map_err(|e| e.to_string())?;
    let re = Re::parse(formula, events);
    sweep(events, max_len, t.initial(), |s, e| t.next(s, e), |s| t.category(s).clone(), |w| re.verdict(w))
}

pub fn check_cfg(formula: &str, events: &[&str], max_len: usize) -> Result<usize, String> {
    let t = paramon::logic::compile_cfg(formula, &alphabet(events)).map_err(|e| e.to_string())?;
    let g = Cfg::parse(formula, events);
    sweep(events, max_len, t.initial(), |s, e| t.next(s, e), |s| t.category(s), |w| g.verdict(w))
}

pub fn check_ftltl(formula: &str, events: &[&str], max_len: usize) -> Result<usize, String> {
    let t = paramon::logic::compile_ftltl(formula, &alphabet(events)).map_err(|e| e.to_string())?;
    let f = Ltl::parse(formula, events);
    let bound = t.num_states() + 1;
    sweep(events, max_len, t.initial(), |s, e| t.next(s, e), |s| t.category(s).clone(), |w| f.future_verdict(w, events.len(), bound))
}

pub fn check_ptltl(formula: &str, events: &[&str], max_len: usize) -> Result<usize, String> {
    let t = paramon::logic::compile_ptltl(formula, &alphabet(events)).map_err(|e| e.to_string())?;
    let f = Ltl::parse(formula, events);
    sweep(events, max_len, t.initial(), |s, e| t.next(s, e), |s| t.category(s).clone(), |w| f.past_verdict(w))
}

/// Catalog specs by formalism tag: `(name, formalism, formula, events)`.
pub fn catalog_formulas() -> Vec<(String, String, String, Vec<String>)> {
    paramon::catalog::bundled()
        .into_iter()
        .map(|s| {
            let events = s.events.iter().map(|e| e.name.clone()).collect();
            (s.name.clone(), s.formalism.tag().to_string(), s.formula.clone(), events)
        })
        .collect()
}

/// Runs the matching sweep for a formalism tag; FSMs have no oracle.
pub fn check_formula(formalism: &str, formula: &str, events: &[String], regular_len: usize, ltl_len: usize) -> Option<Result<usize, String>> {
    let events: Vec<&str> = events.iter().map(String::as_str).collect();
    Some(match formalism {
        "ere" => check_ere(formula, &events, regular_len),
        "cfg" => check_cfg(formula, &events, regular_len),
        "ftltl" => check_ftltl(formula, &events, ltl_len),
        "ptltl" => check_ptltl(formula, &events, ltl_len),
        _ => return None,
    })
}
