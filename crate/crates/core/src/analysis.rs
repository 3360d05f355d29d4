// SPDX-License-Identifier: Apache-2.0

//! Enable and coenable sets.
//!
//! Parameter sets are bitmasks over the spec's parameter indices.
//!
//! `enable(e)` lists the parameter sets a monitor may have bound before
//! `e` extends it, given that the extended slice can still reach a goal
//! category. Only slices where `e` occurs for the first time count: a
//! monitor whose slice already contains `e` has bound all of `e`'s
//! parameters, so `e` never makes a new instance from it.
//!
//! `coenable(s)` lists, for each way to reach a goal from state `s`, the
//! parameters the events on that path bind. Only minimal sets are kept.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::logic::{cfg::Grammar, cfg::Symbol, Category, DerivativeTemplate, EventId, MonitorTemplate, StateId};

pub type ParamSet = u32;

/// Per-event families of parameter sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnableTable {
    sets: Vec<BTreeSet<ParamSet>>,
}

impl EnableTable {
    /// A table allowing every parameter set for every event.
    pub fn permissive(events: usize, params: usize) -> Self {
        let all: BTreeSet<ParamSet> = (0..(1u32 << params)).collect();
        EnableTable { sets: vec![all; events] }
    }

    pub fn get(&self, e: EventId) -> &BTreeSet<ParamSet> {
        &self.sets[e]
    }

    #[inline]
    pub fn allows(&self, e: EventId, bound: ParamSet) -> bool {
        self.sets[e].contains(&bound)
    }
}

/// Per-state families of minimal parameter sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoenableTable {
    PerState(Vec<Vec<ParamSet>>),
    /// The same family for every state (grammar templates).
    Uniform(Vec<ParamSet>),
}

impl CoenableTable {
    pub fn family(&self, state: StateId) -> &[ParamSet] {
        match self {
            CoenableTable::PerState(v) => &v[state as usize],
            CoenableTable::Uniform(v) => v,
        }
    }

    /// Whether a monitor in `state` with the given dead-bound parameters
    /// can never reach a goal again.
    #[inline]
    pub fn collectible(&self, state: StateId, dead: ParamSet) -> bool {
        self.family(state).iter().all(|p| p & dead != 0)
    }
}

fn minimal(sets: impl IntoIterator<Item = ParamSet>) -> Vec<ParamSet> {
    let mut v: Vec<ParamSet> = sets.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    v.sort_by_key(|s| (s.count_ones(), *s));
    let mut out: Vec<ParamSet> = Vec::new();
    for s in v {
        if !out.iter().any(|m| m & s == *m) {
            out.push(s);
        }
    }
    out.sort_unstable();
    out
}

fn goal_states(template: &MonitorTemplate, goals: &BTreeSet<Category>) -> Vec<bool> {
    template.states().map(|s| goals.contains(template.category(s))).collect()
}

/// States from which a goal state is reachable in zero or more steps.
fn goal_reachable(template: &MonitorTemplate, goal: &[bool]) -> Vec<bool> {
    let n = template.num_states();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in template.states() {
        for e in template.alphabet().ids() {
            preds[template.next(s, e) as usize].push(s);
        }
    }
    let mut reach = goal.to_vec();
    let mut queue: VecDeque<StateId> = template.states().filter(|&s| goal[s as usize]).collect();
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s as usize] {
            if !reach[p as usize] {
                reach[p as usize] = true;
                queue.push_back(p);
            }
        }
    }
    reach
}

/// Enable sets of an automaton template.
pub fn compute_enable_sets(template: &MonitorTemplate, event_params: &[ParamSet], goals: &BTreeSet<Category>) -> EnableTable {
    let goal = goal_states(template, goals);
    let live = goal_reachable(template, &goal);
    let events = template.alphabet().len();
    let mut sets = vec![BTreeSet::new(); events];
    for (e, out) in sets.iter_mut().enumerate() {
        // reachable (state, bound-set) pairs over words avoiding e
        let start = (template.initial(), 0 as ParamSet);
        let mut seen: HashSet<(StateId, ParamSet)> = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some((s, bound)) = queue.pop_front() {
            if live[template.next(s, e) as usize] {
                out.insert(bound);
            }
            for f in (0..events).filter(|&f| f != e) {
                let next = (template.next(s, f), bound | event_params[f]);
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    EnableTable { sets }
}

/// Coenable sets of an automaton template, as a least fixpoint.
pub fn compute_coenable_sets(template: &MonitorTemplate, event_params: &[ParamSet], goals: &BTreeSet<Category>) -> CoenableTable {
    let goal = goal_states(template, goals);
    let mut family: Vec<Vec<ParamSet>> = vec![Vec::new(); template.num_states()];
    loop {
        let mut changed = false;
        for s in template.states() {
            let mut sets: Vec<ParamSet> = family[s as usize].clone();
            for e in template.alphabet().ids() {
                let t = template.next(s, e);
                if goal[t as usize] {
                    sets.push(event_params[e]);
                }
                sets.extend(family[t as usize].iter().map(|p| p | event_params[e]));
            }
            let sets = minimal(sets);
            if sets != family[s as usize] {
                family[s as usize] = sets;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    CoenableTable::PerState(family)
}

/// Pairwise unions of two families.
fn product(a: &BTreeSet<ParamSet>, b: &BTreeSet<ParamSet>) -> BTreeSet<ParamSet> {
    a.iter().flat_map(|x| b.iter().map(move |y| x | y)).collect()
}

/// For each nonterminal, the parameter sets of the words it derives that
/// avoid `avoid` (if given).
fn word_sets(g: &Grammar, event_params: &[ParamSet], avoid: Option<EventId>) -> Vec<BTreeSet<ParamSet>> {
    let mut sets: Vec<BTreeSet<ParamSet>> = vec![BTreeSet::new(); g.nonterminals.len()];
    loop {
        let mut changed = false;
        for (lhs, rhs) in &g.rules {
            let mut acc = BTreeSet::from([0]);
            for sym in rhs {
                let s = match *sym {
                    Symbol::Terminal(t) if Some(t) == avoid => BTreeSet::new(),
                    Symbol::Terminal(t) => BTreeSet::from([event_params[t]]),
                    Symbol::Nonterminal(n) => sets[n].clone(),
                };
                acc = product(&acc, &s);
            }
            for x in acc {
                changed |= sets[*lhs].insert(x);
            }
        }
        if !changed {
            return sets;
        }
    }
}

/// Enable sets of a grammar template.
///
/// When the only goal is `Match`, `enable(e)` collects the parameter sets
/// of every prefix `u` with `u e v` in the language and `e` not in `u`.
/// Other goals (a word can be rejected at any point) fall back to every
/// union of the parameters of events other than `e`.
pub fn compute_enable_sets_cfg(template: &DerivativeTemplate, event_params: &[ParamSet], goals: &BTreeSet<Category>) -> EnableTable {
    let g = template.grammar();
    let events = template.alphabet().len();
    let any_word = word_sets(g, event_params, None);
    let productive = |sym: &Symbol| match *sym {
        Symbol::Terminal(_) => true,
        Symbol::Nonterminal(n) => !any_word[n].is_empty(),
    };
    let mut sets = vec![BTreeSet::new(); events];
    for (e, out) in sets.iter_mut().enumerate() {
        if goals.contains(&Category::Match) {
            let avoiding = word_sets(g, event_params, Some(e));
            // pre[n]: parameter sets of prefixes before the first e in words of n
            let mut pre: Vec<BTreeSet<ParamSet>> = vec![BTreeSet::new(); g.nonterminals.len()];
            loop {
                let mut changed = false;
                for (lhs, rhs) in &g.rules {
                    let mut prefix = BTreeSet::from([0]);
                    for (i, sym) in rhs.iter().enumerate() {
                        if !rhs[i + 1..].iter().all(productive) {
                            break;
                        }
                        let here = match *sym {
                            Symbol::Terminal(t) if t == e => prefix.clone(),
                            Symbol::Terminal(_) => BTreeSet::new(),
                            Symbol::Nonterminal(n) => product(&prefix, &pre[n]),
                        };
                        for x in here {
                            changed |= pre[*lhs].insert(x);
                        }
                        let step = match *sym {
                            Symbol::Terminal(t) if t == e => BTreeSet::new(),
                            Symbol::Terminal(t) => BTreeSet::from([event_params[t]]),
                            Symbol::Nonterminal(n) => avoiding[n].clone(),
                        };
                        prefix = product(&prefix, &step);
                        if prefix.is_empty() {
                            break;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            out.extend(pre[0].iter().copied());
        }
        if goals.iter().any(|c| *c != Category::Match) {
            let mut closure = BTreeSet::from([0]);
            for f in (0..events).filter(|&f| f != e) {
                let with: Vec<ParamSet> = closure.iter().map(|s| s | event_params[f]).collect();
                closure.extend(with);
            }
            out.extend(closure);
        }
    }
    EnableTable { sets }
}

/// Coenable sets of a grammar template: one singleton per event, so a
/// monitor is collected only when no event can reach it any more.
pub fn compute_coenable_sets_cfg(template: &DerivativeTemplate, event_params: &[ParamSet]) -> CoenableTable {
    CoenableTable::Uniform(minimal(template.alphabet().ids().map(|e| event_params[e])))
}

/// Renders a parameter set as `{a, b}`.
pub fn render_set(set: ParamSet, params: &[String]) -> String {
    let names: Vec<&str> = (0..params.len())
        .filter(|i| set & (1 << i) != 0)
        .map(|i| params[i].as_str())
        .collect();
    format!("{{{}}}", names.join(", "))
}

pub fn render_family<'a>(family: impl IntoIterator<Item = &'a ParamSet>, params: &[String]) -> String {
    let items: Vec<String> = family.into_iter().map(|s| render_set(*s, params)).collect();
    format!("{{{}}}", items.join(", "))
}

/// Stable text dump of both tables.
pub fn dump_tables(enable: &EnableTable, coenable: &CoenableTable, events: &[&str], states: &[String], params: &[String]) -> String {
    let mut out = String::new();
    for (e, name) in events.iter().enumerate() {
        let _ = writeln!(out, "enable({name}) = {}", render_family(enable.get(e), params));
    }
    match coenable {
        CoenableTable::PerState(v) => {
            for (s, fam) in v.iter().enumerate() {
                let _ = writeln!(out, "coenable({}) = {}", states[s], render_family(fam, params));
            }
        }
        CoenableTable::Uniform(fam) => {
            let _ = writeln!(out, "coenable(*) = {}", render_family(fam, params));
        }
    }
    out
}
