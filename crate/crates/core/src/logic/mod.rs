// SPDX-License-Identifier: Apache-2.0

//! Monitor synthesis: compiling formulas of each supported formalism into
//! monitor templates.
//!
//! A template is either a finite automaton ([`MonitorTemplate`], used for
//! FSM, ERE and both LTL flavours) or a grammar-derivative recognizer
//! ([`DerivativeTemplate`], used for CFG). Both expose the same stepping
//! interface through [`Template`]: monitor states are plain `u32` ids.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

pub mod cfg;
pub mod ere;
pub mod fsm;
pub mod ftltl;
pub mod ptltl;
mod lexer;

pub use cfg::{compile_cfg, DerivativeTemplate};
pub use ere::compile_ere;
pub use fsm::parse_fsm;
pub use ftltl::compile_ftltl;
pub use ptltl::compile_ptltl;

pub type StateId = u32;
pub type EventId = usize;

/// Upper bound on explored automaton states before synthesis gives up.
pub const MAX_STATES: usize = 1 << 16;

/// A verdict category assigned to monitor states.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Match,
    Violation,
    Undetermined,
    Named(Arc<str>),
}

impl Category {
    /// Maps a category name from a spec (handler key, FSM alias) to a
    /// category. The three built-in names are matched case-insensitively.
    pub fn from_name(name: &str) -> Category {
        match name.to_ascii_lowercase().as_str() {
            "match" => Category::Match,
            "violation" => Category::Violation,
            "undetermined" => Category::Undetermined,
            _ => Category::Named(name.into()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Category::Match => "Match",
            Category::Violation => "Violation",
            Category::Undetermined => "Undetermined",
            Category::Named(name) => name,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The event alphabet of a template, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<Arc<str>>,
    index: HashMap<Arc<str>, EventId>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut alphabet = Alphabet::default();
        for name in names {
            let name: Arc<str> = name.as_ref().into();
            if !alphabet.index.contains_key(&name) {
                alphabet.index.insert(name.clone(), alphabet.names.len());
                alphabet.names.push(name);
            }
        }
        alphabet
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<EventId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: EventId) -> &str {
        &self.names[id]
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|n| n.as_ref())
    }

    pub fn ids(&self) -> std::ops::Range<EventId> {
        0..self.names.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("duplicate block for state `{0}`")]
    DuplicateState(String),
    #[error("alias `{alias}` refers to undeclared state `{state}`")]
    UndeclaredAliasState { alias: String, state: String },
    #[error("state space exceeds {MAX_STATES} states")]
    TooManyStates,
    #[error("event `{0}` is not in the template alphabet")]
    NotInAlphabet(String),
    #[error("{0}")]
    Unsupported(String),
}

impl SynthError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        SynthError::Syntax {
            offset,
            message: message.into(),
        }
    }
}

/// A deterministic finite monitor: states, alphabet, categories, initial
/// state, total transition function and verdict function.
///
/// Every template carries an implicit absorbing sink state (the last state)
/// with category `Undetermined` which receives all transitions the source
/// formula leaves undefined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonitorTemplate {
    alphabet: Alphabet,
    state_names: Vec<String>,
    transitions: Vec<StateId>,
    categories: Vec<Category>,
    initial: StateId,
    sink: StateId,
}

pub(crate) const SINK_NAME: &str = "#sink";

impl MonitorTemplate {
    /// Builds a template from explicit states; `transitions[s][e] == None`
    /// routes to the implicit sink, which is appended as the last state.
    pub(crate) fn from_parts(
        alphabet: Alphabet,
        state_names: Vec<String>,
        transitions: Vec<Vec<Option<StateId>>>,
        categories: Vec<Category>,
        initial: StateId,
    ) -> Self {
        let width = alphabet.len();
        let sink = state_names.len() as StateId;
        let mut table = Vec::with_capacity((state_names.len() + 1) * width);
        for row in &transitions {
            debug_assert_eq!(row.len(), width);
            table.extend(row.iter().map(|t| t.unwrap_or(sink)));
        }
        table.extend(std::iter::repeat(sink).take(width));
        let mut state_names = state_names;
        state_names.push(SINK_NAME.to_string());
        let mut categories = categories;
        categories.push(Category::Undetermined);
        MonitorTemplate {
            alphabet,
            state_names,
            transitions: table,
            categories,
            initial,
            sink,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.state_names.len() as StateId
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn sink(&self) -> StateId {
        self.sink
    }

    pub fn state_name(&self, state: StateId) -> &str {
        &self.state_names[state as usize]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| i as StateId)
    }

    #[inline]
    pub fn next(&self, state: StateId, event: EventId) -> StateId {
        self.transitions[state as usize * self.alphabet.len() + event]
    }

    #[inline]
    pub fn category(&self, state: StateId) -> &Category {
        &self.categories[state as usize]
    }

    /// Every category in the range of the verdict function.
    pub fn categories(&self) -> BTreeSet<Category> {
        self.categories.iter().cloned().collect()
    }

    /// Steps by event name; `(σ(state, e), γ(σ(state, e)))`.
    pub fn step(&self, state: StateId, event: &str) -> Result<(StateId, &Category), SynthError> {
        let e = self
            .alphabet
            .id(event)
            .ok_or_else(|| SynthError::NotInAlphabet(event.to_string()))?;
        let next = self.next(state, e);
        Ok((next, self.category(next)))
    }

    /// Runs a word from the initial state and returns the final state.
    pub fn run<'a, I>(&self, word: I) -> Result<StateId, SynthError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        word.into_iter()
            .try_fold(self.initial, |s, e| self.step(s, e).map(|(n, _)| n))
    }

    /// Replaces every category outside `keep` with `Undetermined`.
    pub fn restrict_categories(&mut self, keep: &BTreeSet<Category>) {
        for category in &mut self.categories {
            if !keep.contains(category) {
                *category = Category::Undetermined;
            }
        }
    }

    /// States reachable from the initial state.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial as usize] = true;
        while let Some(s) = queue.pop_front() {
            for e in self.alphabet.ids() {
                let n = self.next(s, e);
                if !seen[n as usize] {
                    seen[n as usize] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Stable text listing used by `synth` and golden tests.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "alphabet: {}", self.alphabet.names().collect::<Vec<_>>().join(" "));
        let _ = writeln!(out, "initial: {}", self.state_name(self.initial));
        for s in self.states() {
            let edges: Vec<String> = self
                .alphabet
                .ids()
                .map(|e| format!("{} -> {}", self.alphabet.name(e), self.state_name(self.next(s, e))))
                .collect();
            let _ = writeln!(
                out,
                "state {} [{}]: {}",
                self.state_name(s),
                self.category(s),
                edges.join(", ")
            );
        }
        out
    }
}

/// Breadth-first exploration of a deterministic state space keyed by `K`.
///
/// Returns the discovered keys in id order (the initial key has id 0) and
/// the transition table.
pub(crate) fn explore<K, F>(
    initial: K,
    alphabet_len: usize,
    mut step: F,
) -> Result<(Vec<K>, Vec<Vec<Option<StateId>>>), SynthError>
where
    K: Clone + Eq + Hash,
    F: FnMut(&K, EventId) -> K,
{
    let mut ids: HashMap<K, StateId> = HashMap::new();
    let mut keys = vec![initial.clone()];
    ids.insert(initial, 0);
    let mut table: Vec<Vec<Option<StateId>>> = Vec::new();
    let mut next = 0usize;
    while next < keys.len() {
        let current = keys[next].clone();
        let mut row = Vec::with_capacity(alphabet_len);
        for e in 0..alphabet_len {
            let target = step(&current, e);
            let id = match ids.get(&target) {
                Some(&id) => id,
                None => {
                    if keys.len() >= MAX_STATES {
                        return Err(SynthError::TooManyStates);
                    }
                    let id = keys.len() as StateId;
                    ids.insert(target.clone(), id);
                    keys.push(target);
                    id
                }
            };
            row.push(Some(id));
        }
        table.push(row);
        next += 1;
    }
    Ok((keys, table))
}

/// Reflexive backward reachability: which states can reach a marked state.
pub(crate) fn can_reach(table: &[Vec<Option<StateId>>], marked: &[bool]) -> Vec<bool> {
    let n = table.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, row) in table.iter().enumerate() {
        for t in row.iter().flatten() {
            preds[*t as usize].push(s);
        }
    }
    let mut reach = marked.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| marked[s]).collect();
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !reach[p] {
                reach[p] = true;
                queue.push_back(p);
            }
        }
    }
    reach
}

/// A compiled template of any formalism.
#[derive(Debug)]
pub enum Template {
    Automaton(MonitorTemplate),
    Derivative(DerivativeTemplate),
}

impl Template {
    pub fn alphabet(&self) -> &Alphabet {
        match self {
            Template::Automaton(t) => t.alphabet(),
            Template::Derivative(t) => t.alphabet(),
        }
    }

    pub fn initial(&self) -> StateId {
        match self {
            Template::Automaton(t) => t.initial(),
            Template::Derivative(t) => t.initial(),
        }
    }

    #[inline]
    pub fn next(&self, state: StateId, event: EventId) -> StateId {
        match self {
            Template::Automaton(t) => t.next(state, event),
            Template::Derivative(t) => t.next(state, event),
        }
    }

    pub fn category(&self, state: StateId) -> Category {
        match self {
            Template::Automaton(t) => t.category(state).clone(),
            Template::Derivative(t) => t.category(state),
        }
    }

    /// `(next-state, category)` for a named event.
    pub fn step(&self, state: StateId, event: &str) -> Result<(StateId, Category), SynthError> {
        let e = self
            .alphabet()
            .id(event)
            .ok_or_else(|| SynthError::NotInAlphabet(event.to_string()))?;
        let next = self.next(state, e);
        Ok((next, self.category(next)))
    }

    pub fn as_automaton(&self) -> Option<&MonitorTemplate> {
        match self {
            Template::Automaton(t) => Some(t),
            Template::Derivative(_) => None,
        }
    }

    /// Categories some reachable state carries.
    pub fn produced_categories(&self) -> BTreeSet<Category> {
        match self {
            Template::Automaton(t) => t
                .reachable()
                .iter()
                .zip(t.states())
                .filter(|(r, _)| **r)
                .map(|(_, s)| t.category(s).clone())
                .collect(),
            Template::Derivative(_) => [Category::Match, Category::Violation, Category::Undetermined].into(),
        }
    }

    /// Replaces every category outside `keep` with `Undetermined`.
    pub fn restrict_categories(&mut self, keep: &BTreeSet<Category>) {
        match self {
            Template::Automaton(t) => t.restrict_categories(keep),
            Template::Derivative(t) => t.restrict_categories(keep),
        }
    }

    pub fn listing(&self) -> String {
        match self {
            Template::Automaton(t) => t.listing(),
            Template::Derivative(t) => t.listing(),
        }
    }
}

/// Free-function stepping interface over either template kind.
pub fn step_template(template: &Template, state: StateId, event: &str) -> Result<(StateId, Category), SynthError> {
    template.step(state, event)
}
