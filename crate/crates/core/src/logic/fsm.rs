// SPDX-License-Identifier: Apache-2.0

//! Textual finite-state-machine formulas.
//!
//! ```text
//! s0 [use -> s1, check -> s2] s2 [use -> s3, check -> s2] s3 [use -> s3]
//! alias Violation = s3
//! ```
//!
//! The first block names the initial state. Inside a block, `default -> t`
//! is the fallback edge for events not listed. A state that only appears as
//! a transition target (no block of its own) loops on every event. Events a
//! block leaves unlisted, with no default, go to the implicit sink.

use std::collections::HashMap;

use super::lexer::{tokenize, Cursor, Tok};
use super::{Alphabet, Category, MonitorTemplate, StateId, SynthError};

const SYMBOLS: &[&str] = &["[", "]", "->", ",", "=", ";"];

fn intern<'a>(name: &'a str, ids: &mut HashMap<&'a str, StateId>, names: &mut Vec<String>) -> StateId {
    *ids.entry(name).or_insert_with(|| {
        names.push(name.to_string());
        (names.len() - 1) as StateId
    })
}

struct Block<'a> {
    state: &'a str,
    edges: Vec<(&'a str, &'a str)>,
    default: Option<&'a str>,
}

/// Parses an FSM formula over `events` into a template.
pub fn parse_fsm(formula: &str, events: &Alphabet) -> Result<MonitorTemplate, SynthError> {
    let mut cur = Cursor::new(tokenize(formula, SYMBOLS)?, formula.len());
    let mut blocks: Vec<Block> = Vec::new();
    let mut aliases: Vec<(&str, Vec<&str>)> = Vec::new();

    while !cur.at_end() {
        if cur.eat_sym(";") {
            continue;
        }
        if cur.eat_keyword("alias") {
            let name = cur.expect_ident()?;
            cur.expect_sym("=")?;
            let mut targets = Vec::new();
            loop {
                targets.push(cur.expect_ident()?);
                if !cur.eat_sym(",") {
                    break;
                }
            }
            aliases.push((name, targets));
            continue;
        }
        let state = cur.expect_ident()?;
        cur.expect_sym("[")?;
        let mut block = Block {
            state,
            edges: Vec::new(),
            default: None,
        };
        if !cur.eat_sym("]") {
            loop {
                let label = cur.expect_ident()?;
                cur.expect_sym("->")?;
                let target = cur.expect_ident()?;
                if label == "default" {
                    block.default = Some(target);
                } else {
                    block.edges.push((label, target));
                }
                if cur.eat_sym(",") {
                    continue;
                }
                cur.expect_sym("]")?;
                break;
            }
        }
        blocks.push(block);
    }
    if blocks.is_empty() {
        return Err(SynthError::syntax(0, "FSM formula declares no states"));
    }

    // State ids in order of first mention.
    let mut ids: HashMap<&str, StateId> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut has_block: Vec<bool> = Vec::new();
    for block in &blocks {
        let id = intern(block.state, &mut ids, &mut names);
        if has_block.len() < names.len() {
            has_block.resize(names.len(), false);
        }
        if has_block[id as usize] {
            return Err(SynthError::DuplicateState(block.state.to_string()));
        }
        has_block[id as usize] = true;
        for (_, target) in &block.edges {
            intern(target, &mut ids, &mut names);
        }
        if let Some(target) = block.default {
            intern(target, &mut ids, &mut names);
        }
        has_block.resize(names.len(), false);
    }

    let width = events.len();
    let mut table: Vec<Vec<Option<StateId>>> = (0..names.len() as StateId)
        .map(|s| vec![Some(s); width])
        .collect();
    for block in &blocks {
        let s = ids[block.state] as usize;
        let fallback = block.default.map(|t| ids[t]);
        table[s] = vec![fallback; width];
        for &(label, target) in &block.edges {
            let e = events
                .id(label)
                .ok_or_else(|| SynthError::UnknownEvent(label.to_string()))?;
            table[s][e] = Some(ids[target]);
        }
    }

    let mut categories = vec![Category::Undetermined; names.len()];
    for (alias, targets) in &aliases {
        let category = Category::from_name(alias);
        for state in targets {
            let id = ids.get(state).ok_or_else(|| SynthError::UndeclaredAliasState {
                alias: alias.to_string(),
                state: state.to_string(),
            })?;
            categories[*id as usize] = category.clone();
        }
    }

    // The first block is the initial state; it always has id 0.
    debug_assert_eq!(ids[blocks[0].state], 0);
    Ok(MonitorTemplate::from_parts(events.clone(), names, table, categories, 0))
}

/// Event labels used in a formula, for cross-reference validation.
pub fn referenced_events(formula: &str) -> Result<Vec<String>, SynthError> {
    let tokens = tokenize(formula, SYMBOLS)?;
    let mut out = Vec::new();
    for window in tokens.windows(2) {
        if let (Tok::Ident(label), Tok::Sym("->")) = (&window[0].tok, &window[1].tok) {
            if *label != "default" {
                out.push(label.to_string());
            }
        }
    }
    Ok(out)
}
