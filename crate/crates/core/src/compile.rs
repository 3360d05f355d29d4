// SPDX-License-Identifier: Apache-2.0

//! Spec compilation: template synthesis plus the tables the engine needs.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::analysis::{self, CoenableTable, EnableTable, ParamSet};
use crate::logic::{self, Category, EventId, StateId, SynthError, Template};
use crate::spec::{validate_spec, ActionProgram, ActionScope, Diagnostic, Formalism, Position, Severity, Spec, VarKind};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("spec `{spec}`: {source}")]
    Synth {
        spec: String,
        #[source]
        source: SynthError,
    },
    #[error("spec `{spec}` is invalid: {}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { spec: String, diagnostics: Vec<Diagnostic> },
}

/// Builds the template for a spec's formula over its declared events.
pub fn synthesize(spec: &Spec) -> Result<Template, SynthError> {
    let events = spec.alphabet();
    Ok(match spec.formalism {
        Formalism::Fsm => Template::Automaton(logic::parse_fsm(&spec.formula, &events)?),
        Formalism::Ere => Template::Automaton(logic::compile_ere(&spec.formula, &events)?),
        Formalism::Ftltl => Template::Automaton(logic::compile_ftltl(&spec.formula, &events)?),
        Formalism::Ptltl => Template::Automaton(logic::compile_ptltl(&spec.formula, &events)?),
        Formalism::Cfg => Template::Derivative(logic::compile_cfg(&spec.formula, &events)?),
    })
}

/// A spec ready for monitoring.
#[derive(Debug)]
pub struct CompiledSpec {
    pub spec: Spec,
    /// Template with categories outside `handled` mapped to `Undetermined`.
    pub template: Template,
    pub handled: BTreeSet<Category>,
    /// Parameter indices bound by each event, by event id.
    pub event_params: Vec<Vec<usize>>,
    pub event_masks: Vec<ParamSet>,
    pub creation: Vec<bool>,
    pub positions: Vec<Position>,
    /// Checked action programs by event id.
    pub actions: Vec<Option<ActionProgram>>,
    pub enable: EnableTable,
    pub coenable: CoenableTable,
    /// Whether each automaton state is in a handled category.
    handled_states: Option<Vec<bool>>,
}

impl CompiledSpec {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn num_params(&self) -> usize {
        self.spec.parameters.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.spec.parameters.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn event_id(&self, name: &str) -> Option<EventId> {
        self.template.alphabet().id(name)
    }

    #[inline]
    pub fn is_handled(&self, state: StateId) -> bool {
        match &self.handled_states {
            Some(v) => v[state as usize],
            None => self.handled.contains(&self.template.category(state)),
        }
    }

    /// `synth --dump-enable` text.
    pub fn dump_tables(&self) -> String {
        let events: Vec<&str> = self.template.alphabet().names().collect();
        let states: Vec<String> = match &self.template {
            Template::Automaton(t) => t.states().map(|s| t.state_name(s).to_string()).collect(),
            Template::Derivative(_) => Vec::new(),
        };
        analysis::dump_tables(&self.enable, &self.coenable, &events, &states, &self.param_names())
    }
}

/// Validates and compiles a spec.
pub fn compile_spec(spec: Spec) -> Result<CompiledSpec, CompileError> {
    let errors: Vec<Diagnostic> = validate_spec(&spec)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(CompileError::Invalid {
            spec: spec.name.clone(),
            diagnostics: errors,
        });
    }
    let mut template = synthesize(&spec).map_err(|source| CompileError::Synth {
        spec: spec.name.clone(),
        source,
    })?;
    let handled = spec.handled_categories();
    template.restrict_categories(&handled);

    let alphabet = template.alphabet().clone();
    let decl = |e: EventId| spec.event(alphabet.name(e)).expect("alphabet comes from the declarations");
    let event_params: Vec<Vec<usize>> = alphabet
        .ids()
        .map(|e| {
            let mut idx: Vec<usize> = decl(e)
                .bound_params
                .iter()
                .filter_map(|p| spec.param_index(p))
                .collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    let event_masks: Vec<ParamSet> = event_params
        .iter()
        .map(|idx| idx.iter().fold(0, |m, i| m | (1 << i)))
        .collect();
    // no declared creation events: every event may create monitors
    let creation: Vec<bool> = alphabet
        .ids()
        .map(|e| spec.creation_events.is_empty() || spec.creation_events.contains(alphabet.name(e)))
        .collect();
    let positions = alphabet.ids().map(|e| decl(e).position).collect();

    let variables: BTreeMap<String, VarKind> = spec.variables.iter().map(|v| (v.name.clone(), v.kind)).collect();
    let actions = alphabet
        .ids()
        .map(|e| {
            spec.action(alphabet.name(e)).map(|(_, program)| {
                let params: BTreeSet<String> = decl(e).bound_params.iter().cloned().collect();
                program
                    .checked(&ActionScope {
                        variables: &variables,
                        params: &params,
                    })
                    .expect("validated above")
            })
        })
        .collect();

    let (enable, coenable, handled_states) = match &template {
        Template::Automaton(t) => (
            analysis::compute_enable_sets(t, &event_masks, &handled),
            analysis::compute_coenable_sets(t, &event_masks, &handled),
            Some(t.states().map(|s| handled.contains(t.category(s))).collect()),
        ),
        Template::Derivative(t) => (
            analysis::compute_enable_sets_cfg(t, &event_masks, &handled),
            analysis::compute_coenable_sets_cfg(t, &event_masks),
            None,
        ),
    };
    Ok(CompiledSpec {
        spec,
        template,
        handled,
        event_params,
        event_masks,
        creation,
        positions,
        actions,
        enable,
        coenable,
        handled_states,
    })
}
