// SPDX-License-Identifier: Apache-2.0

//! Specification documents.
//!
//! A spec is a JSON object:
//!
//! ```json
//! { "Name": "TOCTOU",
//!   "Description": "Detects TOCTOU...",
//!   "Parameters": [["file", "File"]],
//!   "Variables": {"checked_files": "set"},
//!   "Formalism": "fsm",
//!   "Formula": "s0 [use -> s1, check -> s2] ...",
//!   "Creation_Events": ["check"],
//!   "Events": {"After": {"check": [["os", "access"]], "use": [["builtins", "open"]]}},
//!   "Event_Actions": {"After": {"check": "self.checked_files.add(file)"}},
//!   "Handlers": {"Violation": "Security threat! {theta}"} }
//! ```
//!
//! An event given as a selector list binds every spec parameter. The
//! object form `{"selectors": [...], "params": [...], "args": {...}}` binds
//! a subset; `args` maps parameters to call-argument positions or keywords
//! for tracers. `Name` is optional.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::logic::{self, Alphabet, Category, SynthError};

pub mod action;

pub use action::{eval_action, ActionEnv, ActionError, ActionOutcome, ActionProgram, ActionScope, Value, VarStore};

/// Upper bound on spec parameters; bindings are fixed-width arrays.
pub const MAX_PARAMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formalism {
    Fsm,
    Ere,
    Ftltl,
    Ptltl,
    Cfg,
}

impl Formalism {
    pub fn parse(tag: &str) -> Option<Formalism> {
        Some(match tag.to_ascii_lowercase().as_str() {
            "fsm" => Formalism::Fsm,
            "ere" => Formalism::Ere,
            "ltl" | "ftltl" | "fltl" => Formalism::Ftltl,
            "ptltl" | "pltl" => Formalism::Ptltl,
            "cfg" => Formalism::Cfg,
            _ => return None,
        })
    }

    pub fn tag(self) -> &'static str {
        match self {
            Formalism::Fsm => "fsm",
            Formalism::Ere => "ere",
            Formalism::Ftltl => "ftltl",
            Formalism::Ptltl => "ptltl",
            Formalism::Cfg => "cfg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    Before,
    After,
}

impl Position {
    pub fn parse(s: &str) -> Option<Position> {
        match s.to_ascii_lowercase().as_str() {
            "before" => Some(Position::Before),
            "after" => Some(Position::After),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Position::Before => "Before",
            Position::After => "After",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Set,
    Counter,
    Map,
}

impl VarKind {
    pub fn parse(s: &str) -> Option<VarKind> {
        match s.to_ascii_lowercase().as_str() {
            "set" => Some(VarKind::Set),
            "counter" | "int" => Some(VarKind::Counter),
            "map" | "dict" => Some(VarKind::Map),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VarKind::Set => "set",
            VarKind::Counter => "counter",
            VarKind::Map => "map",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateVarDecl {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDecl {
    pub name: String,
    /// `(module-path, callable-name)` match keys, opaque to the engine.
    pub selectors: Vec<(String, String)>,
    pub position: Position,
    pub bound_params: Vec<String>,
    /// Parameter to call-argument mapping for tracers.
    pub args: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spec {
    pub name: String,
    pub description: String,
    pub formalism: Formalism,
    pub formula: String,
    /// `(name, type-tag)` in declaration order.
    pub parameters: Vec<(String, String)>,
    pub variables: Vec<StateVarDecl>,
    pub events: Vec<EventDecl>,
    pub creation_events: BTreeSet<String>,
    pub actions: BTreeMap<Position, BTreeMap<String, ActionProgram>>,
    /// Category name to message template.
    pub handlers: BTreeMap<String, String>,
}

impl Spec {
    pub fn event(&self, name: &str) -> Option<&EventDecl> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|(p, _)| p == name)
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.events.iter().map(|e| e.name.as_str()))
    }

    /// Categories with a handler.
    pub fn handled_categories(&self) -> BTreeSet<Category> {
        self.handlers.keys().map(|k| Category::from_name(k)).collect()
    }

    /// The action attached to an event, whatever its position key.
    pub fn action(&self, event: &str) -> Option<(Position, &ActionProgram)> {
        self.actions
            .iter()
            .find_map(|(pos, m)| m.get(event).map(|p| (*pos, p)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagCode {
    NoEvents,
    DuplicateEvent,
    EmptySelectors,
    NoBoundParameters,
    DuplicateParameter,
    TooManyParameters,
    UndeclaredParameter,
    DuplicateVariable,
    UndeclaredVariable,
    UnknownCreationEvent,
    UndeclaredEvent,
    FormulaError,
    ActionSyntax,
    ActionTypeError,
    ActionPositionMismatch,
    UnusedHandler,
    NoHandlers,
    UnknownKey,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A validation finding with a code and a location path into the document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn error(code: DiagCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    fn warning(code: DiagCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(code, location, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}[{}] at {}: {}", self.code, self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("spec syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("spec schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown formalism `{0}`")]
    UnknownFormalism(String),
    #[error("invalid spec: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot read spec {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn schema(path: &str, message: impl Into<String>) -> SpecError {
    SpecError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn as_str<'a>(v: &'a Json, path: &str) -> Result<&'a str, SpecError> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn as_object<'a>(v: &'a Json, path: &str) -> Result<&'a Map<String, Json>, SpecError> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Json, path: &str) -> Result<&'a Vec<Json>, SpecError> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn string_pair(v: &Json, path: &str) -> Result<(String, String), SpecError> {
    match as_array(v, path)?.as_slice() {
        [a, b] => Ok((as_str(a, path)?.to_string(), as_str(b, path)?.to_string())),
        _ => Err(schema(path, "expected a two-element array")),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "Name",
    "Description",
    "Parameters",
    "Variables",
    "Formalism",
    "Formula",
    "Creation_Events",
    "Events",
    "Event_Actions",
    "Handlers",
];

/// Parses a spec document and validates it. Warnings are logged; use
/// [`parse_spec_document`] to receive them.
pub fn parse_spec(text: &str) -> Result<Spec, SpecError> {
    let (spec, warnings) = parse_spec_document(text)?;
    for w in warnings {
        log::warn!("spec {}: {w}", spec.name);
    }
    Ok(spec)
}

/// Reads a spec file. A document without `Name` is named after the file.
pub fn load_spec(path: &Path) -> Result<Spec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (mut spec, warnings) = parse_spec_document(&text)?;
    if !text_has_name(&text) {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            spec.name = stem.to_string();
        }
    }
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(spec)
}

fn text_has_name(text: &str) -> bool {
    serde_json::from_str::<Json>(text)
        .ok()
        .and_then(|v| v.get("Name").cloned())
        .is_some()
}

/// Parses and validates; returns the spec with its warnings, or the errors.
pub fn parse_spec_document(text: &str) -> Result<(Spec, Vec<Diagnostic>), SpecError> {
    let doc: Json = serde_json::from_str(text).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = as_object(&doc, "$")?;
    let mut warnings = Vec::new();
    for key in root.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            warnings.push(Diagnostic::warning(DiagCode::UnknownKey, key.clone(), format!("unknown key `{key}` ignored")));
        }
    }
    let get = |k: &str| root.get(k);
    let required = |k: &str| get(k).ok_or_else(|| schema(k, "missing required key"));

    let name = match get("Name") {
        Some(v) => as_str(v, "Name")?.to_string(),
        None => "spec".to_string(),
    };
    let description = match get("Description") {
        Some(v) => as_str(v, "Description")?.to_string(),
        None => String::new(),
    };
    let tag = as_str(required("Formalism")?, "Formalism")?;
    let formalism = Formalism::parse(tag).ok_or_else(|| SpecError::UnknownFormalism(tag.to_string()))?;
    let formula = as_str(required("Formula")?, "Formula")?.to_string();

    let parameters = as_array(required("Parameters")?, "Parameters")?
        .iter()
        .enumerate()
        .map(|(i, p)| string_pair(p, &format!("Parameters[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;

    let mut variables = Vec::new();
    if let Some(v) = get("Variables") {
        for (k, kind) in as_object(v, "Variables")? {
            let path = format!("Variables.{k}");
            let kind = VarKind::parse(as_str(kind, &path)?)
                .ok_or_else(|| schema(&path, "variable kind must be set, counter or map"))?;
            variables.push(StateVarDecl { name: k.clone(), kind });
        }
    }

    let mut creation_events = BTreeSet::new();
    if let Some(v) = get("Creation_Events") {
        for (i, e) in as_array(v, "Creation_Events")?.iter().enumerate() {
            creation_events.insert(as_str(e, &format!("Creation_Events[{i}]"))?.to_string());
        }
    }

    let all_params: Vec<String> = parameters.iter().map(|(p, _)| p.clone()).collect();
    let mut events = Vec::new();
    for (pos_key, block) in as_object(required("Events")?, "Events")? {
        let position = Position::parse(pos_key)
            .ok_or_else(|| schema(&format!("Events.{pos_key}"), "position must be Before or After"))?;
        for (ev, body) in as_object(block, &format!("Events.{pos_key}"))? {
            let path = format!("Events.{pos_key}.{ev}");
            events.push(parse_event(ev, position, body, &path, &all_params)?);
        }
    }

    let mut actions: BTreeMap<Position, BTreeMap<String, ActionProgram>> = BTreeMap::new();
    if let Some(v) = get("Event_Actions") {
        for (pos_key, block) in as_object(v, "Event_Actions")? {
            let path = format!("Event_Actions.{pos_key}");
            let position =
                Position::parse(pos_key).ok_or_else(|| schema(&path, "position must be Before or After"))?;
            for (ev, src) in as_object(block, &path)? {
                let path = format!("{path}.{ev}");
                let program = ActionProgram::parse(as_str(src, &path)?).map_err(|e| schema(&path, e.to_string()))?;
                actions.entry(position).or_default().insert(ev.clone(), program);
            }
        }
    }

    let mut handlers = BTreeMap::new();
    if let Some(v) = get("Handlers") {
        for (k, msg) in as_object(v, "Handlers")? {
            handlers.insert(k.clone(), as_str(msg, &format!("Handlers.{k}"))?.to_string());
        }
    }

    let spec = Spec {
        name,
        description,
        formalism,
        formula,
        parameters,
        variables,
        events,
        creation_events,
        actions,
        handlers,
    };
    let (errors, more): (Vec<_>, Vec<_>) = validate_spec(&spec)
        .into_iter()
        .partition(|d| d.severity == Severity::Error);
    if !errors.is_empty() {
        return Err(SpecError::Invalid(errors));
    }
    warnings.extend(more);
    Ok((spec, warnings))
}

fn parse_event(name: &str, position: Position, body: &Json, path: &str, all_params: &[String]) -> Result<EventDecl, SpecError> {
    let selectors_of = |v: &Json, path: &str| -> Result<Vec<(String, String)>, SpecError> {
        as_array(v, path)?
            .iter()
            .enumerate()
            .map(|(i, s)| string_pair(s, &format!("{path}[{i}]")))
            .collect()
    };
    if body.is_array() {
        return Ok(EventDecl {
            name: name.to_string(),
            selectors: selectors_of(body, path)?,
            position,
            bound_params: all_params.to_vec(),
            args: BTreeMap::new(),
        });
    }
    let obj = as_object(body, path)?;
    let selectors = match obj.get("selectors") {
        Some(v) => selectors_of(v, &format!("{path}.selectors"))?,
        None => Vec::new(),
    };
    let bound_params = match obj.get("params") {
        Some(v) => as_array(v, &format!("{path}.params"))?
            .iter()
            .map(|p| as_str(p, &format!("{path}.params")).map(str::to_string))
            .collect::<Result<_, _>>()?,
        None => all_params.to_vec(),
    };
    let mut args = BTreeMap::new();
    if let Some(v) = obj.get("args") {
        for (k, a) in as_object(v, &format!("{path}.args"))? {
            let a = match a {
                Json::Number(n) => n.to_string(),
                other => as_str(other, &format!("{path}.args.{k}"))?.to_string(),
            };
            args.insert(k.clone(), a);
        }
    }
    Ok(EventDecl {
        name: name.to_string(),
        selectors,
        position,
        bound_params,
        args,
    })
}

/// Renders a spec as a document that [`parse_spec`] maps back to it.
pub fn serialize_spec(spec: &Spec) -> String {
    let all_params: Vec<String> = spec.parameters.iter().map(|(p, _)| p.clone()).collect();
    let mut events: BTreeMap<Position, Map<String, Json>> = BTreeMap::new();
    for e in &spec.events {
        let selectors: Vec<Json> = e.selectors.iter().map(|(m, c)| json!([m, c])).collect();
        let body = if e.bound_params == all_params && e.args.is_empty() {
            Json::Array(selectors)
        } else {
            let mut o = Map::new();
            o.insert("selectors".into(), Json::Array(selectors));
            o.insert("params".into(), json!(e.bound_params));
            if !e.args.is_empty() {
                o.insert("args".into(), json!(e.args));
            }
            Json::Object(o)
        };
        events.entry(e.position).or_default().insert(e.name.clone(), body);
    }
    let mut doc = Map::new();
    doc.insert("Name".into(), json!(spec.name));
    doc.insert("Description".into(), json!(spec.description));
    doc.insert(
        "Parameters".into(),
        Json::Array(spec.parameters.iter().map(|(p, t)| json!([p, t])).collect()),
    );
    let vars: Map<String, Json> = spec
        .variables
        .iter()
        .map(|v| (v.name.clone(), json!(v.kind.name())))
        .collect();
    doc.insert("Variables".into(), Json::Object(vars));
    doc.insert("Formalism".into(), json!(spec.formalism.tag()));
    doc.insert("Formula".into(), json!(spec.formula));
    doc.insert("Creation_Events".into(), json!(spec.creation_events));
    doc.insert(
        "Events".into(),
        Json::Object(
            events
                .into_iter()
                .map(|(p, m)| (p.name().to_string(), Json::Object(m)))
                .collect(),
        ),
    );
    let actions: Map<String, Json> = spec
        .actions
        .iter()
        .map(|(p, m)| {
            let m: Map<String, Json> = m.iter().map(|(e, a)| (e.clone(), json!(a.source()))).collect();
            (p.name().to_string(), Json::Object(m))
        })
        .collect();
    doc.insert("Event_Actions".into(), Json::Object(actions));
    doc.insert("Handlers".into(), json!(spec.handlers));
    serde_json::to_string_pretty(&Json::Object(doc)).expect("spec documents always serialize")
}

/// Event names a formula mentions, per formalism.
fn formula_events(spec: &Spec) -> Result<Vec<String>, SynthError> {
    match spec.formalism {
        Formalism::Fsm => logic::fsm::referenced_events(&spec.formula),
        Formalism::Ere => logic::ere::referenced_events(&spec.formula),
        Formalism::Ftltl => logic::ftltl::referenced_events(&spec.formula),
        Formalism::Ptltl => logic::ptltl::referenced_events(&spec.formula),
        Formalism::Cfg => logic::cfg::referenced_events(&spec.formula),
    }
}

/// Cross-reference and formula checks. Empty iff the spec is clean.
pub fn validate_spec(spec: &Spec) -> Vec<Diagnostic> {
    use DiagCode::*;
    let mut out = Vec::new();
    let event_names: BTreeSet<&str> = spec.events.iter().map(|e| e.name.as_str()).collect();
    let param_names: BTreeSet<&str> = spec.parameters.iter().map(|(p, _)| p.as_str()).collect();

    if spec.events.is_empty() {
        out.push(Diagnostic::error(NoEvents, "Events", "spec declares no events"));
    }
    if spec.parameters.len() > MAX_PARAMS {
        out.push(Diagnostic::error(
            TooManyParameters,
            "Parameters",
            format!("{} parameters exceed the limit of {MAX_PARAMS}", spec.parameters.len()),
        ));
    }
    let mut seen = BTreeSet::new();
    for (i, (p, _)) in spec.parameters.iter().enumerate() {
        if !seen.insert(p) {
            out.push(Diagnostic::error(DuplicateParameter, format!("Parameters[{i}]"), format!("parameter `{p}` declared twice")));
        }
    }
    let mut seen = BTreeSet::new();
    for v in &spec.variables {
        if !seen.insert(&v.name) {
            out.push(Diagnostic::error(DuplicateVariable, format!("Variables.{}", v.name), format!("variable `{}` declared twice", v.name)));
        }
    }
    let mut seen = BTreeSet::new();
    for e in &spec.events {
        let loc = format!("Events.{}.{}", e.position.name(), e.name);
        if !seen.insert(&e.name) {
            out.push(Diagnostic::error(DuplicateEvent, &loc, format!("event `{}` declared twice", e.name)));
        }
        if e.selectors.is_empty() {
            out.push(Diagnostic::error(EmptySelectors, &loc, "event has no selectors"));
        }
        if e.bound_params.is_empty() && !spec.parameters.is_empty() {
            out.push(Diagnostic::error(NoBoundParameters, &loc, "event binds no parameters"));
        }
        for p in e.bound_params.iter().chain(e.args.keys()) {
            if !param_names.contains(p.as_str()) {
                out.push(Diagnostic::error(UndeclaredParameter, &loc, format!("parameter `{p}` is not declared")));
            }
        }
    }
    for c in &spec.creation_events {
        if !event_names.contains(c.as_str()) {
            out.push(Diagnostic::error(UnknownCreationEvent, "Creation_Events", format!("creation event `{c}` is not declared")));
        }
    }

    let variables: BTreeMap<String, VarKind> = spec.variables.iter().map(|v| (v.name.clone(), v.kind)).collect();
    for (position, programs) in &spec.actions {
        for (ev, program) in programs {
            let loc = format!("Event_Actions.{}.{ev}", position.name());
            let Some(decl) = spec.event(ev) else {
                out.push(Diagnostic::error(UndeclaredEvent, &loc, format!("action for undeclared event `{ev}`")));
                continue;
            };
            if decl.position != *position {
                out.push(Diagnostic::error(
                    ActionPositionMismatch,
                    &loc,
                    format!("event `{ev}` is declared {}", decl.position.name()),
                ));
            }
            let params: BTreeSet<String> = decl.bound_params.iter().cloned().collect();
            let scope = ActionScope {
                variables: &variables,
                params: &params,
            };
            if let Err(e) = program.checked(&scope) {
                let code = match e {
                    ActionError::Syntax { .. } => ActionSyntax,
                    ActionError::UndeclaredVariable(_) => UndeclaredVariable,
                    ActionError::UndeclaredParameter(_) => UndeclaredParameter,
                    ActionError::Type(_) | ActionError::Runtime(_) => ActionTypeError,
                };
                out.push(Diagnostic::error(code, &loc, e.to_string()));
            }
        }
    }

    match formula_events(spec) {
        Err(e) => out.push(Diagnostic::error(FormulaError, "Formula", e.to_string())),
        Ok(used) => {
            let undeclared: BTreeSet<&String> = used.iter().filter(|e| !event_names.contains(e.as_str())).collect();
            for e in &undeclared {
                out.push(Diagnostic::error(UndeclaredEvent, "Formula", format!("formula uses undeclared event `{e}`")));
            }
            if undeclared.is_empty() && !spec.events.is_empty() {
                match crate::compile::synthesize(spec) {
                    Err(e) => out.push(Diagnostic::error(FormulaError, "Formula", e.to_string())),
                    Ok(template) => {
                        let produced = template.produced_categories();
                        for h in spec.handlers.keys() {
                            if !produced.contains(&Category::from_name(h)) {
                                out.push(Diagnostic::warning(
                                    UnusedHandler,
                                    format!("Handlers.{h}"),
                                    format!("the formula never yields category `{h}`"),
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    if spec.handlers.is_empty() {
        out.push(Diagnostic::warning(NoHandlers, "Handlers", "no handlers: nothing will be reported"));
    }
    out
}
