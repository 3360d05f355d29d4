// SPDX-License-Identifier: Apache-2.0

//! Monitoring sessions: event dispatch, state-variable actions and the
//! parametric algorithms.

pub mod binding;
mod offline;
mod online;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub use binding::{Binding, ObjRef, ObjectTable};
pub use offline::{OfflineHit, OfflineSlicer};
pub use online::{EventCounters, OnlineKind, OnlineMonitor, OnlineStats, DEAD};

use crate::compile::CompiledSpec;
use crate::logic::{StateId, Template};
use crate::report::{expand_message, Report, SpecStats, Summary, ViolationRecord};
use crate::spec::{eval_action, ActionEnv, ActionOutcome, Value, VarStore};
use crate::trace::{DeathRecord, EventRecord, TraceRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Offline: slice the whole trace, then check each slice.
    A,
    B,
    C,
    CPlus,
    #[default]
    D,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::A, Algorithm::B, Algorithm::C, Algorithm::CPlus, Algorithm::D];

    pub fn is_online(self) -> bool {
        self != Algorithm::A
    }

    fn online_kind(self) -> Option<OnlineKind> {
        Some(match self {
            Algorithm::A => return None,
            Algorithm::B => OnlineKind::B,
            Algorithm::C => OnlineKind::C,
            Algorithm::CPlus => OnlineKind::CPlus,
            Algorithm::D => OnlineKind::D,
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::A => "A",
            Algorithm::B => "B",
            Algorithm::C => "C",
            Algorithm::CPlus => "C+",
            Algorithm::D => "D",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Algorithm::A),
            "B" => Ok(Algorithm::B),
            "C" => Ok(Algorithm::C),
            "C+" | "CPLUS" | "C-PLUS" => Ok(Algorithm::CPlus),
            "D" => Ok(Algorithm::D),
            _ => Err(format!("unknown algorithm `{s}` (expected A, B, C, C+ or D)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EngineConfig {
    pub algorithm: Algorithm,
    /// Collect monitors that can no longer reach a handled state.
    pub mgc: bool,
    /// Maximum slice length for the offline algorithm.
    pub slice_cap: Option<usize>,
}

enum Engine {
    Online(OnlineMonitor),
    Offline {
        slicer: OfflineSlicer,
        /// `(event name, seq, source)` of every event fed to the slicer.
        events: Vec<(String, u64, Option<(String, u32)>)>,
    },
}

struct SpecRun {
    spec: Arc<CompiledSpec>,
    params: Vec<String>,
    engine: Engine,
    store: VarStore,
    stats: SpecStats,
}

/// One monitoring run over a trace, for a set of compiled specs.
pub struct Session {
    config: EngineConfig,
    runs: Vec<SpecRun>,
    objects: ObjectTable,
    records: Vec<ViolationRecord>,
    events: u64,
    deaths: u64,
    malformed: u64,
    started: Instant,
    hits: Vec<(Binding, StateId)>,
}

impl Session {
    pub fn new(specs: Vec<Arc<CompiledSpec>>, config: EngineConfig) -> Session {
        let runs = specs
            .into_iter()
            .map(|spec| {
                let engine = match config.algorithm.online_kind() {
                    Some(kind) => Engine::Online(OnlineMonitor::new(kind, &spec, config.mgc)),
                    None => Engine::Offline {
                        slicer: OfflineSlicer::new(config.slice_cap),
                        events: Vec::new(),
                    },
                };
                let store = VarStore::new(spec.spec.variables.iter().map(|v| (v.name.as_str(), v.kind)));
                SpecRun {
                    params: spec.param_names(),
                    stats: SpecStats {
                        spec: spec.name().to_string(),
                        ..Default::default()
                    },
                    spec,
                    engine,
                    store,
                }
            })
            .collect();
        Session {
            config,
            runs,
            objects: ObjectTable::default(),
            records: Vec::new(),
            events: 0,
            deaths: 0,
            malformed: 0,
            started: Instant::now(),
            hits: Vec::new(),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn objects(&self) -> &ObjectTable {
        &self.objects
    }

    /// Records produced so far; the offline algorithm adds its records only
    /// in [`Session::finish`].
    pub fn records(&self) -> &[ViolationRecord] {
        &self.records
    }

    /// The online monitor of the `i`-th spec.
    pub fn online(&self, i: usize) -> Option<&OnlineMonitor> {
        match &self.runs.get(i)?.engine {
            Engine::Online(m) => Some(m),
            Engine::Offline { .. } => None,
        }
    }

    pub fn stats(&self, i: usize) -> Option<SpecStats> {
        self.runs.get(i).map(|r| self.spec_stats(r))
    }

    /// Offline slices of the `i`-th spec as `(theta, events, final category)`.
    pub fn offline_slices(&self, i: usize) -> Option<Vec<(String, Vec<String>, String)>> {
        let run = self.runs.get(i)?;
        let Engine::Offline { slicer, .. } = &run.engine else {
            return None;
        };
        let template = &run.spec.template;
        Some(
            slicer
                .slices()
                .map(|(b, events)| {
                    let state = events.iter().fold(template.initial(), |s, &e| template.next(s, e));
                    (
                        self.objects.render(&b, &run.params),
                        events.iter().map(|&e| template.alphabet().name(e).to_string()).collect(),
                        template.category(state).name().to_string(),
                    )
                })
                .collect(),
        )
    }

    pub fn note_malformed(&mut self) {
        self.malformed += 1;
    }

    pub fn process(&mut self, record: &TraceRecord) {
        match record {
            TraceRecord::Meta(_) => {}
            TraceRecord::Event(e) => self.process_event(e),
            TraceRecord::Death(d) => self.process_death(d),
        }
    }

    /// The binding an event would produce for the `i`-th spec, interning
    /// its objects.
    pub fn binding_for(&mut self, i: usize, ev: &EventRecord) -> Option<Binding> {
        let run = self.runs.get(i)?;
        let e = run.spec.event_id(&ev.name)?;
        let mut pairs = Vec::new();
        for &p in &run.spec.event_params[e] {
            let token = ev.params.get(&run.params[p])?;
            pairs.push((p, self.objects.intern(token)));
        }
        Some(Binding::from_pairs(pairs))
    }

    pub fn process_event(&mut self, ev: &EventRecord) {
        self.events += 1;
        let mut fields: Option<BTreeMap<String, Value>> = None;
        for run in &mut self.runs {
            let spec = &run.spec;
            let Some(e) = spec.event_id(&ev.name) else {
                continue;
            };
            if ev.pos.is_some_and(|p| p != spec.positions[e]) {
                continue;
            }
            if run.stats.aborted.is_some() {
                continue;
            }
            run.stats.events += 1;

            let mut pairs = Vec::with_capacity(spec.event_params[e].len());
            let mut usable = true;
            for &p in &spec.event_params[e] {
                match ev.params.get(&run.params[p]) {
                    Some(token) => {
                        let o = self.objects.intern(token);
                        usable &= self.objects.is_alive(o);
                        pairs.push((p, o));
                    }
                    None => usable = false,
                }
            }
            if !usable {
                run.stats.skipped += 1;
                continue;
            }
            let theta = Binding::from_pairs(pairs);

            if let Some(program) = &spec.actions[e] {
                let fields = fields.get_or_insert_with(|| ev.fields.iter().map(|(k, v)| (k.clone(), v.to_value())).collect());
                let env = ActionEnv {
                    params: theta
                        .objects()
                        .map(|(p, o)| (run.params[p].as_str(), Value::Obj(self.objects.object(o).token().into())))
                        .collect(),
                    fields: Some(fields),
                };
                match eval_action(program, &mut run.store, &env) {
                    Ok(ActionOutcome::Proceed) => {}
                    Ok(ActionOutcome::Suppress) => {
                        run.stats.suppressed += 1;
                        continue;
                    }
                    Err(err) => {
                        log::error!("spec `{}`: action on `{}` failed at seq {}: {err}; spec disabled", spec.name(), ev.name, ev.seq);
                        run.stats.aborted = Some(err.to_string());
                        continue;
                    }
                }
            }

            match &mut run.engine {
                Engine::Online(monitor) => {
                    self.hits.clear();
                    monitor.process(spec, e, theta, &mut self.hits);
                    for (b, state) in self.hits.drain(..) {
                        self.records.push(make_record(
                            spec,
                            &self.objects,
                            &run.params,
                            b,
                            state,
                            &ev.name,
                            ev.seq,
                            ev.src.clone(),
                        ));
                        run.stats.records += 1;
                    }
                }
                Engine::Offline { slicer, events } => {
                    slicer.push(e, theta);
                    events.push((ev.name.clone(), ev.seq, ev.src.clone()));
                }
            }
        }
    }

    pub fn process_death(&mut self, d: &DeathRecord) {
        self.deaths += 1;
        let mut dead = Vec::with_capacity(d.objects.len());
        for token in &d.objects {
            match self.objects.lookup(token) {
                Some(o) if self.objects.kill(o) => dead.push(o),
                Some(_) => {}
                None => log::debug!("death of unseen object `{token}` ignored"),
            }
        }
        for run in &mut self.runs {
            if let Engine::Online(monitor) = &mut run.engine {
                monitor.on_death(&run.spec, &self.objects, &dead);
            }
        }
    }

    fn spec_stats(&self, run: &SpecRun) -> SpecStats {
        let mut st = run.stats.clone();
        match &run.engine {
            Engine::Online(m) => {
                let s = m.stats();
                st.monitors_created = s.monitors_created;
                st.tombstones = s.tombstones;
                st.peak_live = s.peak_live;
                st.collected = s.collected;
                st.instance_visits = s.instance_visits;
                st.theta_scans = s.theta_scans;
            }
            Engine::Offline { slicer, .. } => {
                st.monitors_created = slicer.instances() as u64 - 1;
                st.peak_live = slicer.instances() as u64;
                st.truncated = slicer.truncated();
            }
        }
        st
    }

    pub fn finish(mut self) -> Report {
        for run in &mut self.runs {
            if let Engine::Offline { slicer, events } = &run.engine {
                if slicer.truncated() > 0 {
                    log::warn!(
                        "spec `{}`: {} slice events dropped by the slice cap",
                        run.spec.name(),
                        slicer.truncated()
                    );
                }
                let (hits, _) = slicer.replay(&run.spec);
                for h in hits {
                    let (name, seq, src) = &events[h.event];
                    self.records.push(make_record(
                        &run.spec,
                        &self.objects,
                        &run.params,
                        h.binding,
                        h.state,
                        name,
                        *seq,
                        src.clone(),
                    ));
                    run.stats.records += 1;
                }
            }
        }
        if self.config.algorithm == Algorithm::A {
            self.records.sort_by_key(|r| r.seq);
        }
        let specs = self.runs.iter().map(|r| self.spec_stats(r)).collect();
        Report {
            records: self.records,
            summary: Summary {
                algorithm: self.config.algorithm.to_string(),
                mgc: self.config.mgc,
                events: self.events,
                deaths: self.deaths,
                malformed: self.malformed,
                elapsed_ms: self.started.elapsed().as_secs_f64() * 1e3,
                specs,
            },
        }
    }
}

fn state_name(template: &Template, state: StateId) -> String {
    match template {
        Template::Automaton(t) => t.state_name(state).to_string(),
        Template::Derivative(_) => format!("q{state}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    spec: &CompiledSpec,
    objects: &ObjectTable,
    params: &[String],
    b: Binding,
    state: StateId,
    event: &str,
    seq: u64,
    src: Option<(String, u32)>,
) -> ViolationRecord {
    let category = spec.template.category(state);
    let theta = objects.render(&b, params);
    let seq_text = seq.to_string();
    let bound: Vec<(usize, &str)> = b.objects().map(|(p, o)| (p, objects.object(o).token())).collect();
    let mut vars: Vec<(&str, &str)> = vec![
        ("spec", spec.name()),
        ("category", category.name()),
        ("theta", &theta),
        ("event", event),
        ("seq", &seq_text),
    ];
    vars.extend(bound.iter().map(|(p, t)| (params[*p].as_str(), *t)));
    let message = spec
        .spec
        .handlers
        .get(category.name())
        .map(|t| expand_message(t, &vars))
        .unwrap_or_default();
    ViolationRecord {
        spec: spec.name().to_string(),
        category: category.name().to_string(),
        state: state_name(&spec.template, state),
        theta: theta.clone(),
        event: event.to_string(),
        seq,
        src,
        message,
    }
}

/// Feeds a whole trace through a fresh session.
pub fn run_trace(specs: Vec<Arc<CompiledSpec>>, config: EngineConfig, records: &[TraceRecord]) -> Report {
    let mut session = Session::new(specs, config);
    for r in records {
        session.process(r);
    }
    session.finish()
}
