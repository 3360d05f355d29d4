// SPDX-License-Identifier: Apache-2.0

//! Online monitoring over a map from parameter instances to monitor states.

use std::collections::{HashMap, HashSet};

use super::binding::{Binding, ObjRef, ObjectTable, Submasks};
use crate::analysis::ParamSet;
use crate::compile::CompiledSpec;
use crate::logic::{EventId, StateId};

/// Slot value of a tombstone: an instance known never to report.
pub const DEAD: StateId = StateId::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OnlineKind {
    /// Full scan of the instance set per event.
    B,
    /// Indexed lookups.
    C,
    /// Indexed, fresh monitors only on creation events.
    CPlus,
    /// `CPlus` plus enable-set pruning.
    D,
}

/// Work done for the most recent event.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventCounters {
    /// Existing instances transitioned.
    pub visits: u64,
    /// Instances inspected by a linear scan.
    pub scanned: u64,
    /// Instances added, tombstones included.
    pub inserted: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OnlineStats {
    pub monitors_created: u64,
    pub tombstones: u64,
    pub live: u64,
    pub peak_live: u64,
    pub collected: u64,
    pub instance_visits: u64,
    pub theta_scans: u64,
}

pub struct OnlineMonitor {
    kind: OnlineKind,
    mgc: bool,
    num_params: usize,
    delta: HashMap<Binding, StateId>,
    /// Instance set in insertion order, kept for the scanning variant.
    theta: Vec<Binding>,
    /// `(domain, projection onto a proper subdomain)` to instances.
    index: HashMap<(ParamSet, Binding), Vec<Binding>>,
    domains: Vec<ParamSet>,
    present: Vec<bool>,
    submasks: Submasks,
    stats: OnlineStats,
    last: EventCounters,
    candidates: Vec<Binding>,
    seen: HashSet<Binding>,
    updates: Vec<Binding>,
    fresh: Vec<(Binding, StateId)>,
}

impl OnlineMonitor {
    pub fn new(kind: OnlineKind, spec: &CompiledSpec, mgc: bool) -> Self {
        let n = spec.num_params();
        let mut m = OnlineMonitor {
            kind,
            mgc,
            num_params: n,
            delta: HashMap::new(),
            theta: Vec::new(),
            index: HashMap::new(),
            domains: Vec::new(),
            present: vec![false; 1 << n],
            submasks: Submasks::new(n),
            stats: OnlineStats::default(),
            last: EventCounters::default(),
            candidates: Vec::new(),
            seen: HashSet::new(),
            updates: Vec::new(),
            fresh: Vec::new(),
        };
        // with every event a creation event, C+ and D start like C
        if matches!(kind, OnlineKind::B | OnlineKind::C) || spec.creation.iter().all(|c| *c) {
            m.insert(Binding::BOTTOM, spec.template.initial());
            m.stats.live = 1;
            m.stats.peak_live = 1;
        }
        m
    }

    pub fn kind(&self) -> OnlineKind {
        self.kind
    }

    pub fn stats(&self) -> &OnlineStats {
        &self.stats
    }

    pub fn last_counters(&self) -> EventCounters {
        self.last
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// Every instance with its state, `None` for tombstones.
    pub fn instances(&self) -> impl Iterator<Item = (Binding, Option<StateId>)> + '_ {
        self.delta.iter().map(|(b, s)| (*b, (*s != DEAD).then_some(*s)))
    }

    pub fn state_of(&self, b: &Binding) -> Option<Option<StateId>> {
        self.delta.get(b).map(|s| (*s != DEAD).then_some(*s))
    }

    fn insert(&mut self, b: Binding, state: StateId) {
        self.delta.insert(b, state);
        let d = b.mask();
        if !self.present[d as usize] {
            self.present[d as usize] = true;
            self.domains.push(d);
        }
        if self.kind == OnlineKind::B {
            self.theta.push(b);
            return;
        }
        for &s in self.submasks.proper(d) {
            self.index.entry((d, b.project(s))).or_default().push(b);
        }
    }

    /// The most informative instance strictly below `b`.
    fn max_below(&self, b: &Binding) -> Option<(ParamSet, StateId)> {
        self.submasks
            .proper(b.mask())
            .iter()
            .filter(|s| self.present[**s as usize])
            .find_map(|&s| self.delta.get(&b.project(s)).map(|st| (s, *st)))
    }

    fn kill(&mut self, b: &Binding) {
        if let Some(s) = self.delta.get_mut(b) {
            if *s != DEAD {
                *s = DEAD;
                self.stats.live -= 1;
                self.stats.collected += 1;
            }
        }
    }

    /// Processes `e⟨theta⟩`, pushing every instance that entered a handled
    /// state.
    pub fn process(&mut self, spec: &CompiledSpec, e: EventId, theta: Binding, hits: &mut Vec<(Binding, StateId)>) {
        let creation = match self.kind {
            OnlineKind::B | OnlineKind::C => true,
            OnlineKind::CPlus | OnlineKind::D => spec.creation[e],
        };
        let m = theta.mask();
        let mut counters = EventCounters::default();
        self.candidates.clear();
        self.seen.clear();
        self.updates.clear();
        self.fresh.clear();

        match self.kind {
            OnlineKind::B => {
                counters.scanned = self.theta.len() as u64;
                for rho in &self.theta {
                    if !rho.compatible(&theta) {
                        continue;
                    }
                    let t = theta.combine(rho);
                    if t == *rho {
                        self.updates.push(t);
                    } else if !self.delta.contains_key(&t) && self.seen.insert(t) {
                        self.candidates.push(t);
                    }
                }
            }
            _ => {
                for &d in &self.domains {
                    let common = d & m;
                    if common == d {
                        let rho = theta.project(d);
                        if d != m && self.delta.contains_key(&rho) && !self.delta.contains_key(&theta) && self.seen.insert(theta) {
                            self.candidates.push(theta);
                        }
                    } else if let Some(list) = self.index.get(&(d, theta.project(common))) {
                        if common == m {
                            self.updates.extend_from_slice(list);
                            continue;
                        }
                        for rho in list {
                            let t = theta.combine(rho);
                            if !self.delta.contains_key(&t) && self.seen.insert(t) {
                                self.candidates.push(t);
                            }
                        }
                    }
                }
                if self.delta.contains_key(&theta) {
                    self.updates.push(theta);
                } else if creation && self.seen.insert(theta) {
                    self.candidates.push(theta);
                }
            }
        }

        // New instances read pre-event states.
        let template = &spec.template;
        for t in &self.candidates {
            let (src_dom, src) = match self.max_below(t) {
                Some(found) => found,
                None if creation => (0, template.initial()),
                None => continue,
            };
            let state = if src == DEAD || (self.kind == OnlineKind::D && !spec.enable.allows(e, src_dom)) {
                DEAD
            } else {
                template.next(src, e)
            };
            self.fresh.push((*t, state));
        }

        counters.visits = self.updates.len() as u64;
        for b in &self.updates {
            let slot = self.delta.get_mut(b).expect("updates come from the map");
            if *slot == DEAD {
                continue;
            }
            let next = template.next(*slot, e);
            *slot = next;
            if spec.is_handled(next) {
                hits.push((*b, next));
            }
            if self.mgc && spec.coenable.family(next).is_empty() {
                *slot = DEAD;
                self.stats.live -= 1;
                self.stats.collected += 1;
            }
        }

        counters.inserted = self.fresh.len() as u64;
        let fresh = std::mem::take(&mut self.fresh);
        for &(b, mut state) in &fresh {
            if state == DEAD {
                self.stats.tombstones += 1;
            } else {
                self.stats.monitors_created += 1;
                if spec.is_handled(state) {
                    hits.push((b, state));
                }
                if self.mgc && spec.coenable.family(state).is_empty() {
                    state = DEAD;
                    self.stats.collected += 1;
                } else {
                    self.stats.live += 1;
                }
            }
            self.insert(b, state);
        }
        self.fresh = fresh;

        self.stats.peak_live = self.stats.peak_live.max(self.stats.live);
        self.stats.instance_visits += counters.visits;
        self.stats.theta_scans += counters.scanned;
        self.last = counters;
    }

    /// Collects monitors made unreachable-to-goal by the given deaths.
    pub fn on_death(&mut self, spec: &CompiledSpec, objects: &ObjectTable, dead: &[ObjRef]) {
        if !self.mgc || dead.is_empty() {
            return;
        }
        let mut affected: Vec<Binding> = Vec::new();
        if self.kind == OnlineKind::B {
            affected.extend(
                self.theta
                    .iter()
                    .filter(|b| b.objects().any(|(_, o)| dead.contains(&o))),
            );
        } else {
            for &o in dead {
                for p in 0..self.num_params {
                    let single = Binding::from_pairs([(p, o)]);
                    let bit = 1 << p;
                    for &d in &self.domains {
                        if d & bit == 0 {
                            continue;
                        }
                        if d == bit {
                            if self.delta.contains_key(&single) {
                                affected.push(single);
                            }
                        } else if let Some(list) = self.index.get(&(d, single)) {
                            affected.extend_from_slice(list);
                        }
                    }
                }
            }
        }
        for b in affected {
            let state = self.delta[&b];
            if state == DEAD {
                continue;
            }
            let dm = objects.dead_mask(&b);
            if dm != 0 && spec.coenable.collectible(state, dm) {
                self.kill(&b);
            }
        }
    }
}
