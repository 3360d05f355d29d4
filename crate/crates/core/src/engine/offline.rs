// SPDX-License-Identifier: Apache-2.0

//! Offline slicing: build every slice, then run the template over each.

use std::collections::HashMap;

use super::binding::Binding;
use crate::compile::CompiledSpec;
use crate::logic::{EventId, StateId};

struct Slice {
    /// Events inherited from the instance this one was cloned from.
    birth: usize,
    events: Vec<u32>,
}

/// Instances with their slices, built in one pass over the trace.
pub struct OfflineSlicer {
    theta: Vec<Binding>,
    slices: HashMap<Binding, Slice>,
    events: Vec<EventId>,
    cap: Option<usize>,
    truncated: u64,
}

/// One handled-state entry found by replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OfflineHit {
    pub binding: Binding,
    pub state: StateId,
    /// Index of the triggering event among those fed to the slicer.
    pub event: usize,
}

impl OfflineSlicer {
    pub fn new(cap: Option<usize>) -> Self {
        let mut slices = HashMap::new();
        slices.insert(
            Binding::BOTTOM,
            Slice {
                birth: 0,
                events: Vec::new(),
            },
        );
        OfflineSlicer {
            theta: vec![Binding::BOTTOM],
            slices,
            events: Vec::new(),
            cap,
            truncated: 0,
        }
    }

    pub fn instances(&self) -> usize {
        self.theta.len()
    }

    /// Events dropped because a slice reached the cap.
    pub fn truncated(&self) -> u64 {
        self.truncated
    }

    /// The most informative member of the instance set below `b`, by scan.
    fn max_below(&self, b: &Binding) -> Binding {
        let mut best = Binding::BOTTOM;
        let mut size = 0;
        for rho in &self.theta {
            if rho.le(b) && rho.mask().count_ones() >= size {
                size = rho.mask().count_ones();
                best = *rho;
            }
        }
        best
    }

    pub fn push(&mut self, e: EventId, theta: Binding) {
        let k = self.events.len() as u32;
        self.events.push(e);
        let targets: Vec<(Binding, Binding)> = self
            .theta
            .iter()
            .filter(|rho| rho.compatible(&theta))
            .map(|rho| theta.combine(rho))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|t| (t, self.max_below(&t)))
            .collect();
        let mut fresh = Vec::new();
        for (t, src) in targets {
            if t == src {
                continue;
            }
            let base = &self.slices[&src].events;
            fresh.push((
                t,
                Slice {
                    birth: base.len(),
                    events: base.clone(),
                },
            ));
        }
        for (t, slice) in fresh {
            self.theta.push(t);
            self.slices.insert(t, slice);
        }
        let cap = self.cap;
        let mut truncated = 0;
        for rho in &self.theta {
            if !theta.le(rho) {
                continue;
            }
            let slice = self.slices.get_mut(rho).expect("every instance has a slice");
            if cap.is_some_and(|c| slice.events.len() >= c) {
                truncated += 1;
                continue;
            }
            slice.events.push(k);
        }
        self.truncated += truncated;
    }

    /// Every instance with its slice, in creation order.
    pub fn slices(&self) -> impl Iterator<Item = (Binding, Vec<EventId>)> + '_ {
        self.theta.iter().map(|b| {
            let slice = &self.slices[b];
            (*b, slice.events.iter().map(|&k| self.events[k as usize]).collect())
        })
    }

    /// Replays every slice; returns hits after each instance's birth and the
    /// final state of every instance.
    pub fn replay(&self, spec: &CompiledSpec) -> (Vec<OfflineHit>, Vec<(Binding, StateId)>) {
        let template = &spec.template;
        let mut hits = Vec::new();
        let mut verdicts = Vec::with_capacity(self.theta.len());
        for b in &self.theta {
            let slice = &self.slices[b];
            let mut state = template.initial();
            for (i, &k) in slice.events.iter().enumerate() {
                state = template.next(state, self.events[k as usize]);
                if i >= slice.birth && spec.is_handled(state) {
                    hits.push(OfflineHit {
                        binding: *b,
                        state,
                        event: k as usize,
                    });
                }
            }
            verdicts.push((*b, state));
        }
        hits.sort_by_key(|h| h.event);
        (hits, verdicts)
    }
}
