// SPDX-License-Identifier: Apache-2.0

//! Interned objects and fixed-width parameter bindings.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::analysis::ParamSet;
use crate::slicing::{ObjectId, ParameterInstance};
use crate::spec::MAX_PARAMS;

pub type ObjRef = u32;
const UNBOUND: ObjRef = ObjRef::MAX;

/// A parameter instance over interned objects, indexed by spec parameter
/// position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding([ObjRef; MAX_PARAMS]);

impl Binding {
    pub const BOTTOM: Binding = Binding([UNBOUND; MAX_PARAMS]);

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, ObjRef)>) -> Binding {
        let mut b = Binding::BOTTOM;
        for (i, o) in pairs {
            b.0[i] = o;
        }
        b
    }

    #[inline]
    pub fn get(&self, param: usize) -> Option<ObjRef> {
        let o = self.0[param];
        (o != UNBOUND).then_some(o)
    }

    #[inline]
    pub fn mask(&self) -> ParamSet {
        self.0
            .iter()
            .enumerate()
            .fold(0, |m, (i, o)| if *o != UNBOUND { m | (1 << i) } else { m })
    }

    #[inline]
    pub fn compatible(&self, other: &Binding) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .all(|(a, b)| *a == UNBOUND || *b == UNBOUND || a == b)
    }

    /// Least upper bound; callers ensure compatibility.
    #[inline]
    pub fn combine(&self, other: &Binding) -> Binding {
        let mut out = *self;
        for (o, b) in out.0.iter_mut().zip(&other.0) {
            if *o == UNBOUND {
                *o = *b;
            }
        }
        out
    }

    /// `self ⊑ other`.
    #[inline]
    pub fn le(&self, other: &Binding) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a == UNBOUND || a == b)
    }

    #[inline]
    pub fn project(&self, mask: ParamSet) -> Binding {
        let mut out = Binding::BOTTOM;
        for i in 0..MAX_PARAMS {
            if mask & (1 << i) != 0 {
                out.0[i] = self.0[i];
            }
        }
        out
    }

    pub fn objects(&self) -> impl Iterator<Item = (usize, ObjRef)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, o)| **o != UNBOUND)
            .map(|(i, o)| (i, *o))
    }
}

/// Interned object identities with liveness.
#[derive(Debug, Default)]
pub struct ObjectTable {
    index: HashMap<Arc<str>, ObjRef>,
    objects: Vec<ObjectId>,
    alive: Vec<bool>,
}

impl ObjectTable {
    pub fn intern(&mut self, token: &str) -> ObjRef {
        if let Some(&r) = self.index.get(token) {
            return r;
        }
        let id = ObjectId::parse(token).unwrap_or_else(|| ObjectId::new("object", token));
        let r = self.objects.len() as ObjRef;
        self.index.insert(Arc::from(token), r);
        self.objects.push(id);
        self.alive.push(true);
        r
    }

    pub fn lookup(&self, token: &str) -> Option<ObjRef> {
        self.index.get(token).copied()
    }

    pub fn object(&self, r: ObjRef) -> &ObjectId {
        &self.objects[r as usize]
    }

    #[inline]
    pub fn is_alive(&self, r: ObjRef) -> bool {
        self.alive[r as usize]
    }

    pub fn kill(&mut self, r: ObjRef) -> bool {
        std::mem::replace(&mut self.alive[r as usize], false)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Parameters of `b` bound to dead objects.
    pub fn dead_mask(&self, b: &Binding) -> ParamSet {
        b.objects()
            .filter(|(_, o)| !self.is_alive(*o))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    /// `{name=token, ...}` in parameter order.
    pub fn render(&self, b: &Binding, params: &[String]) -> String {
        let mut out = String::from("{");
        for (n, (i, o)) in b.objects().enumerate() {
            if n > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}={}", params[i], self.object(o).token());
        }
        out.push('}');
        out
    }

    pub fn to_instance(&self, b: &Binding, params: &[String]) -> ParameterInstance {
        ParameterInstance::from_pairs(
            b.objects()
                .map(|(i, o)| (params[i].as_str(), self.object(o).clone())),
        )
    }
}

/// Proper submasks of every mask over `n` bits, largest first.
pub(crate) struct Submasks {
    table: Vec<Vec<ParamSet>>,
}

impl Submasks {
    pub fn new(n: usize) -> Self {
        let table = (0..(1u32 << n))
            .map(|m| {
                let mut subs = Vec::new();
                let mut s = m;
                while s != 0 {
                    s = (s - 1) & m;
                    subs.push(s);
                }
                subs.sort_by_key(|s| std::cmp::Reverse((s.count_ones(), *s)));
                subs
            })
            .collect();
        Submasks { table }
    }

    #[inline]
    pub fn proper(&self, mask: ParamSet) -> &[ParamSet] {
        &self.table[mask as usize]
    }
}
