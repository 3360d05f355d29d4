// SPDX-License-Identifier: Apache-2.0

//! Parameter instances and parametric trace slicing.
//!
//! A [`ParameterInstance`] is a partial map from parameter names to runtime
//! object identities. Instances form a lattice under the "less informative"
//! order with the empty instance (bottom) as least element; two instances
//! that agree on every shared parameter are *compatible* and can be
//! combined. Slicing projects a parametric trace onto one instance, keeping
//! exactly the events whose instance is less informative than it.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

/// Identity of a runtime object bound to a parameter.
///
/// Equality and hashing consider the identity token only: two objects with
/// the same type tag and equal contents are still distinct objects.
#[derive(Clone, Debug)]
pub struct ObjectId {
    type_tag: Arc<str>,
    token: Arc<str>,
}

impl ObjectId {
    pub fn new(type_tag: impl Into<Arc<str>>, token: impl Into<Arc<str>>) -> Self {
        ObjectId {
            type_tag: type_tag.into(),
            token: token.into(),
        }
    }

    /// Parses the wire form `<type-tag>#<token>`.
    ///
    /// The whole string is the identity; the tag prefix is informational.
    pub fn parse(wire: &str) -> Option<Self> {
        let (tag, _) = wire.split_once('#')?;
        if tag.is_empty() || wire.len() == tag.len() + 1 {
            return None;
        }
        Some(ObjectId::new(tag, wire))
    }

    pub fn type_tag(&self) -> &str {
        &self.type_tag
    }

    pub fn token(&self) -> &str {
        &self.token
    }
}

impl PartialEq for ObjectId {
    fn eq(&self, other: &Self) -> bool {
        self.token == other.token
    }
}

impl Eq for ObjectId {}

impl Hash for ObjectId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.token.hash(state);
    }
}

impl PartialOrd for ObjectId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ObjectId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.token.cmp(&other.token)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SliceError {
    #[error("parameter instances {left} and {right} are incompatible")]
    Incompatible { left: String, right: String },
    #[error("instance set is not closed under combination: {first} and {second} are both maximal below {theta}")]
    NotClosed {
        first: String,
        second: String,
        theta: String,
    },
    #[error("instance set has no element below {0} (missing bottom)")]
    NoLowerBound(String),
    #[error("malformed parameter instance `{0}`: expected {{name=Type#id, ...}}")]
    Literal(String),
}

/// A partial map from parameter names to objects. The empty instance is
/// the bottom element of the lattice.
///
/// Ordering and hashing are canonical over sorted parameter names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParameterInstance {
    bindings: BTreeMap<Arc<str>, ObjectId>,
}

impl ParameterInstance {
    pub fn bottom() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, K>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, ObjectId)>,
        K: Into<Arc<str>>,
    {
        ParameterInstance {
            bindings: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn is_bottom(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, param: &str) -> Option<&ObjectId> {
        self.bindings.get(param)
    }

    pub fn bind(&mut self, param: impl Into<Arc<str>>, object: ObjectId) -> Option<ObjectId> {
        self.bindings.insert(param.into(), object)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ObjectId)> {
        self.bindings.iter().map(|(k, v)| (k.as_ref(), v))
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(|k| k.as_ref())
    }

    /// True iff both instances agree on every parameter they both bind.
    pub fn compatible(&self, other: &ParameterInstance) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .bindings
            .iter()
            .all(|(k, v)| large.bindings.get(k).map_or(true, |w| w == v))
    }

    /// The least upper bound of two compatible instances.
    pub fn combine(&self, other: &ParameterInstance) -> Result<ParameterInstance, SliceError> {
        if !self.compatible(other) {
            return Err(SliceError::Incompatible {
                left: self.to_string(),
                right: other.to_string(),
            });
        }
        let mut bindings = self.bindings.clone();
        for (k, v) in &other.bindings {
            bindings.entry(k.clone()).or_insert_with(|| v.clone());
        }
        Ok(ParameterInstance { bindings })
    }

    /// `self ⊑ other`: every binding of `self` is present, identically, in `other`.
    pub fn less_informative(&self, other: &ParameterInstance) -> bool {
        self.len() <= other.len()
            && self
                .bindings
                .iter()
                .all(|(k, v)| other.bindings.get(k) == Some(v))
    }

    /// Strictly less informative: `self ⊑ other` and `self != other`.
    pub fn strictly_less_informative(&self, other: &ParameterInstance) -> bool {
        self.len() < other.len() && self.less_informative(other)
    }
}

impl fmt::Display for ParameterInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl std::str::FromStr for ParameterInstance {
    type Err = SliceError;

    /// Parses `{a=T#1, b=U#2}`; braces are optional and `{}` or `⊥` is bottom.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || SliceError::Literal(text.to_string());
        let body = text.trim();
        let body = body.strip_prefix('{').map_or(Some(body), |b| b.strip_suffix('}')).ok_or_else(err)?;
        let body = body.trim();
        let mut out = ParameterInstance::bottom();
        if body.is_empty() || body == "⊥" {
            return Ok(out);
        }
        for pair in body.split(',') {
            let (k, v) = pair.split_once('=').ok_or_else(err)?;
            let (k, v) = (k.trim(), v.trim());
            let obj = ObjectId::parse(v).ok_or_else(err)?;
            if k.is_empty() || out.bind(k, obj).is_some() {
                return Err(err());
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`ParameterInstance::compatible`].
pub fn compatible(a: &ParameterInstance, b: &ParameterInstance) -> bool {
    a.compatible(b)
}

/// Free-function form of [`ParameterInstance::combine`].
pub fn combine(a: &ParameterInstance, b: &ParameterInstance) -> Result<ParameterInstance, SliceError> {
    a.combine(b)
}

/// Free-function form of [`ParameterInstance::less_informative`].
pub fn less_informative(a: &ParameterInstance, b: &ParameterInstance) -> bool {
    a.less_informative(b)
}

/// One event of a parametric trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParametricEvent {
    pub name: Arc<str>,
    pub theta: ParameterInstance,
}

impl ParametricEvent {
    pub fn new(name: impl Into<Arc<str>>, theta: ParameterInstance) -> Self {
        ParametricEvent {
            name: name.into(),
            theta,
        }
    }
}

pub type ParametricTrace = Vec<ParametricEvent>;

/// Projects `trace` onto `theta`: keeps each event whose instance is less
/// informative than `theta`, then forgets the parameters.
pub fn slice_trace<'a>(trace: &'a [ParametricEvent], theta: &ParameterInstance) -> Vec<&'a str> {
    trace
        .iter()
        .filter(|event| event.theta.less_informative(theta))
        .map(|event| event.name.as_ref())
        .collect()
}

/// The unique maximal element of `{t ∈ set | t ⊑ theta}`.
///
/// Fails when the set has no element below `theta` or when two incomparable
/// maximal candidates exist, i.e. the set is not closed under combination.
pub fn max_less_informative<'a, I>(set: I, theta: &ParameterInstance) -> Result<&'a ParameterInstance, SliceError>
where
    I: IntoIterator<Item = &'a ParameterInstance>,
{
    let mut maximal: Vec<&ParameterInstance> = Vec::new();
    for candidate in set {
        if !candidate.less_informative(theta) {
            continue;
        }
        if maximal.iter().any(|m| candidate.less_informative(m)) {
            continue;
        }
        maximal.retain(|m| !m.less_informative(candidate));
        maximal.push(candidate);
    }
    match maximal.as_slice() {
        [] => Err(SliceError::NoLowerBound(theta.to_string())),
        [only] => Ok(only),
        [first, second, ..] => Err(SliceError::NotClosed {
            first: first.to_string(),
            second: second.to_string(),
            theta: theta.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(token: &str) -> ObjectId {
        ObjectId::new("T", token)
    }

    fn inst(pairs: &[(&str, &str)]) -> ParameterInstance {
        ParameterInstance::from_pairs(pairs.iter().map(|(k, v)| (*k, obj(v))))
    }

    #[test]
    fn compatibility_examples() {
        let theta1 = inst(&[("a", "a1"), ("b", "b1")]);
        let theta2 = inst(&[("a", "a1")]);
        let theta3 = inst(&[("b", "b2")]);
        assert!(theta1.compatible(&theta2));
        assert!(!theta1.compatible(&theta3));
        assert!(theta2.compatible(&theta3));
        assert!(theta1.compatible(&ParameterInstance::bottom()));
    }

    #[test]
    fn combine_examples() {
        let joined = inst(&[("a", "a1")]).combine(&inst(&[("b", "b2")])).unwrap();
        assert_eq!(joined, inst(&[("a", "a1"), ("b", "b2")]));
        let theta = inst(&[("a", "a1")]);
        assert_eq!(ParameterInstance::bottom().combine(&theta).unwrap(), theta);
        let err = inst(&[("a", "a1"), ("b", "b1")]).combine(&inst(&[("b", "b2")]));
        assert!(matches!(err, Err(SliceError::Incompatible { .. })));
    }

    #[test]
    fn order_examples() {
        let a1 = inst(&[("a", "a1")]);
        assert!(ParameterInstance::bottom().less_informative(&a1));
        assert!(a1.less_informative(&inst(&[("a", "a1"), ("b", "b1")])));
        assert!(!a1.less_informative(&inst(&[("a", "a2")])));
    }

    #[test]
    fn object_identity_ignores_type_tag() {
        assert_eq!(ObjectId::new("File", "f#1"), ObjectId::new("Path", "f#1"));
        assert_ne!(ObjectId::new("File", "File#1"), ObjectId::new("File", "File#2"));
        let parsed = ObjectId::parse("File#f1").unwrap();
        assert_eq!(parsed.type_tag(), "File");
        assert_eq!(parsed.token(), "File#f1");
        assert!(ObjectId::parse("nohash").is_none());
        assert!(ObjectId::parse("#x").is_none());
        assert!(ObjectId::parse("File#").is_none());
    }

    fn toctou_trace() -> ParametricTrace {
        let f = |t: &str| ParameterInstance::from_pairs([("f", ObjectId::new("File", t))]);
        vec![
            ParametricEvent::new("access", f("f2")),
            ParametricEvent::new("open", f("f1")),
            ParametricEvent::new("access", f("f2")),
            ParametricEvent::new("access", f("f1")),
        ]
    }

    #[test]
    fn slices_of_toctou_trace() {
        let trace = toctou_trace();
        let f1 = ParameterInstance::from_pairs([("f", ObjectId::new("File", "f1"))]);
        let f2 = ParameterInstance::from_pairs([("f", ObjectId::new("File", "f2"))]);
        assert_eq!(slice_trace(&trace, &f1), vec!["open", "access"]);
        assert_eq!(slice_trace(&trace, &f2), vec!["access", "access"]);
        assert!(slice_trace(&[], &f1).is_empty());
    }

    #[test]
    fn max_examples() {
        let bottom = ParameterInstance::bottom();
        let a1 = inst(&[("a", "a1")]);
        let b1 = inst(&[("b", "b1")]);
        let a1b1 = inst(&[("a", "a1"), ("b", "b1")]);

        let set = [bottom.clone(), a1.clone()];
        assert_eq!(max_less_informative(&set, &a1b1).unwrap(), &a1);

        let set = [bottom.clone()];
        assert_eq!(max_less_informative(&set, &a1b1).unwrap(), &bottom);

        let set = [bottom.clone(), a1.clone(), b1.clone(), a1b1.clone()];
        assert_eq!(max_less_informative(&set, &a1b1).unwrap(), &a1b1);

        let unclosed = [bottom, a1, b1];
        assert!(matches!(
            max_less_informative(&unclosed, &a1b1),
            Err(SliceError::NotClosed { .. })
        ));
        assert!(matches!(
            max_less_informative(&[], &a1b1),
            Err(SliceError::NoLowerBound(_))
        ));
    }
}
