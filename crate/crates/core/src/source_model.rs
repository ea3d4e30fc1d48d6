//! Wrapper schemas and the walk algebra.
//!
//! A walk is a select-project-join expression over wrappers: restricted
//! projection (ID attributes are never dropped) and restricted equi-joins
//! (ID attributes only), with no two wrappers from the same source.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::iri::Iri;
use crate::quadstore::{Dataset, Triple};
use crate::query::OmqQuery;
use crate::vocab::vocab;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceModelError {
    #[error("invalid wrapper `{name}`: {reason}")]
    InvalidWrapper { name: String, reason: String },
    #[error("wrapper {0} has no M:mapping named graph")]
    MissingMapping(Iri),
    #[error("walk does not cover the query")]
    NotCovering,
    #[error("invalid walk: {0}")]
    InvalidWalk(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceId {
    pub name: String,
    pub iri: Iri,
}

impl SourceId {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let iri = vocab().source_iri(&name);
        SourceId { name, iri }
    }
}

/// `w(ā_ID, ā_nID)` with its owning source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WrapperSchema {
    pub name: String,
    pub source: SourceId,
    pub id_attrs: Vec<String>,
    pub non_id_attrs: Vec<String>,
}

impl WrapperSchema {
    pub fn new(
        name: impl Into<String>,
        source: impl Into<String>,
        id_attrs: impl IntoIterator<Item = impl Into<String>>,
        non_id_attrs: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, SourceModelError> {
        let name = name.into();
        let source = SourceId::new(source);
        let id_attrs: Vec<String> = id_attrs.into_iter().map(Into::into).collect();
        let non_id_attrs: Vec<String> = non_id_attrs.into_iter().map(Into::into).collect();
        let invalid = |reason: String| SourceModelError::InvalidWrapper { name: name.clone(), reason };
        if name.is_empty() || name.contains(['/', ' ', '<', '>']) {
            return Err(invalid("name must be a non-empty identifier".into()));
        }
        if source.name.is_empty() || source.name.contains([' ', '<', '>']) {
            return Err(invalid("source must be a non-empty identifier".into()));
        }
        if id_attrs.is_empty() && non_id_attrs.is_empty() {
            return Err(invalid("no attributes".into()));
        }
        let mut seen = BTreeSet::new();
        for a in id_attrs.iter().chain(&non_id_attrs) {
            if a.is_empty() || a.contains(['/', ' ', '<', '>', ',']) {
                return Err(invalid(format!("bad attribute name `{a}`")));
            }
            if !seen.insert(a) {
                return Err(invalid(format!("attribute `{a}` listed twice")));
            }
        }
        Ok(WrapperSchema { name, source, id_attrs, non_id_attrs })
    }

    pub fn iri(&self) -> Iri {
        vocab().wrapper_iri(&self.name)
    }

    /// `<source-iri>/<attr>`
    pub fn attribute_iri(&self, attr: &str) -> Iri {
        self.source.iri.child(attr)
    }

    /// Inverse of [`Self::attribute_iri`].
    pub fn attribute_name<'a>(&self, iri: &'a Iri) -> Option<&'a str> {
        iri.as_str()
            .strip_prefix(self.source.iri.as_str())
            .and_then(|r| r.strip_prefix('/'))
            .filter(|r| self.has_attribute(r))
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.id_attrs.iter().chain(&self.non_id_attrs).map(String::as_str)
    }

    pub fn is_id(&self, attr: &str) -> bool {
        self.id_attrs.iter().any(|a| a == attr)
    }

    pub fn has_attribute(&self, attr: &str) -> bool {
        self.attributes().any(|a| a == attr)
    }

    /// `D1/lagRatio`
    pub fn qualified(&self, attr: &str) -> String {
        format!("{}/{}", self.source.name, attr)
    }
}

/// Reads back the wrapper schemas registered in the Source graph. An
/// attribute is an ID when it is `owl:sameAs` a subclass of `sc:identifier`.
pub fn wrapper_catalog(ds: &Dataset) -> BTreeMap<Iri, Arc<WrapperSchema>> {
    let v = vocab();
    let mut out = BTreeMap::new();
    for q in ds.find(Some(&v.source_graph), None, Some(&v.has_wrapper), None) {
        let (src_iri, w_iri) = (q.s, q.o);
        let Some(source) = src_iri.as_str().strip_prefix(v.data_source.as_str()).and_then(|r| r.strip_prefix('/')) else {
            continue;
        };
        let Some(name) = w_iri.as_str().strip_prefix(v.wrapper.as_str()).and_then(|r| r.strip_prefix('/')) else {
            continue;
        };
        let source = SourceId { name: source.to_string(), iri: src_iri.clone() };
        let (mut ids, mut non_ids) = (Vec::new(), Vec::new());
        for a in ds.objects(&v.source_graph, &w_iri, &v.has_attribute) {
            let Some(attr) = a.as_str().strip_prefix(src_iri.as_str()).and_then(|r| r.strip_prefix('/')) else {
                continue;
            };
            let is_id = ds
                .objects(&v.mapping_graph, &a, &v.same_as)
                .iter()
                .any(|f| ds.is_subclass_of(f, &v.identifier));
            if is_id {
                ids.push(attr.to_string());
            } else {
                non_ids.push(attr.to_string());
            }
        }
        let schema = WrapperSchema { name: name.to_string(), source, id_attrs: ids, non_id_attrs: non_ids };
        out.insert(w_iri, Arc::new(schema));
    }
    out
}

/// An attribute of a specific wrapper.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrRef {
    pub wrapper: Iri,
    pub attribute: String,
}

impl AttrRef {
    pub fn new(wrapper: Iri, attribute: impl Into<String>) -> Self {
        AttrRef { wrapper, attribute: attribute.into() }
    }
}

/// Unordered equality between two ID attributes; stored normalized so that
/// `left <= right`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JoinCondition {
    left: AttrRef,
    right: AttrRef,
}

impl JoinCondition {
    pub fn new(a: AttrRef, b: AttrRef) -> Self {
        if a <= b {
            JoinCondition { left: a, right: b }
        } else {
            JoinCondition { left: b, right: a }
        }
    }

    pub fn left(&self) -> &AttrRef {
        &self.left
    }

    pub fn right(&self) -> &AttrRef {
        &self.right
    }

    pub fn touches(&self, wrapper: &Iri) -> bool {
        self.left.wrapper == *wrapper || self.right.wrapper == *wrapper
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WalkStep {
    pub wrapper: Arc<WrapperSchema>,
    pub projected: BTreeSet<String>,
}

/// `Π̃(w1) ⋈̃ … ⋈̃ Π̃(wk)` with joins kept as an unordered set.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Walk {
    steps: BTreeMap<Iri, WalkStep>,
    joins: BTreeSet<JoinCondition>,
}

impl Walk {
    pub fn new() -> Self {
        Walk::default()
    }

    /// `Π̃_{attrs}(w)`
    pub fn single(wrapper: Arc<WrapperSchema>, projected: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut w = Walk::new();
        w.add_wrapper(wrapper.clone());
        for a in projected {
            w.project(&wrapper.iri(), a.into());
        }
        w
    }

    pub fn add_wrapper(&mut self, wrapper: Arc<WrapperSchema>) {
        self.steps
            .entry(wrapper.iri())
            .or_insert_with(|| WalkStep { wrapper, projected: BTreeSet::new() });
    }

    /// Adds `attr` to the projection of an already present wrapper.
    pub fn project(&mut self, wrapper: &Iri, attr: String) -> bool {
        match self.steps.get_mut(wrapper) {
            Some(step) => step.projected.insert(attr),
            None => false,
        }
    }

    pub fn add_join(&mut self, join: JoinCondition) -> bool {
        self.joins.insert(join)
    }

    /// Union of both walks' wrappers, projections and joins.
    pub fn merge(&self, other: &Walk) -> Walk {
        let mut out = self.clone();
        for (iri, step) in &other.steps {
            match out.steps.get_mut(iri) {
                Some(s) => s.projected.extend(step.projected.iter().cloned()),
                None => {
                    out.steps.insert(iri.clone(), step.clone());
                }
            }
        }
        out.joins.extend(other.joins.iter().cloned());
        out
    }

    pub fn wrappers(&self) -> impl Iterator<Item = &Iri> {
        self.steps.keys()
    }

    pub fn contains_wrapper(&self, wrapper: &Iri) -> bool {
        self.steps.contains_key(wrapper)
    }

    pub fn step(&self, wrapper: &Iri) -> Option<&WalkStep> {
        self.steps.get(wrapper)
    }

    pub fn steps(&self) -> impl Iterator<Item = &WalkStep> {
        self.steps.values()
    }

    pub fn joins(&self) -> impl Iterator<Item = &JoinCondition> {
        self.joins.iter()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Same walk without `wrapper` and its joins.
    pub fn without(&self, wrapper: &Iri) -> Walk {
        let mut out = self.clone();
        out.steps.remove(wrapper);
        out.joins.retain(|j| !j.touches(wrapper));
        out
    }

    pub fn has_distinct_sources(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.steps.values().all(|s| seen.insert(&s.wrapper.source))
    }

    /// Checks the walk invariants: joins on ID attributes of member wrappers,
    /// pairwise-distinct sources, connectivity, projections within schema.
    pub fn validate(&self) -> Result<(), SourceModelError> {
        let bad = |m: String| Err(SourceModelError::InvalidWalk(m));
        if self.steps.is_empty() {
            return bad("empty walk".into());
        }
        for j in &self.joins {
            for end in [&j.left, &j.right] {
                let Some(step) = self.steps.get(&end.wrapper) else {
                    return bad(format!("join endpoint {} not in walk", end.wrapper));
                };
                if !step.wrapper.is_id(&end.attribute) {
                    return bad(format!("join on non-ID attribute {}", step.wrapper.qualified(&end.attribute)));
                }
            }
            if j.left.wrapper == j.right.wrapper {
                return bad("self-join".into());
            }
        }
        for step in self.steps.values() {
            if let Some(a) = step.projected.iter().find(|a| !step.wrapper.has_attribute(a)) {
                return bad(format!("{} does not provide `{a}`", step.wrapper.name));
            }
        }
        if !self.has_distinct_sources() {
            return bad("two wrappers share a source".into());
        }
        if !self.is_connected() {
            return bad("join graph is disconnected".into());
        }
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        let Some(first) = self.steps.keys().next() else { return true };
        let mut seen: BTreeSet<&Iri> = BTreeSet::from([first]);
        let mut stack = vec![first];
        while let Some(n) = stack.pop() {
            for j in &self.joins {
                let other = if j.left.wrapper == *n {
                    &j.right.wrapper
                } else if j.right.wrapper == *n {
                    &j.left.wrapper
                } else {
                    continue;
                };
                if seen.insert(other) {
                    stack.push(other);
                }
            }
        }
        seen.len() == self.steps.len()
    }

    /// Canonical identity ignoring projections: sorted wrappers and joins.
    pub fn signature(&self) -> (Vec<&Iri>, Vec<&JoinCondition>) {
        (self.steps.keys().collect(), self.joins.iter().collect())
    }

    /// Every attribute the walk exposes: projections plus all IDs.
    pub fn output_attributes(&self) -> Vec<AttrRef> {
        let mut out = Vec::new();
        for (iri, step) in &self.steps {
            for a in step.wrapper.attributes() {
                if step.wrapper.is_id(a) || step.projected.contains(a) {
                    out.push(AttrRef::new(iri.clone(), a));
                }
            }
        }
        out
    }

    fn qualified(&self, a: &AttrRef) -> String {
        match self.steps.get(&a.wrapper) {
            Some(s) => s.wrapper.qualified(&a.attribute),
            None => format!("{}.{}", a.wrapper.local_name(), a.attribute),
        }
    }

    fn named(&self, a: &AttrRef) -> String {
        match self.steps.get(&a.wrapper) {
            Some(s) => format!("{}.{}", s.wrapper.name, a.attribute),
            None => format!("{}.{}", a.wrapper.local_name(), a.attribute),
        }
    }

    /// `w1 ⋈[x=y] w3` with each condition placed at the later of its two
    /// wrappers in canonical order.
    fn render_body(&self, attr: impl Fn(&AttrRef) -> String) -> String {
        let order: Vec<&Iri> = self.steps.keys().collect();
        let pos = |w: &Iri| order.iter().position(|o| *o == w).unwrap_or(usize::MAX);
        let mut out = String::new();
        for (i, iri) in order.iter().enumerate() {
            let name = &self.steps[*iri].wrapper.name;
            if i == 0 {
                out.push_str(name);
                continue;
            }
            let conds: Vec<String> = self
                .joins
                .iter()
                .filter(|j| pos(&j.left.wrapper).max(pos(&j.right.wrapper)) == i)
                .map(|j| {
                    let (a, b) = if pos(&j.left.wrapper) <= pos(&j.right.wrapper) {
                        (&j.left, &j.right)
                    } else {
                        (&j.right, &j.left)
                    };
                    format!("{}={}", attr(a), attr(b))
                })
                .collect();
            out.push_str(&format!(" ⋈[{}] {name}", conds.join(", ")));
        }
        out
    }
}

/// Same wrappers and same join conditions, in any order.
pub fn walk_equivalent(a: &Walk, b: &Walk) -> bool {
    a.signature() == b.signature()
}

impl fmt::Display for Walk {
    /// `π{D1/lagRatio,D3/TargetApp}( w1 ⋈[D1/VoDmonitorId=D3/MonitorId] w3 )`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let projected: Vec<String> = self
            .steps
            .values()
            .flat_map(|s| s.projected.iter().map(|a| s.wrapper.qualified(a)))
            .collect();
        write!(f, "π{{{}}}( {} )", projected.join(","), self.render_body(|a| self.qualified(a)))
    }
}

/// One conjunct of a [`Ucq`]: a walk plus the attribute bound to each output
/// feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conjunct {
    pub walk: Walk,
    pub columns: Vec<AttrRef>,
}

impl fmt::Display for Conjunct {
    /// `Π{w3.TargetApp, w1.lagRatio}( w1 ⋈[w1.VoDmonitorId=w3.MonitorId] w3 )`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<String> = self.columns.iter().map(|a| self.walk.named(a)).collect();
        write!(f, "Π{{{}}}( {} )", cols.join(", "), self.walk.render_body(|a| self.walk.named(a)))
    }
}

/// Union of conjunctive queries over wrappers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ucq {
    pub output_features: Vec<Iri>,
    pub conjuncts: Vec<Conjunct>,
}

impl Ucq {
    pub fn walks(&self) -> impl Iterator<Item = &Walk> {
        self.conjuncts.iter().map(|c| &c.walk)
    }

    pub fn len(&self) -> usize {
        self.conjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }
}

impl fmt::Display for Ucq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                writeln!(f, "∪")?;
            }
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Which triples of a pattern each wrapper's LAV graph contains, as bitsets.
#[derive(Debug, Clone)]
pub struct CoverageIndex {
    pattern_len: usize,
    masks: HashMap<Iri, Vec<u64>>,
}

impl CoverageIndex {
    pub fn new(ds: &Dataset, pattern: &BTreeSet<Triple>) -> Self {
        let v = vocab();
        let blocks = pattern.len().div_ceil(64);
        let mut masks: HashMap<Iri, Vec<u64>> = HashMap::new();
        for q in ds.find(Some(&v.mapping_graph), None, Some(&v.mapping), None) {
            masks.entry(q.s.clone()).or_insert_with(|| vec![0; blocks]);
        }
        let graph_owner: HashMap<Iri, Vec<Iri>> = {
            let mut m: HashMap<Iri, Vec<Iri>> = HashMap::new();
            for q in ds.find(Some(&v.mapping_graph), None, Some(&v.mapping), None) {
                m.entry(q.o).or_default().push(q.s);
            }
            m
        };
        for (i, t) in pattern.iter().enumerate() {
            for g in ds.graphs_containing(t) {
                for w in graph_owner.get(&g).into_iter().flatten() {
                    masks.get_mut(w).expect("registered above")[i / 64] |= 1 << (i % 64);
                }
            }
        }
        CoverageIndex { pattern_len: pattern.len(), masks }
    }

    fn union<'a>(&self, wrappers: impl Iterator<Item = &'a Iri>) -> Result<Vec<u64>, SourceModelError> {
        let mut acc = vec![0u64; self.pattern_len.div_ceil(64)];
        for w in wrappers {
            let m = self.masks.get(w).ok_or_else(|| SourceModelError::MissingMapping(w.clone()))?;
            for (a, b) in acc.iter_mut().zip(m) {
                *a |= b;
            }
        }
        Ok(acc)
    }

    fn full(&self, bits: &[u64]) -> bool {
        (0..self.pattern_len).all(|i| bits[i / 64] & (1 << (i % 64)) != 0)
    }

    pub fn covers<'a>(&self, wrappers: impl Iterator<Item = &'a Iri>) -> Result<bool, SourceModelError> {
        Ok(self.full(&self.union(wrappers)?))
    }

    /// `Err(NotCovering)` if the full set does not cover.
    pub fn is_minimal(&self, wrappers: &[&Iri]) -> Result<bool, SourceModelError> {
        if !self.covers(wrappers.iter().copied())? {
            return Err(SourceModelError::NotCovering);
        }
        for skip in 0..wrappers.len() {
            let rest = wrappers.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, w)| *w);
            if self.covers(rest)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Every triple of the query pattern lies in the union of the walk's LAV
/// graphs.
pub fn coverage(walk: &Walk, q: &OmqQuery, ds: &Dataset) -> Result<bool, SourceModelError> {
    CoverageIndex::new(ds, &q.phi).covers(walk.wrappers())
}

/// Removing any single wrapper breaks coverage.
pub fn minimality(walk: &Walk, q: &OmqQuery, ds: &Dataset) -> Result<bool, SourceModelError> {
    let ws: Vec<&Iri> = walk.wrappers().collect();
    CoverageIndex::new(ds, &q.phi).is_minimal(&ws)
}
