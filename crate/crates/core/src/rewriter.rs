//! Rewriting of well-formed ontology-mediated queries into unions of
//! covering, minimal walks.
//!
//! Three phases: query expansion (concept order and identifier features),
//! intra-concept generation (single-wrapper partial walks per concept) and
//! inter-concept generation (merging partial walks along the concept edges
//! of the pattern, discovering the ID joins).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::iri::{Iri, PrefixTable};
use crate::quadstore::{Dataset, Triple};
use crate::query::{concept_topological_order, identifier_features, parse_omq, well_formed_rewrite, OmqQuery, QueryError};
use crate::source_model::{
    wrapper_catalog, AttrRef, Conjunct, CoverageIndex, JoinCondition, SourceModelError, Ucq, Walk, WrapperSchema,
};
use crate::vocab::vocab;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no wrapper provides exactly the requested features of {0}")]
    NoWrapperForConcept(Iri),
    #[error("no wrapper provides the edge between {from} and {to}")]
    NoJoinPath { from: Iri, to: Iri },
    #[error("wrapper {wrapper} has no attribute for an identifier of {concept}")]
    MissingIdAttribute { wrapper: Iri, concept: Iri },
    #[error("every candidate walk was discarded")]
    NoCoveringWalk,
    #[error(transparent)]
    SourceModel(#[from] SourceModelError),
}

/// Phase 1 output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedQuery {
    pub concepts: Vec<Iri>,
    pub query: OmqQuery,
}

/// Phase 2 output: single-wrapper walks per concept, in concept order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialWalkSet {
    pub per_concept: Vec<(Iri, Vec<Walk>)>,
}

impl PartialWalkSet {
    pub fn get(&self, concept: &Iri) -> Option<&[Walk]> {
        self.per_concept.iter().find(|(c, _)| c == concept).map(|(_, w)| w.as_slice())
    }
}

/// Lookups shared by all phases.
struct Catalog<'a> {
    ds: &'a Dataset,
    wrappers: BTreeMap<Iri, Arc<WrapperSchema>>,
    /// named graph → wrappers mapped to it
    owners: HashMap<Iri, Vec<Iri>>,
}

impl<'a> Catalog<'a> {
    fn new(ds: &'a Dataset) -> Self {
        let v = vocab();
        let mut owners: HashMap<Iri, Vec<Iri>> = HashMap::new();
        for q in ds.find(Some(&v.mapping_graph), None, Some(&v.mapping), None) {
            owners.entry(q.o).or_default().push(q.s);
        }
        for ws in owners.values_mut() {
            ws.sort();
        }
        Catalog { ds, wrappers: wrapper_catalog(ds), owners }
    }

    /// Wrappers whose LAV graph contains `t`, sorted.
    fn providers(&self, t: &Triple) -> Vec<Iri> {
        let mut out: Vec<Iri> = self
            .ds
            .graphs_containing(t)
            .iter()
            .filter(|g| !vocab().is_reserved_graph(g))
            .flat_map(|g| self.owners.get(g).into_iter().flatten().cloned())
            .filter(|w| self.wrappers.contains_key(w))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    fn provides(&self, wrapper: &Iri, t: &Triple) -> bool {
        let v = vocab();
        self.ds
            .objects(&v.mapping_graph, wrapper, &v.mapping)
            .iter()
            .any(|g| self.ds.has(g, &t.s, &t.p, &t.o))
    }

    /// Attributes of `wrapper` that are `owl:sameAs` `feature`.
    fn attributes_for(&self, wrapper: &Iri, feature: &Iri) -> Vec<String> {
        let v = vocab();
        let Some(schema) = self.wrappers.get(wrapper) else { return Vec::new() };
        schema
            .attributes()
            .filter(|a| self.ds.has(&v.mapping_graph, &schema.attribute_iri(a), &v.same_as, feature))
            .map(str::to_string)
            .collect()
    }

    fn is_concept(&self, x: &Iri) -> bool {
        let v = vocab();
        self.ds.has_type(&v.global_graph, x, &v.concept)
    }

    fn concept_edges<'q>(&self, phi: &'q BTreeSet<Triple>) -> Vec<&'q Triple> {
        phi.iter()
            .filter(|t| t.p != vocab().has_feature && t.s != t.o && self.is_concept(&t.s) && self.is_concept(&t.o))
            .collect()
    }
}

/// Phase 1: concepts in traversal order and the pattern extended with every
/// concept's identifier features.
///
/// The order starts at the first concept of the topological order and then
/// repeatedly takes the earliest (topologically) unprocessed concept sharing
/// an edge with an already processed one, so each step joins through an
/// existing edge.
pub fn query_expansion(q: &OmqQuery, ds: &Dataset) -> Result<ExpandedQuery, RewriteError> {
    let cat = Catalog::new(ds);
    let topo = concept_topological_order(ds, &q.phi).ok_or(QueryError::CyclicPattern)?;
    let edges = cat.concept_edges(&q.phi);
    let rank: HashMap<&Iri, usize> = topo.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut done: HashSet<&Iri> = HashSet::new();
    let mut concepts = Vec::with_capacity(topo.len());
    while concepts.len() < topo.len() {
        let adjacent = |c: &Iri| {
            edges.iter().any(|e| (e.s == *c && done.contains(&e.o)) || (e.o == *c && done.contains(&e.s)))
        };
        let next = topo
            .iter()
            .filter(|c| !done.contains(c))
            .filter(|c| done.is_empty() || adjacent(c))
            .min_by_key(|c| rank[c])
            .or_else(|| topo.iter().find(|c| !done.contains(c)))
            .expect("loop guard");
        done.insert(next);
        concepts.push(next.clone());
    }

    let mut query = q.clone();
    for c in &concepts {
        for id in identifier_features(ds, c) {
            query.phi.insert(Triple::new(c.clone(), vocab().has_feature.clone(), id));
        }
    }
    Ok(ExpandedQuery { concepts, query })
}

/// Phase 2: for each concept, the wrappers whose mappings provide exactly
/// the features requested for it.
pub fn intra_concept_generation(x: &ExpandedQuery, ds: &Dataset) -> Result<PartialWalkSet, RewriteError> {
    intra(&Catalog::new(ds), x)
}

fn intra(cat: &Catalog, x: &ExpandedQuery) -> Result<PartialWalkSet, RewriteError> {
    let v = vocab();
    let mut per_concept = Vec::with_capacity(x.concepts.len());
    for c in &x.concepts {
        let features: BTreeSet<&Iri> = x.query.phi.iter().filter(|t| t.s == *c && t.p == v.has_feature).map(|t| &t.o).collect();
        let mut merged: BTreeMap<Iri, (BTreeSet<String>, BTreeSet<&Iri>)> = BTreeMap::new();
        for f in &features {
            let t = Triple::new(c.clone(), v.has_feature.clone(), (*f).clone());
            for w in cat.providers(&t) {
                let attrs = cat.attributes_for(&w, f);
                if attrs.is_empty() {
                    continue;
                }
                let entry = merged.entry(w).or_default();
                entry.0.extend(attrs);
                entry.1.insert(f);
            }
        }
        let walks: Vec<Walk> = merged
            .into_iter()
            .filter(|(_, (_, fs))| *fs == features)
            .map(|(w, (attrs, _))| Walk::single(cat.wrappers[&w].clone(), attrs))
            .collect();
        if walks.is_empty() {
            return Err(RewriteError::NoWrapperForConcept(c.clone()));
        }
        per_concept.push((c.clone(), walks));
    }
    Ok(PartialWalkSet { per_concept })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct PhaseWalk {
    walk: Walk,
    /// concept → wrapper answering it
    servers: BTreeMap<Iri, Iri>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Drop {
    SharedSource,
    NoProvider,
    MissingId,
}

/// Phase 3 result with the reasons candidates were discarded.
#[derive(Debug, Clone, Default)]
struct InterResult {
    walks: Vec<Walk>,
    diagnostics: Vec<String>,
    first_no_path: Option<(Iri, Iri)>,
    first_missing_id: Option<(Iri, Iri)>,
    dropped: BTreeMap<Drop, usize>,
}

/// Phase 3: cartesian product of partial walks along the concept order,
/// adding the ID joins implied by each concept edge.
pub fn inter_concept_generation(p: &PartialWalkSet, x: &ExpandedQuery, ds: &Dataset) -> Result<Vec<Walk>, RewriteError> {
    let r = inter(&Catalog::new(ds), p, x);
    finish_inter(r).map(|r| r.walks)
}

fn finish_inter(r: InterResult) -> Result<InterResult, RewriteError> {
    if !r.walks.is_empty() {
        return Ok(r);
    }
    if let Some((from, to)) = r.first_no_path {
        return Err(RewriteError::NoJoinPath { from, to });
    }
    if let Some((wrapper, concept)) = r.first_missing_id {
        return Err(RewriteError::MissingIdAttribute { wrapper, concept });
    }
    Err(RewriteError::NoCoveringWalk)
}

fn inter(cat: &Catalog, p: &PartialWalkSet, x: &ExpandedQuery) -> InterResult {
    let mut out = InterResult::default();
    let edges = cat.concept_edges(&x.query.phi);
    let Some((first, first_walks)) = p.per_concept.first() else { return out };

    let mut state: Vec<PhaseWalk> = first_walks
        .iter()
        .map(|w| PhaseWalk {
            walk: w.clone(),
            servers: BTreeMap::from([(first.clone(), w.wrappers().next().expect("single wrapper").clone())]),
        })
        .collect();
    let mut id_cache: HashMap<Iri, Vec<Iri>> = HashMap::new();

    for (n, rights) in &p.per_concept[1..] {
        let mut next: BTreeSet<PhaseWalk> = BTreeSet::new();
        for l in &state {
            let incident: Vec<(&Triple, &Iri)> = edges
                .iter()
                .filter_map(|e| {
                    if e.s == *n && l.servers.contains_key(&e.o) {
                        Some((*e, &e.o))
                    } else if e.o == *n && l.servers.contains_key(&e.s) {
                        Some((*e, &e.s))
                    } else {
                        None
                    }
                })
                .collect();
            for r in rights {
                let rw = r.wrappers().next().expect("single wrapper").clone();
                let mut base = PhaseWalk { walk: l.walk.merge(r), servers: l.servers.clone() };
                base.servers.insert(n.clone(), rw.clone());
                if !base.walk.has_distinct_sources() {
                    *out.dropped.entry(Drop::SharedSource).or_default() += 1;
                    continue;
                }
                let mut candidates = vec![base];
                for (e, m) in &incident {
                    let mut grown = Vec::new();
                    for cand in &candidates {
                        let (sm, sn) = (&cand.servers[*m], &cand.servers[n]);
                        let mut providers: Vec<Iri> =
                            [sm, sn].into_iter().filter(|w| cat.provides(w, e)).cloned().collect();
                        providers.dedup();
                        if providers.is_empty() {
                            providers = cat.providers(e);
                        }
                        if providers.is_empty() {
                            *out.dropped.entry(Drop::NoProvider).or_default() += 1;
                            out.first_no_path.get_or_insert(((*m).clone(), n.clone()));
                            continue;
                        }
                        for pe in providers {
                            grown.extend(join_through(cat, cand, &pe, [(*m, sm), (n, sn)], &mut id_cache, &mut out));
                        }
                    }
                    candidates = grown;
                }
                next.extend(candidates);
            }
        }
        state = next.into_iter().collect();
        if state.is_empty() {
            break;
        }
    }

    let mut seen = HashSet::new();
    for pw in state {
        if seen.insert(pw.walk.clone()) {
            out.walks.push(pw.walk);
        }
    }
    out.walks.sort();
    for (d, k) in &out.dropped {
        let what = match d {
            Drop::SharedSource => "two wrappers of the same source",
            Drop::NoProvider => "no wrapper provides a concept edge",
            Drop::MissingId => "a wrapper lacks the identifier attribute needed for a join",
        };
        out.diagnostics.push(format!("discarded {k} candidate(s): {what}"));
    }
    out
}

/// Adds edge provider `pe` to the candidate and joins it to the server of
/// each endpoint concept on that concept's identifier. One result per
/// combination of identifier features.
fn join_through(
    cat: &Catalog,
    cand: &PhaseWalk,
    pe: &Iri,
    ends: [(&Iri, &Iri); 2],
    id_cache: &mut HashMap<Iri, Vec<Iri>>,
    out: &mut InterResult,
) -> Vec<PhaseWalk> {
    let mut base = cand.clone();
    if !base.walk.contains_wrapper(pe) {
        base.walk.add_wrapper(cat.wrappers[pe].clone());
        if !base.walk.has_distinct_sources() {
            *out.dropped.entry(Drop::SharedSource).or_default() += 1;
            return Vec::new();
        }
    }
    let mut results = vec![base];
    for (concept, server) in ends {
        if server == pe {
            continue;
        }
        let ids = id_cache
            .entry(concept.clone())
            .or_insert_with(|| identifier_features(cat.ds, concept))
            .clone();
        let mut options = Vec::new();
        for id in &ids {
            if let (Some(a), Some(b)) = (cat.attributes_for(pe, id).first(), cat.attributes_for(server, id).first()) {
                options.push(JoinCondition::new(AttrRef::new(pe.clone(), a.clone()), AttrRef::new(server.clone(), b.clone())));
            }
        }
        if options.is_empty() {
            *out.dropped.entry(Drop::MissingId).or_default() += results.len();
            let culprit = if ids.iter().any(|id| cat.attributes_for(pe, id).is_empty()) { pe } else { server };
            out.first_missing_id.get_or_insert((culprit.clone(), concept.clone()));
            return Vec::new();
        }
        results = results
            .iter()
            .flat_map(|r| {
                options.iter().map(move |j| {
                    let mut r = r.clone();
                    r.walk.add_join(j.clone());
                    r
                })
            })
            .collect();
    }
    results
}

/// Phase outputs kept for `explain`.
#[derive(Debug, Clone)]
pub struct RewriteTrace {
    pub well_formed: OmqQuery,
    pub expanded: ExpandedQuery,
    pub partial: PartialWalkSet,
    pub phase3: Vec<Walk>,
    pub diagnostics: Vec<String>,
}

impl RewriteTrace {
    pub fn render(&self, prefixes: &PrefixTable) -> String {
        let c = |i: &Iri| prefixes.compact(i);
        let mut out = String::new();
        let concepts: Vec<String> = self.expanded.concepts.iter().map(c).collect();
        let _ = writeln!(out, "phase 1: concepts [{}]", concepts.join(", "));
        for t in self.expanded.query.phi.difference(&self.well_formed.phi) {
            let _ = writeln!(out, "phase 1: expanded with {} {} {}", c(&t.s), c(&t.p), c(&t.o));
        }
        for (concept, walks) in &self.partial.per_concept {
            let ws: Vec<String> = walks.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "phase 2: {} -> {{{}}}", c(concept), ws.join(", "));
        }
        for w in &self.phase3 {
            let _ = writeln!(out, "phase 3: {w}");
        }
        for d in &self.diagnostics {
            let _ = writeln!(out, "note: {d}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Rewriting {
    pub ucq: Ucq,
    pub trace: RewriteTrace,
}

/// Parses and rewrites query text.
pub fn rewrite(q_text: &str, ds: &Dataset) -> Result<Rewriting, RewriteError> {
    let q = parse_omq(q_text, ds)?;
    rewrite_query(&q, ds)
}

/// Phases 1 to 3 only; used by the benchmarks.
pub fn generate_walks(q: &OmqQuery, ds: &Dataset) -> Result<Vec<Walk>, RewriteError> {
    let cat = Catalog::new(ds);
    let wf = well_formed_rewrite(ds, q)?;
    let x = query_expansion(&wf, ds)?;
    let p = intra(&cat, &x)?;
    finish_inter(inter(&cat, &p, &x)).map(|r| r.walks)
}

/// Rewrites a parsed query. Emitted walks are covering and minimal with
/// respect to the well-formed pattern and pairwise non-equivalent; output
/// columns follow the order of `q.pi` after well-formedness repair.
pub fn rewrite_query(q: &OmqQuery, ds: &Dataset) -> Result<Rewriting, RewriteError> {
    let cat = Catalog::new(ds);
    let wf = well_formed_rewrite(ds, q)?;
    let expanded = query_expansion(&wf, ds)?;
    let partial = intra(&cat, &expanded)?;
    let inter = finish_inter(inter(&cat, &partial, &expanded))?;
    let mut diagnostics = inter.diagnostics.clone();

    let cover = CoverageIndex::new(ds, &wf.phi);
    let mut conjuncts: Vec<Conjunct> = Vec::new();
    let mut seen = HashSet::new();
    let (mut not_minimal, mut unbound) = (0usize, 0usize);
    for walk in &inter.walks {
        let ws: Vec<&Iri> = walk.wrappers().collect();
        let keep = match cover.is_minimal(&ws) {
            Ok(m) => m,
            Err(SourceModelError::NotCovering) => false,
            Err(e) => return Err(e.into()),
        };
        if !keep {
            not_minimal += 1;
            continue;
        }
        let Some(columns) = bind_columns(&cat, walk, &wf.pi) else {
            unbound += 1;
            continue;
        };
        let sig = {
            let (w, j) = walk.signature();
            (w.into_iter().cloned().collect::<Vec<_>>(), j.into_iter().cloned().collect::<Vec<_>>())
        };
        if seen.insert(sig) {
            conjuncts.push(Conjunct { walk: walk.clone(), columns });
        }
    }
    if not_minimal > 0 {
        diagnostics.push(format!("pruned {not_minimal} walk(s) that are not covering and minimal"));
    }
    if unbound > 0 {
        diagnostics.push(format!("pruned {unbound} walk(s) lacking an attribute for a projected feature"));
    }
    if conjuncts.is_empty() {
        return Err(RewriteError::NoCoveringWalk);
    }
    Ok(Rewriting {
        ucq: Ucq { output_features: wf.pi.clone(), conjuncts },
        trace: RewriteTrace { well_formed: wf, expanded, partial, phase3: inter.walks, diagnostics },
    })
}

/// One attribute per projected feature, preferring projected attributes and
/// then canonical wrapper order.
fn bind_columns(cat: &Catalog, walk: &Walk, pi: &[Iri]) -> Option<Vec<AttrRef>> {
    pi.iter()
        .map(|f| {
            let mut fallback = None;
            for step in walk.steps() {
                let w = step.wrapper.iri();
                for a in cat.attributes_for(&w, f) {
                    if step.projected.contains(&a) {
                        return Some(AttrRef::new(w, a));
                    }
                    if fallback.is_none() && step.wrapper.is_id(&a) {
                        fallback = Some(AttrRef::new(w.clone(), a));
                    }
                }
            }
            fallback
        })
        .collect()
}
