#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use bdi_core::query::identifier_features;
use bdi_core::source_model::{wrapper_catalog, AttrRef, JoinCondition};
use bdi_core::validate::Rule;
use bdi_core::{apply_release, vocab, well_formed_rewrite, Dataset, Iri, OmqQuery, Quad, Release, Triple, Walk, WrapperSchema};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub const EX: &str = "http://example.org/t/";

pub fn ex(local: &str) -> Iri {
    Iri::new(format!("{EX}{local}")).unwrap()
}

/// Concepts in a random tree, one identifier per concept and extra
/// non-identifier features spread over the concepts.
#[derive(Debug, Clone)]
pub struct Universe {
    pub concepts: Vec<Iri>,
    pub ids: Vec<Iri>,
    /// (feature, owning concept index)
    pub features: Vec<(Iri, usize)>,
    /// (subject index, predicate, object index)
    pub edges: Vec<(usize, Iri, usize)>,
}

impl Universe {
    pub fn random(rng: &mut StdRng, concepts: usize, extra_features: usize) -> Universe {
        let cs: Vec<Iri> = (0..concepts).map(|i| ex(&format!("C{i}"))).collect();
        let ids = (0..concepts).map(|i| ex(&format!("id{i}"))).collect();
        let features = (0..extra_features).map(|j| (ex(&format!("f{j}")), rng.gen_range(0..concepts))).collect();
        let mut edges = Vec::new();
        for i in 1..concepts {
            let parent = rng.gen_range(0..i);
            let p = ex(&format!("e{i}"));
            if rng.gen_bool(0.5) {
                edges.push((parent, p, i));
            } else {
                edges.push((i, p, parent));
            }
        }
        Universe { concepts: cs, ids, features, edges }
    }

    pub fn edge_triple(&self, e: &(usize, Iri, usize)) -> Triple {
        Triple::new(self.concepts[e.0].clone(), e.1.clone(), self.concepts[e.2].clone())
    }

    pub fn has_feature(&self, c: usize, f: &Iri) -> Triple {
        Triple::new(self.concepts[c].clone(), vocab().has_feature.clone(), f.clone())
    }

    pub fn features_of(&self, c: usize) -> Vec<&Iri> {
        self.features.iter().filter(|(_, o)| *o == c).map(|(f, _)| f).collect()
    }

    /// Edges incident to concept `c` with the neighbour's index.
    pub fn incident(&self, c: usize) -> Vec<(&(usize, Iri, usize), usize)> {
        self.edges
            .iter()
            .filter_map(|e| if e.0 == c { Some((e, e.2)) } else if e.2 == c { Some((e, e.0)) } else { None })
            .collect()
    }

    pub fn global(&self) -> Dataset {
        let v = vocab();
        let mut ds = Dataset::new();
        ds.add_prefix("ex", EX);
        let g = &v.global_graph;
        let mut put = |s: &Iri, p: &Iri, o: &Iri| ds.insert(Quad::new(g.clone(), s.clone(), p.clone(), o.clone()));
        for (i, c) in self.concepts.iter().enumerate() {
            put(c, &v.rdf_type, &v.concept);
            put(&self.ids[i], &v.rdf_type, &v.feature);
            put(&self.ids[i], &v.sub_class_of, &v.identifier);
            put(c, &v.has_feature, &self.ids[i]);
        }
        for (f, c) in &self.features {
            put(f, &v.rdf_type, &v.feature);
            put(&self.concepts[*c], &v.has_feature, f);
        }
        for e in &self.edges {
            put(&self.concepts[e.0], &e.1, &self.concepts[e.2]);
        }
        ds
    }
}

/// A small random instance: a Global graph, wrappers anchored at concepts
/// and a connected query over all concepts.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ds: Dataset,
    pub universe: Universe,
    pub query: OmqQuery,
}

pub fn random_instance(rng: &mut StdRng) -> Instance {
    let k = rng.gen_range(1..=3);
    let extra = rng.gen_range(0..=6 - k);
    let u = Universe::random(rng, k, extra);
    let mut ds = u.global();
    let mut sources: Vec<String> = Vec::new();
    for c in 0..k {
        for j in 0..rng.gen_range(1..=3) {
            let name = format!("w{c}_{j}");
            let source = if !sources.is_empty() && rng.gen_bool(0.15) {
                sources.choose(rng).unwrap().clone()
            } else {
                format!("D{c}_{j}")
            };
            sources.push(source.clone());
            let mut ids = vec![format!("k{c}")];
            let mut non_ids = Vec::new();
            let mut subgraph = BTreeSet::from([u.has_feature(c, &u.ids[c])]);
            let mut map = BTreeMap::from([(format!("k{c}"), u.ids[c].clone())]);
            for f in u.features_of(c) {
                if rng.gen_bool(0.6) {
                    let a = format!("a{}", f.local_name());
                    non_ids.push(a.clone());
                    subgraph.insert(u.has_feature(c, f));
                    map.insert(a, f.clone());
                }
            }
            for (e, n) in u.incident(c) {
                if rng.gen_bool(0.5) {
                    subgraph.insert(u.edge_triple(e));
                    if rng.gen_bool(0.75) {
                        ids.push(format!("k{n}"));
                        subgraph.insert(u.has_feature(n, &u.ids[n]));
                        map.insert(format!("k{n}"), u.ids[n].clone());
                    }
                }
            }
            let wrapper = WrapperSchema::new(name, source, ids, non_ids).unwrap();
            apply_release(&mut ds, &Release { wrapper, subgraph, feature_map: map }).unwrap();
        }
    }

    let mut pi = Vec::new();
    let mut phi: BTreeSet<Triple> = u.edges.iter().map(|e| u.edge_triple(e)).collect();
    for (f, c) in &u.features {
        if rng.gen_bool(0.5) {
            pi.push(f.clone());
            phi.insert(u.has_feature(*c, f));
        }
    }
    if pi.is_empty() {
        pi.push(u.ids[0].clone());
        phi.insert(u.has_feature(0, &u.ids[0]));
    }
    pi.shuffle(rng);
    Instance { ds, universe: u, query: OmqQuery { pi, phi } }
}

/// Wrapper set and join set of a walk.
pub type Signature = (Vec<Iri>, Vec<JoinCondition>);

pub fn signature(w: &Walk) -> Signature {
    let (ws, js) = w.signature();
    (ws.into_iter().cloned().collect(), js.into_iter().cloned().collect())
}

fn mapping_graphs(ds: &Dataset, w: &Iri) -> Vec<Iri> {
    let v = vocab();
    ds.objects(&v.mapping_graph, w, &v.mapping)
}

fn provides(ds: &Dataset, w: &Iri, t: &Triple) -> bool {
    mapping_graphs(ds, w).iter().any(|g| ds.has(g, &t.s, &t.p, &t.o))
}

fn attrs_for(ds: &Dataset, schema: &WrapperSchema, f: &Iri) -> Vec<String> {
    let v = vocab();
    schema
        .attributes()
        .filter(|a| ds.has(&v.mapping_graph, &schema.attribute_iri(a), &v.same_as, f))
        .map(str::to_string)
        .collect()
}

fn covers(ds: &Dataset, ws: &[Iri], phi: &BTreeSet<Triple>) -> bool {
    phi.iter().all(|t| ws.iter().any(|w| provides(ds, w, t)))
}

/// Covering, and no proper subset obtained by dropping one wrapper covers.
pub fn covering_minimal(ds: &Dataset, ws: &[Iri], phi: &BTreeSet<Triple>) -> bool {
    covers(ds, ws, phi)
        && (0..ws.len()).all(|i| {
            let rest: Vec<Iri> = ws.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w.clone()).collect();
            !covers(ds, &rest, phi)
        })
}

/// Every wrapper subset with pairwise-distinct sources that is covering
/// and minimal.
pub fn covering_minimal_sets(ds: &Dataset, phi: &BTreeSet<Triple>) -> BTreeSet<Vec<Iri>> {
    let cat = wrapper_catalog(ds);
    let all: Vec<(&Iri, &Arc<WrapperSchema>)> = cat.iter().collect();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << all.len()) {
        let chosen: Vec<_> = all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, x)| *x).collect();
        let srcs: BTreeSet<_> = chosen.iter().map(|(_, s)| &s.source).collect();
        if srcs.len() != chosen.len() {
            continue;
        }
        let ws: Vec<Iri> = chosen.iter().map(|(w, _)| (*w).clone()).collect();
        if covering_minimal(ds, &ws, phi) {
            out.insert(ws);
        }
    }
    out
}

fn product<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    choices.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect()
    })
}

/// Brute-force enumeration of the rewritings of `q`: every assignment of a
/// serving wrapper to each concept, every admissible provider for each
/// concept edge and every identifier join between a provider and the
/// servers it touches, kept when the wrapper set has distinct sources and
/// is covering and minimal. `None` when the query is rejected before
/// rewriting.
pub fn oracle(ds: &Dataset, q: &OmqQuery) -> Option<BTreeSet<Signature>> {
    let v = vocab();
    let wf = well_formed_rewrite(ds, q).ok()?;
    let is_concept = |x: &Iri| ds.has_type(&v.global_graph, x, &v.concept);
    let concepts: Vec<Iri> = wf.vertices().into_iter().filter(|x| is_concept(x)).cloned().collect();
    let mut phi = wf.phi.clone();
    for c in &concepts {
        for id in identifier_features(ds, c) {
            phi.insert(Triple::new(c.clone(), v.has_feature.clone(), id));
        }
    }
    let edges: Vec<Triple> = phi
        .iter()
        .filter(|t| t.p != v.has_feature && t.s != t.o && is_concept(&t.s) && is_concept(&t.o))
        .cloned()
        .collect();
    let cat = wrapper_catalog(ds);

    let mut servers: Vec<Vec<Iri>> = Vec::new();
    for c in &concepts {
        let wanted: BTreeSet<&Iri> = phi.iter().filter(|t| t.s == *c && t.p == v.has_feature).map(|t| &t.o).collect();
        let ok: Vec<Iri> = cat
            .iter()
            .filter(|(w, s)| {
                let got: BTreeSet<&Iri> = phi
                    .iter()
                    .filter(|t| t.s == *c && t.p == v.has_feature)
                    .filter(|t| provides(ds, w, t) && !attrs_for(ds, s, &t.o).is_empty())
                    .map(|t| &t.o)
                    .collect();
                got == wanted
            })
            .map(|(w, _)| w.clone())
            .collect();
        servers.push(ok);
    }

    let mut out = BTreeSet::new();
    for assign in product(&servers) {
        let server = |c: &Iri| &assign[concepts.iter().position(|x| x == c).unwrap()];
        let provider_opts: Vec<Vec<Iri>> = edges
            .iter()
            .map(|e| {
                let near: BTreeSet<Iri> =
                    [server(&e.s), server(&e.o)].into_iter().filter(|w| provides(ds, w, e)).cloned().collect();
                if near.is_empty() {
                    cat.keys().filter(|w| provides(ds, w, e)).cloned().collect()
                } else {
                    near.into_iter().collect()
                }
            })
            .collect();
        for providers in product(&provider_opts) {
            let ws: BTreeSet<Iri> = assign.iter().chain(&providers).cloned().collect();
            let srcs: BTreeSet<_> = ws.iter().map(|w| &cat[w].source).collect();
            if srcs.len() != ws.len() {
                continue;
            }
            let mut join_opts: Vec<Vec<JoinCondition>> = Vec::new();
            let mut feasible = true;
            for (e, p) in edges.iter().zip(&providers) {
                for end in [&e.s, &e.o] {
                    let s = server(end);
                    if s == p {
                        continue;
                    }
                    let opts: Vec<JoinCondition> = identifier_features(ds, end)
                        .iter()
                        .filter_map(|id| {
                            let a = attrs_for(ds, &cat[p], id).into_iter().next()?;
                            let b = attrs_for(ds, &cat[s], id).into_iter().next()?;
                            Some(JoinCondition::new(AttrRef::new(p.clone(), a), AttrRef::new(s.clone(), b)))
                        })
                        .collect();
                    if opts.is_empty() {
                        feasible = false;
                    }
                    join_opts.push(opts);
                }
            }
            if !feasible {
                continue;
            }
            let list: Vec<Iri> = ws.into_iter().collect();
            if !covering_minimal(ds, &list, &wf.phi) {
                continue;
            }
            for joins in product(&join_opts) {
                out.insert((list.clone(), joins.into_iter().collect::<BTreeSet<_>>().into_iter().collect()));
            }
        }
    }
    Some(out)
}

/// Tracks the attributes of each source so later versions can reuse or
/// rename them consistently.
#[derive(Debug, Default)]
pub struct StreamState {
    /// source → attribute → feature
    pub sources: BTreeMap<String, BTreeMap<String, Iri>>,
    pub wrappers: usize,
    pub fresh: usize,
}

fn name_for(rng: &mut StdRng, known: &BTreeMap<String, Iri>, f: &Iri, st: &mut StreamState) -> String {
    let reuse: Vec<&String> = known.iter().filter(|(_, g)| *g == f).map(|(a, _)| a).collect();
    if !reuse.is_empty() && rng.gen_bool(0.7) {
        reuse[0].clone()
    } else {
        st.fresh += 1;
        format!("a{}", st.fresh)
    }
}

/// A random release over `u`: a new source or a new version of an existing
/// one, anchored at a random concept, optionally carrying an incident edge.
pub fn random_release(rng: &mut StdRng, u: &Universe, st: &mut StreamState) -> Release {
    let c = rng.gen_range(0..u.concepts.len());
    let source = if !st.sources.is_empty() && rng.gen_bool(0.5) {
        st.sources.keys().cloned().collect::<Vec<_>>().choose(rng).unwrap().clone()
    } else {
        format!("S{}", st.sources.len())
    };
    let known = st.sources.entry(source.clone()).or_default().clone();
    let mut ids = Vec::new();
    let mut non_ids = Vec::new();
    let mut subgraph = BTreeSet::from([u.has_feature(c, &u.ids[c])]);
    let mut map = BTreeMap::new();
    let a = name_for(rng, &known, &u.ids[c], st);
    ids.push(a.clone());
    map.insert(a, u.ids[c].clone());
    for f in u.features_of(c) {
        if rng.gen_bool(0.6) {
            let a = name_for(rng, &known, f, st);
            non_ids.push(a.clone());
            subgraph.insert(u.has_feature(c, f));
            map.insert(a, f.clone());
        }
    }
    let incident = u.incident(c);
    if let Some((e, n)) = incident.choose(rng) {
        if rng.gen_bool(0.5) {
            subgraph.insert(u.edge_triple(e));
            let a = name_for(rng, &known, &u.ids[*n], st);
            ids.push(a.clone());
            subgraph.insert(u.has_feature(*n, &u.ids[*n]));
            map.insert(a, u.ids[*n].clone());
        }
    }
    let attrs = st.sources.get_mut(&source).unwrap();
    for (a, f) in &map {
        attrs.insert(a.clone(), f.clone());
    }
    st.wrappers += 1;
    let wrapper = WrapperSchema::new(format!("v{}", st.wrappers), source, ids, non_ids).unwrap();
    Release { wrapper, subgraph, feature_map: map }
}

/// Adds quads that break exactly `rule` in a valid dataset built from `u`
/// with at least one wrapper.
pub fn inject(ds: &mut Dataset, u: &Universe, rule: Rule, rng: &mut StdRng) {
    let v = vocab();
    let cat = wrapper_catalog(ds);
    let (w, schema) = cat.iter().nth(rng.gen_range(0..cat.len())).unwrap();
    let attr = schema.attributes().next().unwrap().to_string();
    let attr_iri = schema.attribute_iri(&attr);
    let c = rng.gen_range(0..u.concepts.len());
    match rule {
        Rule::FeatureEdgeTyping => {
            ds.insert(Quad::new(v.global_graph.clone(), u.concepts[c].clone(), v.has_feature.clone(), ex("stray")));
        }
        Rule::SingleOwner => {
            let other = ex("Intruder");
            ds.insert(Quad::new(v.global_graph.clone(), other.clone(), v.rdf_type.clone(), v.concept.clone()));
            ds.insert(Quad::new(v.global_graph.clone(), other, v.has_feature.clone(), u.ids[c].clone()));
        }
        Rule::SourceEdgeTyping => {
            ds.insert(Quad::new(v.source_graph.clone(), w.clone(), v.has_attribute.clone(), schema.attribute_iri("untyped")));
        }
        Rule::SingleMapping => {
            let spare = ex("spare");
            ds.insert(Quad::new(v.global_graph.clone(), spare.clone(), v.rdf_type.clone(), v.feature.clone()));
            ds.insert(Quad::new(v.mapping_graph.clone(), attr_iri, v.same_as.clone(), spare));
        }
        Rule::MappingSubgraph => {
            let g = mapping_graphs(ds, w).remove(0);
            let t = Triple::new(u.concepts[c].clone(), ex("notInGlobal"), u.concepts[c].clone());
            ds.insert(t.in_graph(&g));
        }
        Rule::AttributePrefix => {
            let stray = ex("elsewhere/attr");
            ds.insert(Quad::new(v.source_graph.clone(), stray.clone(), v.rdf_type.clone(), v.attribute.clone()));
            ds.insert(Quad::new(v.source_graph.clone(), w.clone(), v.has_attribute.clone(), stray));
        }
    }
}
