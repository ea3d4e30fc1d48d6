//! Registering a new wrapper release: source, wrapper, attributes, the LAV
//! named graph and the attribute-to-feature links.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iri::{Iri, IriError};
use crate::quadstore::{Dataset, Quad, Triple};
use crate::source_model::{SourceModelError, WrapperSchema};
use crate::vocab::vocab;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReleaseError {
    #[error("subgraph triple `{}` `{}` `{}` is not in the Global graph", .0.s, .0.p, .0.o)]
    SubgraphNotInGlobal(Triple),
    #[error("wrapper `{0}` is already registered")]
    DuplicateWrapper(String),
    #[error("attribute `{attribute}` maps to {feature}, which is not a feature of the subgraph")]
    DanglingFeatureMap { attribute: String, feature: Iri },
    #[error("feature map names `{0}`, which is not an attribute of the wrapper")]
    UnknownAttribute(String),
    #[error("feature {0} in the subgraph is not attached to any concept of the subgraph")]
    OrphanFeature(Iri),
    #[error("ID attribute `{0}` must map to an identifier feature")]
    UnmappedId(String),
    #[error("attribute `{attribute}` is {role} but maps to {feature}")]
    RoleMismatch { attribute: String, role: &'static str, feature: Iri },
    #[error("attribute {attribute} is already mapped to {existing}, not {requested}")]
    ConflictingFeatureMap { attribute: Iri, existing: Iri, requested: Iri },
    #[error(transparent)]
    InvalidWrapper(#[from] SourceModelError),
    #[error(transparent)]
    Iri(#[from] IriError),
    #[error("malformed release descriptor: {0}")]
    Descriptor(String),
}

/// `R = ⟨w, G, F⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub wrapper: WrapperSchema,
    pub subgraph: BTreeSet<Triple>,
    pub feature_map: BTreeMap<String, Iri>,
}

/// Quads actually inserted, per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthStats {
    pub source: usize,
    pub wrapper: usize,
    pub attribute_type: usize,
    pub attribute_link: usize,
    pub mapping: usize,
    pub mapping_graph: usize,
    pub same_as: usize,
}

impl GrowthStats {
    pub fn total(&self) -> usize {
        self.source
            + self.wrapper
            + self.attribute_type
            + self.attribute_link
            + self.mapping
            + self.mapping_graph
            + self.same_as
    }

    pub fn header() -> &'static str {
        "source,wrapper,attribute_type,attribute_link,mapping,mapping_graph,same_as,total"
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.source,
            self.wrapper,
            self.attribute_type,
            self.attribute_link,
            self.mapping,
            self.mapping_graph,
            self.same_as,
            self.total()
        )
    }
}

impl AddAssign for GrowthStats {
    fn add_assign(&mut self, o: Self) {
        self.source += o.source;
        self.wrapper += o.wrapper;
        self.attribute_type += o.attribute_type;
        self.attribute_link += o.attribute_link;
        self.mapping += o.mapping;
        self.mapping_graph += o.mapping_graph;
        self.same_as += o.same_as;
    }
}

impl fmt::Display for GrowthStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "source={} wrapper={} attribute_type={} attribute_link={} mapping={} mapping_graph={} same_as={} total={}",
            self.source,
            self.wrapper,
            self.attribute_type,
            self.attribute_link,
            self.mapping,
            self.mapping_graph,
            self.same_as,
            self.total()
        )
    }
}

impl Release {
    /// Upper bound on the quads a release can add to a dataset that already
    /// knows its source.
    pub fn growth_bound(&self) -> usize {
        3 + 2 * self.wrapper.attributes().count() + self.subgraph.len() + self.feature_map.len()
    }

    /// Checks the release against a dataset without touching it.
    pub fn check(&self, ds: &Dataset) -> Result<(), ReleaseError> {
        let v = vocab();
        let g = &v.global_graph;
        let w = &self.wrapper;
        if ds.has_type(&v.source_graph, &w.iri(), &v.wrapper) {
            return Err(ReleaseError::DuplicateWrapper(w.name.clone()));
        }
        if let Some(t) = self.subgraph.iter().find(|t| !ds.has(g, &t.s, &t.p, &t.o)) {
            return Err(ReleaseError::SubgraphNotInGlobal(t.clone()));
        }
        let attached: BTreeSet<&Iri> =
            self.subgraph.iter().filter(|t| t.p == v.has_feature).map(|t| &t.o).collect();
        for t in &self.subgraph {
            for x in [&t.s, &t.o] {
                if ds.has_type(g, x, &v.feature) && !attached.contains(x) {
                    return Err(ReleaseError::OrphanFeature(x.clone()));
                }
            }
        }
        for (a, f) in &self.feature_map {
            if !w.has_attribute(a) {
                return Err(ReleaseError::UnknownAttribute(a.clone()));
            }
            if !attached.contains(f) {
                return Err(ReleaseError::DanglingFeatureMap { attribute: a.clone(), feature: f.clone() });
            }
            let is_id_feature = ds.is_subclass_of(f, &v.identifier);
            if w.is_id(a) != is_id_feature {
                let role = if w.is_id(a) { "an ID" } else { "not an ID" };
                return Err(ReleaseError::RoleMismatch { attribute: a.clone(), role, feature: f.clone() });
            }
            let attr = w.attribute_iri(a);
            if let Some(existing) = ds
                .objects(&v.mapping_graph, &attr, &v.same_as)
                .into_iter()
                .find(|e| e != f && ds.has_type(g, e, &v.feature))
            {
                return Err(ReleaseError::ConflictingFeatureMap { attribute: attr, existing, requested: f.clone() });
            }
        }
        if let Some(a) = w.id_attrs.iter().find(|a| !self.feature_map.contains_key(*a)) {
            return Err(ReleaseError::UnmappedId(a.clone()));
        }
        // Reused attributes keep the role their existing mapping gives them.
        for a in w.attributes() {
            for f in ds.objects(&v.mapping_graph, &w.attribute_iri(a), &v.same_as) {
                if ds.is_subclass_of(&f, &v.identifier) != w.is_id(a) {
                    let role = if w.is_id(a) { "an ID" } else { "not an ID" };
                    return Err(ReleaseError::RoleMismatch { attribute: a.to_string(), role, feature: f });
                }
            }
        }
        Ok(())
    }
}

/// Applies a release in place. The dataset is left untouched when the
/// release is rejected.
pub fn apply_release(ds: &mut Dataset, r: &Release) -> Result<GrowthStats, ReleaseError> {
    r.check(ds)?;
    let v = vocab();
    let (s, m) = (&v.source_graph, &v.mapping_graph);
    let w = &r.wrapper;
    let mut stats = GrowthStats::default();
    let add = |ds: &mut Dataset, q: Quad| usize::from(ds.insert(q));

    let src = &w.source.iri;
    if !ds.has_type(s, src, &v.data_source) {
        stats.source += add(ds, Quad::new(s.clone(), src.clone(), v.rdf_type.clone(), v.data_source.clone()));
    }
    let w_iri = w.iri();
    stats.wrapper += add(ds, Quad::new(s.clone(), w_iri.clone(), v.rdf_type.clone(), v.wrapper.clone()));
    stats.wrapper += add(ds, Quad::new(s.clone(), src.clone(), v.has_wrapper.clone(), w_iri.clone()));
    for a in w.attributes() {
        let a_iri = w.attribute_iri(a);
        if !ds.has_type(s, &a_iri, &v.attribute) {
            stats.attribute_type += add(ds, Quad::new(s.clone(), a_iri.clone(), v.rdf_type.clone(), v.attribute.clone()));
        }
        stats.attribute_link += add(ds, Quad::new(s.clone(), w_iri.clone(), v.has_attribute.clone(), a_iri));
    }
    let graph = v.mapping_graph_iri(&w.name);
    stats.mapping += add(ds, Quad::new(m.clone(), w_iri.clone(), v.mapping.clone(), graph.clone()));
    for t in &r.subgraph {
        stats.mapping_graph += add(ds, t.in_graph(&graph));
    }
    for (a, f) in &r.feature_map {
        stats.same_as += add(ds, Quad::new(m.clone(), w.attribute_iri(a), v.same_as.clone(), f.clone()));
    }
    Ok(stats)
}

/// Non-mutating variant of [`apply_release`].
pub fn with_release(ds: &Dataset, r: &Release) -> Result<(Dataset, GrowthStats), ReleaseError> {
    let mut next = ds.clone();
    let stats = apply_release(&mut next, r)?;
    Ok((next, stats))
}

/// On-disk release description. Terms are prefixed names or `<full>` IRIs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseDescriptor {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prefixes: BTreeMap<String, String>,
    pub wrapper: WrapperDescriptor,
    pub subgraph: Vec<[String; 3]>,
    pub feature_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapperDescriptor {
    pub name: String,
    pub source: String,
    #[serde(default)]
    pub id_attributes: Vec<String>,
    #[serde(default)]
    pub non_id_attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
}

impl ReleaseDescriptor {
    pub fn from_json(text: &str) -> Result<Self, ReleaseError> {
        serde_json::from_str(text).map_err(|e| ReleaseError::Descriptor(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }

    /// Registers the descriptor's prefixes in `ds` and resolves its terms.
    pub fn resolve(&self, ds: &mut Dataset) -> Result<Release, ReleaseError> {
        for (p, n) in &self.prefixes {
            ds.add_prefix(p.clone(), n.clone());
        }
        let wd = &self.wrapper;
        let wrapper = WrapperSchema::new(&wd.name, &wd.source, wd.id_attributes.clone(), wd.non_id_attributes.clone())?;
        let mut subgraph = BTreeSet::new();
        for [s, p, o] in &self.subgraph {
            subgraph.insert(Triple::new(ds.iri(s)?, ds.iri(p)?, ds.iri(o)?));
        }
        let mut feature_map = BTreeMap::new();
        for (a, f) in &self.feature_map {
            feature_map.insert(a.clone(), ds.iri(f)?);
        }
        Ok(Release { wrapper, subgraph, feature_map })
    }

    /// Describes an in-memory release, compacting IRIs with `ds`'s prefixes.
    pub fn describe(r: &Release, ds: &Dataset, data_file: Option<String>) -> Self {
        let c = |i: &Iri| ds.compact(i);
        ReleaseDescriptor {
            prefixes: BTreeMap::new(),
            wrapper: WrapperDescriptor {
                name: r.wrapper.name.clone(),
                source: r.wrapper.source.name.clone(),
                id_attributes: r.wrapper.id_attrs.clone(),
                non_id_attributes: r.wrapper.non_id_attrs.clone(),
                data_file,
            },
            subgraph: r.subgraph.iter().map(|t| [c(&t.s), c(&t.p), c(&t.o)]).collect(),
            feature_map: r.feature_map.iter().map(|(a, f)| (a.clone(), c(f))).collect(),
        }
    }
}
