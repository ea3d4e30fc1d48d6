//! Structural validation of a dataset against the metamodel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::iri::{Iri, PrefixTable};
use crate::quadstore::Dataset;
use crate::vocab::vocab;

/// The six structural rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// `G:hasFeature` links a concept to a feature.
    FeatureEdgeTyping = 1,
    /// A feature belongs to at most one concept.
    SingleOwner = 2,
    /// `S:hasWrapper` and `S:hasAttribute` are well typed.
    SourceEdgeTyping = 3,
    /// An attribute maps to at most one feature.
    SingleMapping = 4,
    /// Mapping graphs are subgraphs of the Global graph.
    MappingSubgraph = 5,
    /// Attribute IRIs extend their source IRI.
    AttributePrefix = 6,
}

impl Rule {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub const ALL: [Rule; 6] = [
        Rule::FeatureEdgeTyping,
        Rule::SingleOwner,
        Rule::SourceEdgeTyping,
        Rule::SingleMapping,
        Rule::MappingSubgraph,
        Rule::AttributePrefix,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub rule: Rule,
    pub subject: Iri,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_rule(&self, rule: Rule) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.rule == rule)
    }

    /// One `RULE<n> <iri> <detail>` line per violation.
    pub fn render(&self, prefixes: &PrefixTable) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str(&format!("RULE{} {} {}\n", v.rule.code(), prefixes.compact(&v.subject), v.detail));
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&PrefixTable::default()))
    }
}

pub fn validate_ontology(ds: &Dataset) -> ValidationReport {
    let v = vocab();
    let (g, s, m) = (&v.global_graph, &v.source_graph, &v.mapping_graph);
    let mut out = BTreeSet::new();
    let mut push = |rule, subject: &Iri, detail: String| {
        out.insert(Violation { rule, subject: subject.clone(), detail });
    };

    let mut owners: BTreeMap<Iri, BTreeSet<Iri>> = BTreeMap::new();
    for q in ds.find(Some(g), None, Some(&v.has_feature), None) {
        if !ds.has_type(g, &q.s, &v.concept) {
            push(Rule::FeatureEdgeTyping, &q.s, format!("subject of hasFeature {} is not a G:Concept", ds.compact(&q.o)));
        }
        if !ds.has_type(g, &q.o, &v.feature) {
            push(Rule::FeatureEdgeTyping, &q.o, format!("object of hasFeature from {} is not a G:Feature", ds.compact(&q.s)));
        }
        owners.entry(q.o).or_default().insert(q.s);
    }
    for (f, cs) in &owners {
        if cs.len() > 1 && ds.has_type(g, f, &v.feature) {
            let names: Vec<String> = cs.iter().map(|c| ds.compact(c)).collect();
            push(Rule::SingleOwner, f, format!("feature of {} concepts: {}", cs.len(), names.join(" ")));
        }
    }

    for q in ds.find(Some(s), None, Some(&v.has_wrapper), None) {
        if !ds.has_type(s, &q.s, &v.data_source) {
            push(Rule::SourceEdgeTyping, &q.s, "subject of hasWrapper is not a S:DataSource".into());
        }
        if !ds.has_type(s, &q.o, &v.wrapper) {
            push(Rule::SourceEdgeTyping, &q.o, "object of hasWrapper is not a S:Wrapper".into());
        }
    }
    for q in ds.find(Some(s), None, Some(&v.has_attribute), None) {
        if !ds.has_type(s, &q.s, &v.wrapper) {
            push(Rule::SourceEdgeTyping, &q.s, "subject of hasAttribute is not a S:Wrapper".into());
        }
        if !ds.has_type(s, &q.o, &v.attribute) {
            push(Rule::SourceEdgeTyping, &q.o, "object of hasAttribute is not a S:Attribute".into());
        }
        let sources = ds.subjects(s, &v.has_wrapper, &q.s);
        let prefixed = sources.iter().any(|src| {
            q.o.as_str().strip_prefix(src.as_str()).is_some_and(|r| r.len() > 1 && r.starts_with('/'))
        });
        if !sources.is_empty() && !prefixed {
            let src: Vec<String> = sources.iter().map(|x| ds.compact(x)).collect();
            push(Rule::AttributePrefix, &q.o, format!("not prefixed by its source {}", src.join(" ")));
        }
    }

    let mut mapped: BTreeMap<Iri, BTreeSet<Iri>> = BTreeMap::new();
    for q in ds.find(Some(m), None, Some(&v.same_as), None) {
        if !ds.has_type(g, &q.o, &v.feature) {
            push(Rule::SingleMapping, &q.s, format!("sameAs target {} is not a G:Feature", ds.compact(&q.o)));
        } else {
            mapped.entry(q.s).or_default().insert(q.o);
        }
    }
    for (a, fs) in &mapped {
        if fs.len() > 1 {
            let names: Vec<String> = fs.iter().map(|f| ds.compact(f)).collect();
            push(Rule::SingleMapping, a, format!("mapped to {} features: {}", fs.len(), names.join(" ")));
        }
    }

    for q in ds.find(Some(m), None, Some(&v.mapping), None) {
        if v.is_reserved_graph(&q.o) {
            push(Rule::MappingSubgraph, &q.o, format!("mapping of {} names a reserved graph", ds.compact(&q.s)));
            continue;
        }
        for t in ds.triples(&q.o) {
            if !ds.has(g, &t.s, &t.p, &t.o) {
                push(
                    Rule::MappingSubgraph,
                    &q.o,
                    format!("triple {} {} {} not in G:", ds.compact(&t.s), ds.compact(&t.p), ds.compact(&t.o)),
                );
            }
        }
    }

    ValidationReport { violations: out.into_iter().collect() }
}
