//! Metamodel vocabulary of the Global, Source and Mapping graphs.

use std::sync::OnceLock;

use crate::iri::Iri;

/// Namespace IRIs.
pub mod ns {
    pub const GLOBAL: &str = "http://www.essi.upc.edu/~snadal/BDIOntology/Global/";
    pub const SOURCE: &str = "http://www.essi.upc.edu/~snadal/BDIOntology/Source/";
    pub const MAPPING: &str = "http://www.essi.upc.edu/~snadal/BDIOntology/Mapping/";
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
    pub const SCHEMA: &str = "http://schema.org/";
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub concept: Iri,
    pub feature: Iri,
    pub has_feature: Iri,
    pub has_data_type: Iri,
    pub data_source: Iri,
    pub wrapper: Iri,
    pub attribute: Iri,
    pub has_wrapper: Iri,
    pub has_attribute: Iri,
    pub mapping: Iri,
    pub same_as: Iri,
    pub rdf_type: Iri,
    pub sub_class_of: Iri,
    pub datatype: Iri,
    pub identifier: Iri,
    /// Graph ids of the three reserved graphs.
    pub global_graph: Iri,
    pub source_graph: Iri,
    pub mapping_graph: Iri,
}

/// Shared vocabulary constants.
pub fn vocab() -> &'static Vocabulary {
    static V: OnceLock<Vocabulary> = OnceLock::new();
    V.get_or_init(|| {
        let g = |l: &str| Iri::new(format!("{}{l}", ns::GLOBAL)).unwrap();
        let s = |l: &str| Iri::new(format!("{}{l}", ns::SOURCE)).unwrap();
        let m = |l: &str| Iri::new(format!("{}{l}", ns::MAPPING)).unwrap();
        Vocabulary {
            concept: g("Concept"),
            feature: g("Feature"),
            has_feature: g("hasFeature"),
            has_data_type: g("hasDataType"),
            data_source: s("DataSource"),
            wrapper: s("Wrapper"),
            attribute: s("Attribute"),
            has_wrapper: s("hasWrapper"),
            has_attribute: s("hasAttribute"),
            mapping: m("mapping"),
            same_as: Iri::new(format!("{}sameAs", ns::OWL)).unwrap(),
            rdf_type: Iri::new(format!("{}type", ns::RDF)).unwrap(),
            sub_class_of: Iri::new(format!("{}subClassOf", ns::RDFS)).unwrap(),
            datatype: Iri::new(format!("{}Datatype", ns::RDFS)).unwrap(),
            identifier: Iri::new(format!("{}identifier", ns::SCHEMA)).unwrap(),
            global_graph: Iri::from_static(ns::GLOBAL),
            source_graph: Iri::from_static(ns::SOURCE),
            mapping_graph: Iri::from_static(ns::MAPPING),
        }
    })
}

impl Vocabulary {
    /// `S:DataSource/<name>`
    pub fn source_iri(&self, name: &str) -> Iri {
        self.data_source.child(name)
    }

    /// `S:Wrapper/<name>`
    pub fn wrapper_iri(&self, name: &str) -> Iri {
        self.wrapper.child(name)
    }

    /// Named graph holding a wrapper's LAV subgraph: `M:graph/<name>`.
    pub fn mapping_graph_iri(&self, wrapper_name: &str) -> Iri {
        Iri::new(format!("{}graph/{wrapper_name}", ns::MAPPING)).unwrap()
    }

    pub fn is_reserved_graph(&self, g: &Iri) -> bool {
        *g == self.global_graph || *g == self.source_graph || *g == self.mapping_graph
    }
}
