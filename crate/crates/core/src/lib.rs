//! Ontology-based integration of evolving data sources: a quadstore for the
//! Global, Source and Mapping graphs, release management, and rewriting of
//! ontology-mediated queries into unions of conjunctive queries over
//! wrappers.

pub mod bench;
pub mod executor;
pub mod iri;
pub mod query;
pub mod quadstore;
pub mod release;
pub mod rewriter;
pub mod running_example;
pub mod source_model;
pub mod validate;
pub mod vocab;
pub mod workspace;

pub use iri::{Iri, IriError, PrefixTable};
pub use quadstore::{Dataset, Quad, QuadPattern, Triple};
pub use query::{parse_omq, well_formed_rewrite, OmqQuery, QueryError};
pub use release::{apply_release, GrowthStats, Release, ReleaseDescriptor, ReleaseError};
pub use rewriter::{rewrite, rewrite_query, RewriteError, Rewriting};
pub use source_model::{walk_equivalent, Ucq, Walk, WrapperSchema};
pub use validate::{validate_ontology, ValidationReport};
pub use vocab::vocab;
