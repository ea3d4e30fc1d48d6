//! IRIs and the prefix table used to expand and compact them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::vocab::ns;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IriError {
    #[error("unknown prefix `{0}:`")]
    UnknownPrefix(String),
    #[error("empty IRI")]
    Empty,
    #[error("malformed IRI `{0}`")]
    Malformed(String),
}

/// A fully expanded IRI. Equality and ordering are byte-wise on the
/// expanded form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(Arc<str>);

impl Iri {
    /// Wraps an already expanded IRI.
    pub fn new(expanded: impl AsRef<str>) -> Result<Self, IriError> {
        let s = expanded.as_ref();
        if s.is_empty() {
            return Err(IriError::Empty);
        }
        if s.chars().any(|c| c.is_whitespace() || c == '<' || c == '>') {
            return Err(IriError::Malformed(s.to_string()));
        }
        Ok(Iri(Arc::from(s)))
    }

    pub(crate) fn from_static(s: &'static str) -> Self {
        Iri(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Appends a path segment (`self + "/" + segment`).
    pub fn child(&self, segment: &str) -> Iri {
        let mut s = String::with_capacity(self.0.len() + segment.len() + 1);
        s.push_str(&self.0);
        if !s.ends_with('/') {
            s.push('/');
        }
        s.push_str(segment);
        Iri(Arc::from(s))
    }

    /// Trailing segment after the last `/` or `#`.
    pub fn local_name(&self) -> &str {
        let s = self.as_str().trim_end_matches('/');
        match s.rfind(['/', '#']) {
            Some(i) => &s[i + 1..],
            None => s,
        }
    }
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Prefix → namespace table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTable {
    map: BTreeMap<String, String>,
}

impl Default for PrefixTable {
    /// The reserved prefixes of the metamodel plus the W3C ones.
    fn default() -> Self {
        let mut t = PrefixTable::empty();
        for (p, n) in [
            ("G", ns::GLOBAL),
            ("S", ns::SOURCE),
            ("M", ns::MAPPING),
            ("rdf", ns::RDF),
            ("rdfs", ns::RDFS),
            ("owl", ns::OWL),
            ("xsd", ns::XSD),
            ("sc", ns::SCHEMA),
        ] {
            t.map.insert(p.to_string(), n.to_string());
        }
        t
    }
}

impl PrefixTable {
    pub fn empty() -> Self {
        PrefixTable { map: BTreeMap::new() }
    }

    pub fn insert(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.map.insert(prefix.into(), namespace.into());
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.map.get(prefix).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(p, n)| (p.as_str(), n.as_str()))
    }

    /// Resolves `<full>`, `scheme://…` or `prefix:local`.
    pub fn expand(&self, term: &str) -> Result<Iri, IriError> {
        let term = term.trim();
        if term.is_empty() {
            return Err(IriError::Empty);
        }
        if let Some(inner) = term.strip_prefix('<') {
            let inner = inner
                .strip_suffix('>')
                .ok_or_else(|| IriError::Malformed(term.to_string()))?;
            return Iri::new(inner);
        }
        if term.contains("://") || term.starts_with("urn:") {
            return Iri::new(term);
        }
        let (prefix, local) = term
            .split_once(':')
            .ok_or_else(|| IriError::Malformed(term.to_string()))?;
        let ns = self
            .map
            .get(prefix)
            .ok_or_else(|| IriError::UnknownPrefix(prefix.to_string()))?;
        Iri::new(format!("{ns}{local}"))
    }

    /// Shortest prefixed form, or `<full>` when no namespace matches.
    pub fn compact(&self, iri: &Iri) -> String {
        let s = iri.as_str();
        let best = self
            .map
            .iter()
            .filter(|(_, n)| s.starts_with(n.as_str()))
            .max_by_key(|(_, n)| n.len());
        match best {
            Some((p, n)) => {
                let local = &s[n.len()..];
                if local.chars().all(is_local_char) && !local.ends_with('.') && !local.starts_with('.') {
                    format!("{p}:{local}")
                } else {
                    format!("<{s}>")
                }
            }
            None => format!("<{s}>"),
        }
    }
}

pub(crate) fn is_local_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '/' | '~' | '%')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expands_reserved_prefixes() {
        let t = PrefixTable::default();
        let a = t.expand("rdf:type").unwrap();
        assert_eq!(a.as_str(), "http://www.w3.org/1999/02/22-rdf-syntax-ns#type");
        let b = t.expand("<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_prefix_is_reported() {
        let t = PrefixTable::default();
        assert_eq!(t.expand("xx:foo"), Err(IriError::UnknownPrefix("xx".into())));
    }

    #[test]
    fn compact_picks_longest_namespace() {
        let mut t = PrefixTable::default();
        t.insert("ds", format!("{}DataSource/", ns::SOURCE));
        let iri = t.expand("S:DataSource/D1").unwrap();
        assert_eq!(t.compact(&iri), "ds:D1");
        let other = Iri::new("http://example.org/x y").err();
        assert!(other.is_some());
    }

    #[test]
    fn local_name_and_child() {
        let t = PrefixTable::default();
        let src = t.expand("S:DataSource/D1").unwrap();
        assert_eq!(src.child("lagRatio").local_name(), "lagRatio");
        assert_eq!(src.child("lagRatio").as_str(), format!("{}DataSource/D1/lagRatio", ns::SOURCE));
    }
}
