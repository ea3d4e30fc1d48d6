//! In-memory quad store with permuted indexes, subclass closure and a
//! line-oriented persistence format.
//!
//! Only IRI terms are stored. Records whose object is a literal are skipped
//! on load.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

use crate::iri::{Iri, IriError, PrefixTable};
use crate::vocab::vocab;

pub type GraphId = Iri;

#[derive(Debug, Error)]
pub enum QuadstoreError {
    #[error(transparent)]
    Iri(#[from] IriError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub s: Iri,
    pub p: Iri,
    pub o: Iri,
}

impl Triple {
    pub fn new(s: Iri, p: Iri, o: Iri) -> Self {
        Triple { s, p, o }
    }

    pub fn in_graph(&self, graph: &GraphId) -> Quad {
        Quad {
            graph: graph.clone(),
            s: self.s.clone(),
            p: self.p.clone(),
            o: self.o.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quad {
    pub graph: GraphId,
    pub s: Iri,
    pub p: Iri,
    pub o: Iri,
}

impl Quad {
    pub fn new(graph: GraphId, s: Iri, p: Iri, o: Iri) -> Self {
        Quad { graph, s, p, o }
    }

    pub fn triple(&self) -> Triple {
        Triple::new(self.s.clone(), self.p.clone(), self.o.clone())
    }

    fn at(&self, pos: usize) -> &Iri {
        match pos {
            0 => &self.graph,
            1 => &self.s,
            2 => &self.p,
            _ => &self.o,
        }
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}> <{}> <{}> <{}>", self.graph, self.s, self.p, self.o)
    }
}

/// Wildcard pattern; `None` matches anything. A `None` graph spans all
/// named graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuadPattern {
    pub graph: Option<GraphId>,
    pub s: Option<Iri>,
    pub p: Option<Iri>,
    pub o: Option<Iri>,
}

impl QuadPattern {
    pub fn new(graph: Option<&Iri>, s: Option<&Iri>, p: Option<&Iri>, o: Option<&Iri>) -> Self {
        QuadPattern {
            graph: graph.cloned(),
            s: s.cloned(),
            p: p.cloned(),
            o: o.cloned(),
        }
    }

    fn bound(&self) -> [Option<&Iri>; 4] {
        [self.graph.as_ref(), self.s.as_ref(), self.p.as_ref(), self.o.as_ref()]
    }

    pub fn matches(&self, q: &Quad) -> bool {
        self.bound()
            .iter()
            .enumerate()
            .all(|(i, b)| b.is_none_or(|v| v == q.at(i)))
    }
}

type Leaf = BTreeSet<Iri>;
type Level3 = BTreeMap<Iri, Leaf>;
type Level2 = BTreeMap<Iri, Level3>;
type Level1 = BTreeMap<Iri, Level2>;

/// One permutation of the quad positions (0=g, 1=s, 2=p, 3=o) stored as a
/// four-level nested map.
#[derive(Debug, Clone)]
struct Index {
    perm: [usize; 4],
    root: Level1,
}

impl Index {
    fn new(perm: [usize; 4]) -> Self {
        Index { perm, root: BTreeMap::new() }
    }

    fn key<'a>(&self, q: &'a Quad) -> [&'a Iri; 4] {
        [q.at(self.perm[0]), q.at(self.perm[1]), q.at(self.perm[2]), q.at(self.perm[3])]
    }

    fn insert(&mut self, q: &Quad) -> bool {
        let [a, b, c, d] = self.key(q);
        self.root
            .entry(a.clone())
            .or_default()
            .entry(b.clone())
            .or_default()
            .entry(c.clone())
            .or_default()
            .insert(d.clone())
    }

    fn remove(&mut self, q: &Quad) -> bool {
        let [a, b, c, d] = self.key(q);
        let Some(l2) = self.root.get_mut(a) else { return false };
        let Some(l3) = l2.get_mut(b) else { return false };
        let Some(leaf) = l3.get_mut(c) else { return false };
        let removed = leaf.remove(d);
        if leaf.is_empty() {
            l3.remove(c);
            if l3.is_empty() {
                l2.remove(b);
                if l2.is_empty() {
                    self.root.remove(a);
                }
            }
        }
        removed
    }

    /// Number of leading index positions that are bound.
    fn prefix_score(&self, bound: &[Option<&Iri>; 4]) -> usize {
        self.perm.iter().take_while(|&&p| bound[p].is_some()).count()
    }

    fn scan(&self, bound: &[Option<&Iri>; 4], out: &mut Vec<Quad>) {
        let [p0, p1, p2, p3] = self.perm;
        let emit = |out: &mut Vec<Quad>, k: [&Iri; 4]| {
            let mut slots: [Option<&Iri>; 4] = [None; 4];
            for (level, pos) in self.perm.iter().enumerate() {
                slots[*pos] = Some(k[level]);
            }
            out.push(Quad::new(
                slots[0].unwrap().clone(),
                slots[1].unwrap().clone(),
                slots[2].unwrap().clone(),
                slots[3].unwrap().clone(),
            ));
        };
        for (a, l2) in select(&self.root, bound[p0]) {
            for (b, l3) in select(l2, bound[p1]) {
                for (c, leaf) in select(l3, bound[p2]) {
                    match bound[p3] {
                        Some(d) => {
                            if leaf.contains(d) {
                                emit(out, [a, b, c, d]);
                            }
                        }
                        None => {
                            for d in leaf {
                                emit(out, [a, b, c, d]);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn select<'a, V>(
    map: &'a BTreeMap<Iri, V>,
    key: Option<&Iri>,
) -> Box<dyn Iterator<Item = (&'a Iri, &'a V)> + 'a> {
    match key {
        Some(k) => Box::new(map.get_key_value(k).into_iter()),
        None => Box::new(map.iter()),
    }
}

const PERMUTATIONS: [[usize; 4]; 5] = [
    [0, 1, 2, 3], // g s p o
    [0, 2, 3, 1], // g p o s
    [1, 2, 3, 0], // s p o g
    [2, 3, 1, 0], // p o s g
    [3, 1, 2, 0], // o s p g
];

/// A set of quads partitioned into named graphs, plus its prefix table.
#[derive(Debug, Clone)]
pub struct Dataset {
    prefixes: PrefixTable,
    indexes: Vec<Index>,
    len: usize,
    /// Memoized ancestors under `rdfs:subClassOf` in the Global graph.
    ancestors: OnceLock<HashMap<Iri, HashSet<Iri>>>,
}

impl Default for Dataset {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.iter().eq(other.iter())
    }
}

impl Dataset {
    pub fn new() -> Self {
        Self::with_prefixes(PrefixTable::default())
    }

    pub fn with_prefixes(prefixes: PrefixTable) -> Self {
        Dataset {
            prefixes,
            indexes: PERMUTATIONS.iter().map(|p| Index::new(*p)).collect(),
            len: 0,
            ancestors: OnceLock::new(),
        }
    }

    pub fn prefixes(&self) -> &PrefixTable {
        &self.prefixes
    }

    pub fn add_prefix(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.prefixes.insert(prefix, namespace);
    }

    /// Resolves a prefixed or bracketed term against the prefix table.
    pub fn iri(&self, term: &str) -> Result<Iri, IriError> {
        self.prefixes.expand(term)
    }

    pub fn compact(&self, iri: &Iri) -> String {
        self.prefixes.compact(iri)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts a quad; returns whether it was new.
    pub fn insert(&mut self, q: Quad) -> bool {
        if !self.indexes[0].insert(&q) {
            return false;
        }
        for idx in &mut self.indexes[1..] {
            idx.insert(&q);
        }
        self.len += 1;
        if q.p == vocab().sub_class_of {
            self.ancestors.take();
        }
        true
    }

    /// Inserts a quad written with prefixed or bracketed terms.
    pub fn insert_terms(&mut self, g: &str, s: &str, p: &str, o: &str) -> Result<bool, IriError> {
        let q = Quad::new(self.iri(g)?, self.iri(s)?, self.iri(p)?, self.iri(o)?);
        Ok(self.insert(q))
    }

    pub fn remove(&mut self, q: &Quad) -> bool {
        if !self.indexes[0].remove(q) {
            return false;
        }
        for idx in &mut self.indexes[1..] {
            idx.remove(q);
        }
        self.len -= 1;
        if q.p == vocab().sub_class_of {
            self.ancestors.take();
        }
        true
    }

    pub fn contains(&self, q: &Quad) -> bool {
        let idx = &self.indexes[0];
        idx.root
            .get(&q.graph)
            .and_then(|l| l.get(&q.s))
            .and_then(|l| l.get(&q.p))
            .is_some_and(|leaf| leaf.contains(&q.o))
    }

    /// Exactly the quads matching every bound position.
    pub fn match_pattern(&self, pattern: &QuadPattern) -> Vec<Quad> {
        let bound = pattern.bound();
        let idx = self
            .indexes
            .iter()
            .max_by_key(|i| (i.prefix_score(&bound), std::cmp::Reverse(i.perm)))
            .expect("indexes");
        let mut out = Vec::new();
        idx.scan(&bound, &mut out);
        out
    }

    pub fn find(&self, g: Option<&Iri>, s: Option<&Iri>, p: Option<&Iri>, o: Option<&Iri>) -> Vec<Quad> {
        self.match_pattern(&QuadPattern::new(g, s, p, o))
    }

    pub fn has(&self, g: &Iri, s: &Iri, p: &Iri, o: &Iri) -> bool {
        self.contains(&Quad::new(g.clone(), s.clone(), p.clone(), o.clone()))
    }

    /// Objects of `⟨s, p, ?⟩` in `g`.
    pub fn objects(&self, g: &Iri, s: &Iri, p: &Iri) -> Vec<Iri> {
        self.find(Some(g), Some(s), Some(p), None).into_iter().map(|q| q.o).collect()
    }

    /// Subjects of `⟨?, p, o⟩` in `g`.
    pub fn subjects(&self, g: &Iri, p: &Iri, o: &Iri) -> Vec<Iri> {
        self.find(Some(g), None, Some(p), Some(o)).into_iter().map(|q| q.s).collect()
    }

    /// Graphs containing the triple (`GRAPH ?g { s p o }`).
    pub fn graphs_containing(&self, t: &Triple) -> Vec<GraphId> {
        self.find(None, Some(&t.s), Some(&t.p), Some(&t.o))
            .into_iter()
            .map(|q| q.graph)
            .collect()
    }

    pub fn has_type(&self, g: &Iri, x: &Iri, ty: &Iri) -> bool {
        self.has(g, x, &vocab().rdf_type, ty)
    }

    /// Triples of one graph.
    pub fn triples(&self, g: &GraphId) -> BTreeSet<Triple> {
        self.find(Some(g), None, None, None).iter().map(Quad::triple).collect()
    }

    pub fn graph_len(&self, g: &GraphId) -> usize {
        self.indexes[0]
            .root
            .get(g)
            .map(|l2| l2.values().flat_map(|l3| l3.values()).map(BTreeSet::len).sum())
            .unwrap_or(0)
    }

    pub fn graph_ids(&self) -> Vec<GraphId> {
        self.indexes[0].root.keys().cloned().collect()
    }

    /// All quads in (g, s, p, o) order.
    pub fn iter(&self) -> impl Iterator<Item = Quad> + '_ {
        self.indexes[0].root.iter().flat_map(|(g, l2)| {
            l2.iter().flat_map(move |(s, l3)| {
                l3.iter().flat_map(move |(p, leaf)| {
                    leaf.iter().map(move |o| Quad::new(g.clone(), s.clone(), p.clone(), o.clone()))
                })
            })
        })
    }

    /// Reflexive-transitive `rdfs:subClassOf` over the Global graph.
    pub fn is_subclass_of(&self, sub: &Iri, sup: &Iri) -> bool {
        if sub == sup {
            return true;
        }
        self.ancestors
            .get_or_init(|| self.compute_ancestors())
            .get(sub)
            .is_some_and(|a| a.contains(sup))
    }

    fn compute_ancestors(&self) -> HashMap<Iri, HashSet<Iri>> {
        let v = vocab();
        let mut parents: HashMap<Iri, Vec<Iri>> = HashMap::new();
        for q in self.find(Some(&v.global_graph), None, Some(&v.sub_class_of), None) {
            parents.entry(q.s).or_default().push(q.o);
        }
        let mut out = HashMap::new();
        for start in parents.keys() {
            let mut seen: HashSet<Iri> = HashSet::new();
            let mut stack: Vec<&Iri> = parents[start].iter().collect();
            while let Some(n) = stack.pop() {
                if seen.insert(n.clone()) {
                    if let Some(ps) = parents.get(n) {
                        stack.extend(ps.iter());
                    }
                }
            }
            out.insert(start.clone(), seen);
        }
        out
    }

    // --- persistence -------------------------------------------------------

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (p, n) in self.prefixes.iter() {
            writeln!(w, "@prefix {p}: <{n}>")?;
        }
        for q in self.iter() {
            writeln!(w, "{q}")?;
        }
        w.flush()
    }

    pub fn to_quad_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("IRIs are UTF-8")
    }

    /// Reads a quad file. The prefix header replaces nothing; it extends the
    /// default prefix table.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, QuadstoreError> {
        let mut ds = Dataset::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let perr = |message: String| QuadstoreError::Parse { line: lineno, message };
            if let Some(rest) = t.strip_prefix("@prefix") {
                let rest = rest.trim().trim_end_matches('.').trim();
                let (p, n) = rest
                    .split_once(':')
                    .ok_or_else(|| perr("expected `@prefix p: <ns>`".into()))?;
                let n = n.trim();
                let n = n
                    .strip_prefix('<')
                    .and_then(|n| n.strip_suffix('>'))
                    .ok_or_else(|| perr(format!("namespace must be bracketed: {n}")))?;
                ds.add_prefix(p.trim(), n);
                continue;
            }
            let terms = split_record(t).map_err(perr)?;
            let Some(terms) = terms else { continue };
            let [g, s, p, o] = terms;
            let q = Quad::new(
                Iri::new(g).map_err(|e| perr(e.to_string()))?,
                Iri::new(s).map_err(|e| perr(e.to_string()))?,
                Iri::new(p).map_err(|e| perr(e.to_string()))?,
                Iri::new(o).map_err(|e| perr(e.to_string()))?,
            );
            ds.insert(q);
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QuadstoreError> {
        let f = std::fs::File::create(path)?;
        self.write_to(io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QuadstoreError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(io::BufReader::new(f))
    }
}

/// Splits `<g> <s> <p> <o>` into its four IRIs. Returns `None` for records
/// whose object is a literal.
fn split_record(line: &str) -> Result<Option<[&str; 4]>, String> {
    let mut out: Vec<&str> = Vec::with_capacity(4);
    let mut rest = line.trim();
    while !rest.is_empty() && out.len() < 4 {
        if rest.starts_with('"') {
            if out.len() == 3 {
                return Ok(None);
            }
            return Err("literal outside object position".into());
        }
        let inner = rest
            .strip_prefix('<')
            .ok_or_else(|| format!("expected `<` at `{rest}`"))?;
        let end = inner.find('>').ok_or("unterminated IRI")?;
        out.push(&inner[..end]);
        rest = inner[end + 1..].trim_start();
    }
    let rest = rest.trim_start_matches('.').trim();
    if out.len() != 4 || !rest.is_empty() {
        return Err(format!("expected four bracketed IRIs, got `{line}`"));
    }
    Ok(Some([out[0], out[1], out[2], out[3]]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_with_sup() -> Dataset {
        let mut ds = Dataset::new();
        ds.add_prefix("sup", "http://www.supersede.eu/ontology/");
        ds
    }

    #[test]
    fn insert_is_idempotent() {
        let mut ds = Dataset::new();
        assert!(ds.insert_terms("S:", "S:Wrapper/W4", "rdf:type", "S:Wrapper").unwrap());
        assert_eq!(ds.len(), 1);
        assert!(!ds.insert_terms("S:", "S:Wrapper/W4", "rdf:type", "S:Wrapper").unwrap());
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn unregistered_prefix_fails() {
        let mut ds = Dataset::new();
        let err = ds.insert_terms("S:", "xx:a", "rdf:type", "S:Wrapper").unwrap_err();
        assert_eq!(err, IriError::UnknownPrefix("xx".into()));
        assert!(ds.is_empty());
    }

    #[test]
    fn empty_dataset_matches_nothing() {
        let ds = Dataset::new();
        assert!(ds.match_pattern(&QuadPattern::default()).is_empty());
    }

    #[test]
    fn remove_prunes_all_indexes() {
        let mut ds = ds_with_sup();
        ds.insert_terms("G:", "sup:a", "rdfs:subClassOf", "sup:b").unwrap();
        ds.insert_terms("G:", "sup:b", "rdfs:subClassOf", "sup:c").unwrap();
        let a = ds.iri("sup:a").unwrap();
        let c = ds.iri("sup:c").unwrap();
        assert!(ds.is_subclass_of(&a, &c));
        let q = Quad::new(ds.iri("G:").unwrap(), ds.iri("sup:b").unwrap(), vocab().sub_class_of.clone(), c.clone());
        assert!(ds.remove(&q));
        assert!(!ds.remove(&q));
        assert_eq!(ds.len(), 1);
        assert!(!ds.is_subclass_of(&a, &c));
        assert!(ds.find(None, None, None, Some(&c)).is_empty());
    }

    #[test]
    fn subclass_is_reflexive_and_transitive() {
        let mut ds = ds_with_sup();
        ds.insert_terms("G:", "sup:a", "rdfs:subClassOf", "sup:b").unwrap();
        ds.insert_terms("G:", "sup:b", "rdfs:subClassOf", "sup:c").unwrap();
        let [a, b, c] = ["sup:a", "sup:b", "sup:c"].map(|t| ds.iri(t).unwrap());
        assert!(ds.is_subclass_of(&a, &a));
        assert!(ds.is_subclass_of(&a, &c));
        assert!(!ds.is_subclass_of(&c, &a));
        assert!(ds.is_subclass_of(&b, &c));
    }

    #[test]
    fn subclass_edges_outside_global_are_ignored() {
        let mut ds = ds_with_sup();
        ds.insert_terms("S:", "sup:a", "rdfs:subClassOf", "sup:b").unwrap();
        let [a, b] = ["sup:a", "sup:b"].map(|t| ds.iri(t).unwrap());
        assert!(!ds.is_subclass_of(&a, &b));
    }

    #[test]
    fn literal_objects_are_skipped_on_load() {
        let text = "@prefix ex: <http://example.org/>\n\
                    <http://g> <http://s> <http://p> <http://o>\n\
                    <http://g> <http://s> <http://p> \"3\"^^<http://www.w3.org/2001/XMLSchema#int>\n\
                    # comment\n";
        let ds = Dataset::read_from(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.prefixes().get("ex"), Some("http://example.org/"));
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = "<http://g> <http://s> <http://p>\n";
        match Dataset::read_from(text.as_bytes()) {
            Err(QuadstoreError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
