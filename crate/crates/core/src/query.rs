//! Ontology-mediated queries: the accepted SPARQL subset, its rendering,
//! and the well-formedness repair that swaps projected concepts for their
//! identifier features.
//!
//! Accepted shape (keywords case-insensitive, whitespace-insensitive):
//!
//! ```text
//! [PREFIX p: <ns>]*
//! SELECT ?v1 [,] ... ?vn
//! FROM G:
//! WHERE {
//!   VALUES (?v1 ... ?vn) { (iri1 ... irin) }
//!   s p o .
//!   ...
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::iri::{is_local_char, Iri, IriError, PrefixTable};
use crate::quadstore::{Dataset, Triple};
use crate::vocab::vocab;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("IRI {0} does not occur in the Global graph")]
    UnknownIri(Iri),
    #[error("graph pattern is not connected")]
    DisconnectedPattern,
    #[error("projected element {0} is not a vertex of the graph pattern")]
    ProjectionOutsidePattern(Iri),
    #[error("the graph pattern has at least one cycle")]
    CyclicPattern,
    #[error("concept {0} has no identifier feature that could be projected instead")]
    NoIdentifier(Iri),
}

/// `Q = ⟨π, φ⟩`: projected elements (in SELECT order) and a basic graph
/// pattern over the Global graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmqQuery {
    pub pi: Vec<Iri>,
    pub phi: BTreeSet<Triple>,
}

impl OmqQuery {
    pub fn new(pi: Vec<Iri>, phi: impl IntoIterator<Item = Triple>) -> Self {
        OmqQuery { pi, phi: phi.into_iter().collect() }
    }

    /// Subjects and objects of φ.
    pub fn vertices(&self) -> BTreeSet<&Iri> {
        self.phi.iter().flat_map(|t| [&t.s, &t.o]).collect()
    }

    /// Checks `π ⊆ V(φ)` and that φ is connected.
    pub fn check_shape(&self) -> Result<(), QueryError> {
        let vs = self.vertices();
        if let Some(p) = self.pi.iter().find(|p| !vs.contains(p)) {
            return Err(QueryError::ProjectionOutsidePattern(p.clone()));
        }
        if !is_connected(&self.phi) {
            return Err(QueryError::DisconnectedPattern);
        }
        Ok(())
    }

    /// Renders the query back into the accepted template.
    pub fn render(&self, prefixes: &PrefixTable) -> String {
        let vars: Vec<String> = (1..=self.pi.len()).map(|i| format!("?v{i}")).collect();
        let mut out = String::new();
        let _ = writeln!(out, "SELECT {}", vars.join(" "));
        let _ = writeln!(out, "FROM {}", prefixes.compact(&vocab().global_graph));
        let _ = writeln!(out, "WHERE {{");
        let bound: Vec<String> = self.pi.iter().map(|p| prefixes.compact(p)).collect();
        let _ = writeln!(out, "  VALUES ({}) {{ ({}) }}", vars.join(" "), bound.join(" "));
        for t in &self.phi {
            let _ = writeln!(
                out,
                "  {} {} {} .",
                prefixes.compact(&t.s),
                prefixes.compact(&t.p),
                prefixes.compact(&t.o)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn is_connected(phi: &BTreeSet<Triple>) -> bool {
    let mut adj: HashMap<&Iri, Vec<&Iri>> = HashMap::new();
    for t in phi {
        adj.entry(&t.s).or_default().push(&t.o);
        adj.entry(&t.o).or_default().push(&t.s);
    }
    let Some(start) = adj.keys().next().copied() else { return true };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        for m in &adj[n] {
            if seen.insert(*m) {
                stack.push(m);
            }
        }
    }
    seen.len() == adj.len()
}

// --- lexer --------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    IriRef(String),
    PName(String, String),
    Literal,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Comma,
    Other(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut out = Vec::new();
    let err = |line, column, message: String| QueryError::Syntax { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i);
            }
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '.' => Some(Tok::Dot),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            advance(1, &mut i);
            out.push(Spanned { tok, line: l0, column: c0 });
            continue;
        }
        let tok = if c == '<' {
            let end = chars[i..]
                .iter()
                .position(|&x| x == '>' || x == '\n')
                .filter(|&p| chars[i + p] == '>')
                .ok_or_else(|| err(l0, c0, "unterminated IRI".into()))?;
            let s: String = chars[i + 1..i + end].iter().collect();
            advance(end + 1, &mut i);
            Tok::IriRef(s)
        } else if c == '?' || c == '$' {
            let n = chars[i + 1..].iter().take_while(|x| x.is_alphanumeric() || **x == '_').count();
            if n == 0 {
                return Err(err(l0, c0, "empty variable name".into()));
            }
            let s: String = chars[i + 1..i + 1 + n].iter().collect();
            advance(n + 1, &mut i);
            Tok::Var(s)
        } else if c == '"' || c == '\'' || c.is_ascii_digit() || c == '-' || c == '+' {
            let n = if c == '"' || c == '\'' {
                chars[i + 1..].iter().position(|&x| x == c).map(|p| p + 2).unwrap_or(chars.len() - i)
            } else {
                chars[i..].iter().take_while(|x| !x.is_whitespace() && !"{}()".contains(**x)).count()
            };
            advance(n, &mut i);
            Tok::Literal
        } else if c.is_alphabetic() || c == '_' || c == ':' {
            let n = chars[i..]
                .iter()
                .take_while(|x| x.is_alphanumeric() || matches!(x, '_' | '-' | ':') || is_local_char(**x))
                .count();
            let mut word: String = chars[i..i + n].iter().collect();
            // A trailing dot terminates the triple, not the name.
            while word.ends_with('.') {
                word.pop();
            }
            advance(word.chars().count(), &mut i);
            match word.split_once(':') {
                Some((p, l)) => {
                    if !p.chars().all(|x| x.is_alphanumeric() || x == '_' || x == '-') {
                        return Err(err(l0, c0, format!("bad prefix in `{word}`")));
                    }
                    Tok::PName(p.to_string(), l.to_string())
                }
                None => Tok::Word(word.to_ascii_uppercase()),
            }
        } else {
            advance(1, &mut i);
            Tok::Other(c)
        };
        out.push(Spanned { tok, line: l0, column: c0 });
    }
    Ok(out)
}

// --- parser -------------------------------------------------------------------

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: PrefixTable,
    eof: (usize, usize),
    _text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn at(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.column)).unwrap_or(self.eof)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, QueryError> {
        let (line, column) = self.at();
        Err(QueryError::Syntax { line, column, message: message.into() })
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), QueryError> {
        match self.peek() {
            Some(s) if s.tok == want => {
                self.pos += 1;
                Ok(())
            }
            Some(s) => {
                let found = describe(&s.tok);
                self.fail(format!("expected {what}, found {found}"))
            }
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        match self.peek().map(|s| &s.tok) {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let found = describe(t);
                self.fail(format!("expected {kw}, found {found}"))
            }
            None => self.fail(format!("expected {kw}, found end of input")),
        }
    }

    fn term(&mut self) -> Result<Iri, QueryError> {
        let (line, column) = self.at();
        let resolve = |r: Result<Iri, IriError>| {
            r.map_err(|e| QueryError::Syntax { line, column, message: e.to_string() })
        };
        match self.next().map(|s| s.tok) {
            Some(Tok::IriRef(s)) => resolve(Iri::new(s)),
            Some(Tok::PName(p, l)) => resolve(self.prefixes.expand(&format!("{p}:{l}"))),
            Some(Tok::Var(v)) => Err(QueryError::Syntax {
                line,
                column,
                message: format!("unbound variable ?{v} in triple pattern"),
            }),
            Some(Tok::Literal) => Err(QueryError::Syntax { line, column, message: "literals are not supported".into() }),
            Some(t) => Err(QueryError::Syntax { line, column, message: format!("expected an IRI, found {}", describe(&t)) }),
            None => Err(QueryError::Syntax { line, column, message: "expected an IRI, found end of input".into() }),
        }
    }

    fn var(&mut self) -> Result<String, QueryError> {
        match self.peek().map(|s| &s.tok) {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            Some(t) => {
                let found = describe(t);
                self.fail(format!("expected a variable, found {found}"))
            }
            None => self.fail("expected a variable, found end of input"),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => match w.as_str() {
            "OPTIONAL" | "FILTER" | "UNION" | "MINUS" | "BIND" | "GRAPH" | "SERVICE" | "GROUP" | "ORDER" | "LIMIT"
            | "OFFSET" | "DISTINCT" | "REDUCED" | "HAVING" | "CONSTRUCT" | "ASK" | "DESCRIBE" => {
                format!("unsupported construct {w}")
            }
            _ => format!("`{w}`"),
        },
        Tok::Var(v) => format!("?{v}"),
        Tok::IriRef(s) => format!("<{s}>"),
        Tok::PName(p, l) => format!("{p}:{l}"),
        Tok::Literal => "a literal".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Other(c) => format!("`{c}`"),
    }
}

/// Parses the query template into `⟨π, φ⟩`, resolving IRIs against the
/// dataset's prefix table and checking them against the Global graph.
pub fn parse_omq(text: &str, ds: &Dataset) -> Result<OmqQuery, QueryError> {
    let toks = lex(text)?;
    let eof = {
        let lines: Vec<&str> = text.split('\n').collect();
        (lines.len(), lines.last().map(|l| l.chars().count() + 1).unwrap_or(1))
    };
    let mut p = Parser { toks, pos: 0, prefixes: ds.prefixes().clone(), eof, _text: text };

    while matches!(p.peek().map(|s| &s.tok), Some(Tok::Word(w)) if w == "PREFIX") {
        p.pos += 1;
        let (prefix, local) = match p.next().map(|s| s.tok) {
            Some(Tok::PName(pr, l)) => (pr, l),
            _ => {
                p.pos -= 1;
                return p.fail("expected `prefix:` after PREFIX");
            }
        };
        if !local.is_empty() {
            p.pos -= 1;
            return p.fail("prefix declaration must end with `:`");
        }
        match p.next().map(|s| s.tok) {
            Some(Tok::IriRef(ns)) => p.prefixes.insert(prefix, ns),
            _ => {
                p.pos -= 1;
                return p.fail("expected `<namespace>`");
            }
        }
    }

    p.keyword("SELECT")?;
    let mut select = Vec::new();
    loop {
        match p.peek().map(|s| &s.tok) {
            Some(Tok::Var(_)) => select.push(p.var()?),
            Some(Tok::Comma) if !select.is_empty() => p.pos += 1,
            _ => break,
        }
    }
    if select.is_empty() {
        return p.fail("SELECT needs at least one variable");
    }
    {
        let mut seen = BTreeSet::new();
        if let Some(dup) = select.iter().find(|v| !seen.insert(*v)) {
            return p.fail(format!("variable ?{dup} selected twice"));
        }
    }

    p.keyword("FROM")?;
    let from = p.term()?;
    if from != vocab().global_graph {
        p.pos -= 1;
        return p.fail("FROM must name the Global graph (G:)");
    }
    p.keyword("WHERE")?;
    p.expect(Tok::LBrace, "`{`")?;

    p.keyword("VALUES")?;
    p.expect(Tok::LParen, "`(`")?;
    let mut value_vars = Vec::new();
    while let Some(Tok::Var(_)) = p.peek().map(|s| &s.tok) {
        value_vars.push(p.var()?);
    }
    p.expect(Tok::RParen, "`)`")?;
    p.expect(Tok::LBrace, "`{`")?;
    p.expect(Tok::LParen, "`(`")?;
    let mut row = Vec::new();
    while !matches!(p.peek().map(|s| &s.tok), Some(Tok::RParen) | None) {
        row.push(p.term()?);
    }
    p.expect(Tok::RParen, "`)`")?;
    if matches!(p.peek().map(|s| &s.tok), Some(Tok::LParen)) {
        return p.fail("VALUES accepts a single row");
    }
    p.expect(Tok::RBrace, "`}`")?;
    if row.len() != value_vars.len() {
        return p.fail(format!("VALUES binds {} variables but the row has {} terms", value_vars.len(), row.len()));
    }
    let mut binding: BTreeMap<&str, &Iri> = BTreeMap::new();
    for (v, t) in value_vars.iter().zip(&row) {
        if binding.insert(v, t).is_some() {
            return p.fail(format!("?{v} bound twice in VALUES"));
        }
    }
    let mut pi = Vec::with_capacity(select.len());
    for v in &select {
        match binding.get(v.as_str()) {
            Some(t) => pi.push((*t).clone()),
            None => return p.fail(format!("?{v} is not bound in VALUES")),
        }
    }
    if binding.len() != select.len() {
        return p.fail("VALUES binds a variable that is not selected");
    }

    let mut phi = BTreeSet::new();
    loop {
        match p.peek().map(|s| &s.tok) {
            Some(Tok::RBrace) => {
                p.pos += 1;
                break;
            }
            None => return p.fail("expected `}`"),
            Some(Tok::Word(_)) | Some(Tok::LBrace) => {
                let found = describe(&p.peek().unwrap().tok);
                return p.fail(format!("expected a triple pattern, found {found}"));
            }
            _ => {}
        }
        let s = p.term()?;
        let pr = p.term()?;
        let o = p.term()?;
        phi.insert(Triple::new(s, pr, o));
        match p.peek().map(|s| &s.tok) {
            Some(Tok::Dot) => p.pos += 1,
            Some(Tok::RBrace) => {}
            Some(t) => {
                let found = describe(t);
                return p.fail(format!("expected `.` or `}}`, found {found}"));
            }
            None => return p.fail("expected `}`"),
        }
    }
    if let Some(extra) = p.peek() {
        let found = describe(&extra.tok);
        return p.fail(format!("unexpected {found} after query"));
    }

    let q = OmqQuery { pi, phi };
    let g = &vocab().global_graph;
    let known = |x: &Iri| {
        !ds.find(Some(g), Some(x), None, None).is_empty()
            || !ds.find(Some(g), None, None, Some(x)).is_empty()
            || !ds.find(Some(g), None, Some(x), None).is_empty()
    };
    for x in q.pi.iter().chain(q.phi.iter().flat_map(|t| [&t.s, &t.p, &t.o])) {
        if !known(x) {
            return Err(QueryError::UnknownIri(x.clone()));
        }
    }
    q.check_shape()?;
    Ok(q)
}

/// Kahn's algorithm over the concept-to-concept edges of φ. `None` when
/// those edges contain a cycle.
pub fn concept_topological_order(ds: &Dataset, phi: &BTreeSet<Triple>) -> Option<Vec<Iri>> {
    let v = vocab();
    let is_concept = |x: &Iri| ds.has_type(&v.global_graph, x, &v.concept);
    let mut nodes: BTreeSet<Iri> = BTreeSet::new();
    let mut edges: BTreeSet<(Iri, Iri)> = BTreeSet::new();
    for t in phi {
        for x in [&t.s, &t.o] {
            if is_concept(x) {
                nodes.insert(x.clone());
            }
        }
        if t.p != v.has_feature && is_concept(&t.s) && is_concept(&t.o) {
            edges.insert((t.s.clone(), t.o.clone()));
        }
    }
    let mut indeg: BTreeMap<&Iri, usize> = nodes.iter().map(|n| (n, 0)).collect();
    for (_, o) in &edges {
        *indeg.get_mut(o).unwrap() += 1;
    }
    let mut ready: BTreeSet<&Iri> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut out = Vec::with_capacity(nodes.len());
    while let Some(n) = ready.pop_first() {
        out.push(n.clone());
        for (s, o) in &edges {
            if s == n {
                let d = indeg.get_mut(o).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(o);
                }
            }
        }
    }
    (out.len() == nodes.len()).then_some(out)
}

/// Identifier features of a concept in the Global graph, sorted.
pub fn identifier_features(ds: &Dataset, concept: &Iri) -> Vec<Iri> {
    let v = vocab();
    let mut ids: Vec<Iri> = ds
        .objects(&v.global_graph, concept, &v.has_feature)
        .into_iter()
        .filter(|f| ds.is_subclass_of(f, &v.identifier))
        .collect();
    ids.sort();
    ids
}

/// Makes a query well-formed: rejects cyclic patterns and replaces every
/// projected non-feature by its identifier features, adding the matching
/// `G:hasFeature` triples.
pub fn well_formed_rewrite(ds: &Dataset, q: &OmqQuery) -> Result<OmqQuery, QueryError> {
    let v = vocab();
    if concept_topological_order(ds, &q.phi).is_none() {
        return Err(QueryError::CyclicPattern);
    }
    let mut pi: Vec<Iri> = Vec::with_capacity(q.pi.len());
    let mut phi = q.phi.clone();
    for p in &q.pi {
        if ds.has_type(&v.global_graph, p, &v.feature) {
            if !pi.contains(p) {
                pi.push(p.clone());
            }
            continue;
        }
        let mut ids: Vec<Iri> = ds
            .find(Some(&v.global_graph), Some(p), None, None)
            .into_iter()
            .map(|quad| quad.o)
            .filter(|o| ds.has_type(&v.global_graph, o, &v.feature) && ds.is_subclass_of(o, &v.identifier))
            .collect();
        ids.sort();
        ids.dedup();
        if ids.is_empty() {
            return Err(QueryError::NoIdentifier(p.clone()));
        }
        for id in ids {
            phi.insert(Triple::new(p.clone(), v.has_feature.clone(), id.clone()));
            if !pi.contains(&id) {
                pi.push(id);
            }
        }
    }
    Ok(OmqQuery { pi, phi })
}
