//! Evaluation of walks and UCQs over CSV-backed wrapper relations.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::iri::Iri;
use crate::quadstore::Dataset;
use crate::source_model::{wrapper_catalog, AttrRef, Ucq, Walk, WrapperSchema};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("{path}: column `{column}` missing from header")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    MalformedRow { path: PathBuf, line: u64, expected: usize, found: usize },
    #[error("wrapper {0} has no data binding")]
    UnboundWrapper(Iri),
    #[error("the query has no walks to evaluate")]
    NoWalks,
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Id,
    NonId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column {
    pub name: String,
    pub role: Role,
}

/// A flat relation of string values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relation {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
}

impl Relation {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows sorted, for order-insensitive comparison.
    pub fn sorted_rows(&self) -> Vec<Vec<String>> {
        let mut r = self.rows.clone();
        r.sort();
        r
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ExecError> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| ExecError::Csv { path: PathBuf::from("<output>"), message: e.to_string() };
        out.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(err)?;
        for r in &self.rows {
            out.write_record(r).map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_string())
    }
}

/// A wrapper bound to the file holding its data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapperBinding {
    pub wrapper: Arc<WrapperSchema>,
    pub data_path: PathBuf,
    /// attribute → column; empty means "resolve from the header".
    pub column_map: BTreeMap<String, usize>,
}

impl WrapperBinding {
    pub fn new(wrapper: Arc<WrapperSchema>, data_path: impl Into<PathBuf>) -> Self {
        WrapperBinding { wrapper, data_path: data_path.into(), column_map: BTreeMap::new() }
    }
}

pub type Bindings = BTreeMap<Iri, WrapperBinding>;

/// Builds bindings from wrapper-name → file pairs for wrappers registered in
/// `ds`. Unknown names are ignored.
pub fn bindings_from_files<P: AsRef<Path>>(ds: &Dataset, files: &BTreeMap<String, P>) -> Bindings {
    wrapper_catalog(ds)
        .into_iter()
        .filter_map(|(iri, w)| {
            let path = files.get(&w.name)?;
            Some((iri, WrapperBinding::new(w, path.as_ref())))
        })
        .collect()
}

/// Reads a binding's file. Columns follow the wrapper's attribute order
/// (IDs first); extra file columns are ignored.
pub fn load_relation(binding: &WrapperBinding) -> Result<Relation, ExecError> {
    let file = File::open(&binding.data_path)?;
    read_relation(&binding.wrapper, &binding.column_map, file, &binding.data_path)
}

fn read_relation<R: Read>(
    w: &WrapperSchema,
    column_map: &BTreeMap<String, usize>,
    input: R,
    path: &Path,
) -> Result<Relation, ExecError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let csv_err = |e: csv::Error| ExecError::Csv { path: path.to_path_buf(), message: e.to_string() };
    let header = rdr.headers().map_err(csv_err)?.clone();
    let mut idx = Vec::new();
    let mut columns = Vec::new();
    for a in w.attributes() {
        let i = match column_map.get(a) {
            Some(&i) if i < header.len() => Some(i),
            Some(_) => None,
            None => header.iter().position(|h| h == a),
        };
        let i = i.ok_or_else(|| ExecError::MissingColumn { path: path.to_path_buf(), column: a.to_string() })?;
        idx.push(i);
        columns.push(Column { name: a.to_string(), role: if w.is_id(a) { Role::Id } else { Role::NonId } });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            return Err(ExecError::MalformedRow { path: path.to_path_buf(), line, expected: header.len(), found: rec.len() });
        }
        rows.push(idx.iter().map(|&i| rec[i].to_string()).collect());
    }
    Ok(Relation { columns, rows })
}

/// Loaded wrapper relations, keyed by wrapper IRI.
#[derive(Debug, Default)]
pub struct RelationCache {
    loaded: HashMap<Iri, Relation>,
}

impl RelationCache {
    pub fn new() -> Self {
        RelationCache::default()
    }

    /// Uses an in-memory relation instead of a file.
    pub fn insert(&mut self, wrapper: Iri, r: Relation) {
        self.loaded.insert(wrapper, r);
    }

    fn get(&mut self, wrapper: &Iri, bindings: &Bindings) -> Result<&Relation, ExecError> {
        if !self.loaded.contains_key(wrapper) {
            let b = bindings.get(wrapper).ok_or_else(|| ExecError::UnboundWrapper(wrapper.clone()))?;
            let r = load_relation(b)?;
            self.loaded.insert(wrapper.clone(), r);
        }
        Ok(&self.loaded[wrapper])
    }
}

pub fn eval_walk(w: &Walk, bindings: &Bindings) -> Result<Relation, ExecError> {
    eval_walk_cached(w, bindings, &mut RelationCache::new())
}

/// Equi-joins the walk's wrappers (bag semantics) and keeps the projected and
/// ID attributes. Output columns are `wrapper.attribute` in canonical order.
pub fn eval_walk_cached(w: &Walk, bindings: &Bindings, cache: &mut RelationCache) -> Result<Relation, ExecError> {
    let out_attrs = w.output_attributes();
    let wrappers: Vec<&Iri> = w.wrappers().collect();
    for iri in &wrappers {
        cache.get(iri, bindings)?;
    }

    // BFS over the join graph; disconnected parts fall back to a product.
    let mut order: Vec<&Iri> = Vec::new();
    let mut queue: VecDeque<&Iri> = VecDeque::new();
    for start in &wrappers {
        if order.contains(start) {
            continue;
        }
        queue.push_back(start);
        order.push(start);
        while let Some(n) = queue.pop_front() {
            for j in w.joins() {
                let other = if j.left().wrapper == *n {
                    &j.right().wrapper
                } else if j.right().wrapper == *n {
                    &j.left().wrapper
                } else {
                    continue;
                };
                if !order.contains(&other) {
                    order.push(other);
                    queue.push_back(other);
                }
            }
        }
    }

    let mut cols: Vec<AttrRef> = Vec::new();
    let mut rows: Vec<Vec<String>> = vec![Vec::new()];
    for iri in order {
        let rel = &cache.loaded[iri];
        let step = w.step(iri).expect("wrapper of the walk");
        let keep: Vec<(usize, &Column)> = rel
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Id || step.projected.contains(&c.name))
            .collect();
        // (position in accumulated row, position in rel)
        let mut keys: Vec<(usize, usize)> = Vec::new();
        for j in w.joins() {
            let (mine, theirs) = if j.left().wrapper == *iri {
                (j.left(), j.right())
            } else if j.right().wrapper == *iri {
                (j.right(), j.left())
            } else {
                continue;
            };
            if let (Some(acc), Some(own)) =
                (cols.iter().position(|c| c == theirs), rel.column_index(&mine.attribute))
            {
                keys.push((acc, own));
            }
        }
        let mut index: HashMap<Vec<&str>, Vec<usize>> = HashMap::new();
        for (ri, r) in rel.rows.iter().enumerate() {
            index.entry(keys.iter().map(|&(_, own)| r[own].as_str()).collect()).or_default().push(ri);
        }
        let mut next = Vec::new();
        for acc in &rows {
            let probe: Vec<&str> = keys.iter().map(|&(a, _)| acc[a].as_str()).collect();
            if let Some(matches) = index.get(&probe) {
                for &ri in matches {
                    let mut r = acc.clone();
                    r.extend(keep.iter().map(|(i, _)| rel.rows[ri][*i].clone()));
                    next.push(r);
                }
            }
        }
        rows = next;
        cols.extend(keep.iter().map(|(_, c)| AttrRef::new(iri.clone(), c.name.clone())));
    }

    let perm: Vec<usize> = out_attrs.iter().map(|a| cols.iter().position(|c| c == a).expect("output column")).collect();
    let columns = out_attrs
        .iter()
        .map(|a| {
            let s = &w.step(&a.wrapper).expect("member").wrapper;
            Column {
                name: format!("{}.{}", s.name, a.attribute),
                role: if s.is_id(&a.attribute) { Role::Id } else { Role::NonId },
            }
        })
        .collect();
    let rows = rows.into_iter().map(|r| perm.iter().map(|&i| r[i].clone()).collect()).collect();
    Ok(Relation { columns, rows })
}

/// Evaluates every conjunct, projects it to the output features and unions
/// the results: duplicates within one walk are kept, a row produced by
/// several walks appears as often as the walk producing it most often.
/// Rows are returned sorted.
pub fn eval_ucq(u: &Ucq, bindings: &Bindings) -> Result<Relation, ExecError> {
    eval_ucq_cached(u, bindings, &mut RelationCache::new())
}

pub fn eval_ucq_cached(u: &Ucq, bindings: &Bindings, cache: &mut RelationCache) -> Result<Relation, ExecError> {
    if u.is_empty() {
        return Err(ExecError::NoWalks);
    }
    let mut best: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for c in &u.conjuncts {
        let rel = eval_walk_cached(&c.walk, bindings, cache)?;
        let out = c.walk.output_attributes();
        let idx: Vec<usize> = c
            .columns
            .iter()
            .map(|a| out.iter().position(|o| o == a).expect("bound column is an output attribute"))
            .collect();
        let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for r in rel.rows {
            *counts.entry(idx.iter().map(|&i| r[i].clone()).collect()).or_default() += 1;
        }
        for (r, n) in counts {
            let e = best.entry(r).or_default();
            *e = (*e).max(n);
        }
    }
    let columns = u
        .output_features
        .iter()
        .map(|f| Column { name: f.local_name().to_string(), role: Role::NonId })
        .collect();
    let rows = best.into_iter().flat_map(|(r, n)| std::iter::repeat_n(r, n)).collect();
    Ok(Relation { columns, rows })
}
