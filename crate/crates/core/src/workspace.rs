//! An on-disk workspace: `ontology.quads` plus `bindings.json`, which maps
//! wrapper names to data files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::executor::{bindings_from_files, Bindings};
use crate::quadstore::{Dataset, QuadstoreError};
use crate::release::{apply_release, GrowthStats, ReleaseDescriptor, ReleaseError};
use crate::validate::validate_ontology;
use crate::vocab::vocab;

pub const ONTOLOGY_FILE: &str = "ontology.quads";
pub const BINDINGS_FILE: &str = "bindings.json";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Store { path: PathBuf, source: QuadstoreError },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{0} is not a workspace (missing {ONTOLOGY_FILE})")]
    NotAWorkspace(PathBuf),
    #[error("{path}: the ontology already has quads outside the Global graph")]
    NotGlobal { path: PathBuf },
    #[error(transparent)]
    Release(#[from] ReleaseError),
    #[error("release would break the ontology:\n{0}")]
    Invalid(String),
}

impl WorkspaceError {
    pub fn is_io(&self) -> bool {
        matches!(self, WorkspaceError::Io { .. } | WorkspaceError::NotAWorkspace(_))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub dataset: Dataset,
    /// wrapper name → data file, relative paths resolved against `root`.
    pub files: BTreeMap<String, PathBuf>,
}

impl Workspace {
    /// Creates `dir` with the Global graph read from `global`, or an empty
    /// ontology.
    pub fn init(dir: &Path, global: Option<&Path>) -> Result<Workspace, WorkspaceError> {
        let dataset = match global {
            Some(p) => {
                let ds = Dataset::load(p).map_err(|source| WorkspaceError::Store { path: p.to_path_buf(), source })?;
                let g = &vocab().global_graph;
                if ds.graph_ids().iter().any(|id| id != g) {
                    return Err(WorkspaceError::NotGlobal { path: p.to_path_buf() });
                }
                ds
            }
            None => Dataset::new(),
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let ws = Workspace { root: dir.to_path_buf(), dataset, files: BTreeMap::new() };
        ws.save()?;
        Ok(ws)
    }

    pub fn open(dir: &Path) -> Result<Workspace, WorkspaceError> {
        let onto = dir.join(ONTOLOGY_FILE);
        if !onto.is_file() {
            return Err(WorkspaceError::NotAWorkspace(dir.to_path_buf()));
        }
        let dataset = Dataset::load(&onto).map_err(|source| WorkspaceError::Store { path: onto.clone(), source })?;
        let manifest = dir.join(BINDINGS_FILE);
        let files = if manifest.is_file() {
            let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
            serde_json::from_str(&text)
                .map_err(|e| WorkspaceError::Manifest { path: manifest.clone(), message: e.to_string() })?
        } else {
            BTreeMap::new()
        };
        Ok(Workspace { root: dir.to_path_buf(), dataset, files })
    }

    pub fn save(&self) -> Result<(), WorkspaceError> {
        let onto = self.root.join(ONTOLOGY_FILE);
        self.dataset.save(&onto).map_err(|source| WorkspaceError::Store { path: onto, source })?;
        let manifest = self.root.join(BINDINGS_FILE);
        let text = serde_json::to_string_pretty(&self.files).expect("manifest serializes") + "\n";
        fs::write(&manifest, text).map_err(io_err(&manifest))
    }

    /// Applies a release and records its data file, resolved against
    /// `base` (the descriptor's directory). Nothing changes if the release
    /// is rejected or would leave the ontology invalid.
    pub fn release(&mut self, d: &ReleaseDescriptor, base: &Path) -> Result<GrowthStats, WorkspaceError> {
        let mut next = self.dataset.clone();
        let r = d.resolve(&mut next)?;
        let stats = apply_release(&mut next, &r)?;
        let report = validate_ontology(&next);
        if !report.is_ok() {
            return Err(WorkspaceError::Invalid(report.render(next.prefixes())));
        }
        self.dataset = next;
        if let Some(f) = &d.wrapper.data_file {
            let p = base.join(f);
            let p = fs::canonicalize(&p).unwrap_or(p);
            self.files.insert(d.wrapper.name.clone(), p);
        }
        Ok(stats)
    }

    pub fn bindings(&self) -> Bindings {
        let files: BTreeMap<String, PathBuf> =
            self.files.iter().map(|(w, p)| (w.clone(), self.root.join(p))).collect();
        bindings_from_files(&self.dataset, &files)
    }

    /// Quad counts per named graph, compacted.
    pub fn graph_counts(&self) -> Vec<(String, usize)> {
        self.dataset
            .graph_ids()
            .into_iter()
            .map(|g| (self.dataset.compact(&g), self.dataset.graph_len(&g)))
            .collect()
    }
}
