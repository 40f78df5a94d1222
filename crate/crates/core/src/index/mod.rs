//! Cross-project lookup maps derived from a [`Corpus`].
//!
//! | map    | key          | value                                          |
//! |--------|--------------|------------------------------------------------|
//! | `b2ob` | blob         | blobs it replaced at the same path             |
//! | `ob2b` | old blob     | blobs that replaced it (inverse of `b2ob`)     |
//! | `b2c`  | blob         | reachable commits whose tree contains it       |
//! | `c2p`  | commit       | projects whose head reaches it                 |
//! | `p2h`  | project      | head commit                                    |
//!
//! Lineage edges come from diffing each commit against every parent, path by
//! path. Added, deleted and renamed files produce no edge.

mod persist;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BlobId, Commit, CommitId, Corpus, Violation};

pub use persist::{load_index, read_index, save_index, write_index, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("commit {commit} references missing parent {parent}")]
    MissingParent { commit: CommitId, parent: CommitId },
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("corpus is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCorpus(Vec<Violation>),
    #[error("not an index file (bad magic)")]
    WrongMagic,
    #[error("index format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One in-place change of a file between a commit and one of its parents.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineageEdge {
    pub path: String,
    pub old_blob: BlobId,
    pub new_blob: BlobId,
    pub commit: CommitId,
}

pub type BlobMap = BTreeMap<BlobId, BTreeSet<BlobId>>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexBundle {
    b2ob: BlobMap,
    ob2b: BlobMap,
    b2c: BTreeMap<BlobId, BTreeSet<CommitId>>,
    c2p: BTreeMap<CommitId, BTreeSet<String>>,
    p2h: BTreeMap<String, CommitId>,
    edge_log: BTreeSet<LineageEdge>,
}

static NO_BLOBS: BTreeSet<BlobId> = BTreeSet::new();
static NO_COMMITS: BTreeSet<CommitId> = BTreeSet::new();
static NO_PROJECTS: BTreeSet<String> = BTreeSet::new();

impl IndexBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a lineage edge to `b2ob`, `ob2b` and the edge log.
    pub fn record_edge(&mut self, edge: LineageEdge) {
        self.b2ob
            .entry(edge.new_blob.clone())
            .or_default()
            .insert(edge.old_blob.clone());
        self.ob2b
            .entry(edge.old_blob.clone())
            .or_default()
            .insert(edge.new_blob.clone());
        self.edge_log.insert(edge);
    }

    pub fn record_containment(&mut self, blob: BlobId, commit: CommitId) {
        self.b2c.entry(blob).or_default().insert(commit);
    }

    pub fn record_membership(&mut self, commit: CommitId, project: String) {
        self.c2p.entry(commit).or_default().insert(project);
    }

    pub fn set_head(&mut self, project: String, head: CommitId) {
        self.p2h.insert(project, head);
    }

    /// Union of two bundles. Associative and commutative for bundles built
    /// from the same corpus.
    pub fn merge(&mut self, other: IndexBundle) {
        fn union<K: Ord, V: Ord>(
            into: &mut BTreeMap<K, BTreeSet<V>>,
            from: BTreeMap<K, BTreeSet<V>>,
        ) {
            for (k, vs) in from {
                into.entry(k).or_default().extend(vs);
            }
        }
        union(&mut self.b2ob, other.b2ob);
        union(&mut self.ob2b, other.ob2b);
        union(&mut self.b2c, other.b2c);
        union(&mut self.c2p, other.c2p);
        self.p2h.extend(other.p2h);
        self.edge_log.extend(other.edge_log);
    }

    /// Blobs that `blob` replaced (`b2ob`).
    pub fn old_blobs(&self, blob: &BlobId) -> &BTreeSet<BlobId> {
        self.b2ob.get(blob).unwrap_or(&NO_BLOBS)
    }

    /// Blobs that replaced `blob` (`ob2b`).
    pub fn new_blobs(&self, blob: &BlobId) -> &BTreeSet<BlobId> {
        self.ob2b.get(blob).unwrap_or(&NO_BLOBS)
    }

    /// Reachable commits whose tree contains `blob`. Empty for unknown blobs.
    pub fn commits_of_blob(&self, blob: &BlobId) -> &BTreeSet<CommitId> {
        self.b2c.get(blob).unwrap_or(&NO_COMMITS)
    }

    /// Projects whose head reaches `commit`. Empty for orphan or unknown ids.
    pub fn projects_of_commit(&self, commit: &CommitId) -> &BTreeSet<String> {
        self.c2p.get(commit).unwrap_or(&NO_PROJECTS)
    }

    pub fn head_of_project(&self, project: &str) -> Result<&CommitId, IndexError> {
        self.p2h
            .get(project)
            .ok_or_else(|| IndexError::UnknownProject(project.to_owned()))
    }

    pub fn b2ob(&self) -> &BlobMap {
        &self.b2ob
    }

    pub fn ob2b(&self) -> &BlobMap {
        &self.ob2b
    }

    pub fn b2c(&self) -> &BTreeMap<BlobId, BTreeSet<CommitId>> {
        &self.b2c
    }

    pub fn c2p(&self) -> &BTreeMap<CommitId, BTreeSet<String>> {
        &self.c2p
    }

    pub fn p2h(&self) -> &BTreeMap<String, CommitId> {
        &self.p2h
    }

    pub fn edge_log(&self) -> &BTreeSet<LineageEdge> {
        &self.edge_log
    }

    pub fn is_empty(&self) -> bool {
        self.b2ob.is_empty()
            && self.ob2b.is_empty()
            && self.b2c.is_empty()
            && self.c2p.is_empty()
            && self.p2h.is_empty()
            && self.edge_log.is_empty()
    }
}

/// Edges for every path present in both `commit` and a parent with a
/// different blob. Parents are compared in order; root commits yield none.
pub fn diff_against_parents(
    commit: &Commit,
    corpus: &Corpus,
) -> Result<Vec<LineageEdge>, IndexError> {
    let mut edges = Vec::new();
    for parent_id in &commit.parents {
        let parent = corpus
            .commit(parent_id)
            .ok_or_else(|| IndexError::MissingParent {
                commit: commit.id.clone(),
                parent: parent_id.clone(),
            })?;
        for (path, new_blob) in commit.tree.iter() {
            if let Some(old_blob) = parent.tree.get(path) {
                if old_blob != new_blob {
                    edges.push(LineageEdge {
                        path: path.to_owned(),
                        old_blob: old_blob.clone(),
                        new_blob: new_blob.clone(),
                        commit: commit.id.clone(),
                    });
                }
            }
        }
    }
    Ok(edges)
}

fn index_commits<'a>(
    corpus: &Corpus,
    commits: impl Iterator<Item = &'a CommitId>,
) -> Result<IndexBundle, IndexError> {
    let mut bundle = IndexBundle::new();
    for id in commits {
        let commit = corpus.commit(id).expect("reachable commit exists");
        for edge in diff_against_parents(commit, corpus)? {
            bundle.record_edge(edge);
        }
        for (_, blob) in commit.tree.iter() {
            bundle.record_containment(blob.clone(), id.clone());
        }
    }
    Ok(bundle)
}

fn check_valid(corpus: &Corpus) -> Result<(), IndexError> {
    let errors: Vec<Violation> = corpus
        .validate()
        .into_iter()
        .filter(Violation::is_error)
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(IndexError::InvalidCorpus(errors))
    }
}

/// Index the history reachable from one project's head.
///
/// Merging the partial bundles of every project gives the same result as
/// [`build_indexes`].
pub fn build_partial(corpus: &Corpus, project: &str) -> Result<IndexBundle, IndexError> {
    let head = &corpus
        .project(project)
        .ok_or_else(|| IndexError::UnknownProject(project.to_owned()))?
        .head;
    let reachable = corpus.reachable_from(head);
    let mut bundle = index_commits(corpus, reachable.iter().copied())?;
    for id in reachable {
        bundle.record_membership(id.clone(), project.to_owned());
    }
    bundle.set_head(project.to_owned(), head.clone());
    Ok(bundle)
}

const CHUNK: usize = 256;

/// Build every map for `corpus`. Runs on the current rayon pool.
pub fn build_indexes(corpus: &Corpus) -> Result<IndexBundle, IndexError> {
    check_valid(corpus)?;

    let projects: Vec<_> = corpus.projects().collect();
    let memberships: Vec<IndexBundle> = projects
        .par_iter()
        .map(|project| {
            let mut bundle = IndexBundle::new();
            for id in corpus.reachable_from(&project.head) {
                bundle.record_membership(id.clone(), project.name.clone());
            }
            bundle.set_head(project.name.clone(), project.head.clone());
            bundle
        })
        .collect();

    let reachable: Vec<&CommitId> = corpus.reachable_commits().into_iter().collect();
    let contents: Vec<IndexBundle> = reachable
        .par_chunks(CHUNK)
        .map(|chunk| index_commits(corpus, chunk.iter().copied()))
        .collect::<Result<_, _>>()?;

    let mut bundle = IndexBundle::new();
    for part in memberships.into_iter().chain(contents) {
        bundle.merge(part);
    }
    log::debug!(
        "indexed {} commits: {} blobs, {} lineage edges",
        reachable.len(),
        bundle.b2c.len(),
        bundle.edge_log.len()
    );
    Ok(bundle)
}
