//! Corpus data model: projects, commits, tree snapshots and blobs.
//!
//! A [`Corpus`] is immutable once built. Use [`CorpusBuilder`] to assemble one
//! from line-delimited records ([`jsonl`]) or Git repositories ([`git`]), and
//! [`Corpus::validate`] to list invariant violations of a corpus assembled by
//! other means.

pub mod git;
pub mod jsonl;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use git::{import_repository, GitError};
pub use jsonl::{ingest_corpus, write_corpus};

/// Content address of one file revision.
///
/// When the corpus carries the bytes, this is the lowercase hex SHA-256 of
/// them. Hand-written corpora may use opaque tokens instead.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlobId(String);

impl BlobId {
    pub fn new(value: impl Into<String>) -> Self {
        BlobId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BlobId {
    fn from(value: &str) -> Self {
        BlobId(value.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitId(String);

impl CommitId {
    pub fn new(value: impl Into<String>) -> Self {
        CommitId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CommitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CommitId {
    fn from(value: &str) -> Self {
        CommitId(value.to_owned())
    }
}

impl From<String> for CommitId {
    fn from(value: String) -> Self {
        CommitId(value)
    }
}

/// Hex-encoded SHA-256 of `content`.
pub fn blob_digest(content: &[u8]) -> BlobId {
    BlobId(hex::encode(Sha256::digest(content)))
}

/// The full file listing of one commit: path → blob.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeSnapshot {
    entries: BTreeMap<String, BlobId>,
}

impl TreeSnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, blob: BlobId) -> Option<BlobId> {
        self.entries.insert(path.into(), blob)
    }

    pub fn remove(&mut self, path: &str) -> Option<BlobId> {
        self.entries.remove(path)
    }

    pub fn get(&self, path: &str) -> Option<&BlobId> {
        self.entries.get(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BlobId)> {
        self.entries.iter().map(|(p, b)| (p.as_str(), b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<P: Into<String>> FromIterator<(P, BlobId)> for TreeSnapshot {
    fn from_iter<I: IntoIterator<Item = (P, BlobId)>>(iter: I) -> Self {
        TreeSnapshot {
            entries: iter.into_iter().map(|(p, b)| (p.into(), b)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commit {
    pub id: CommitId,
    pub parents: Vec<CommitId>,
    pub tree: TreeSnapshot,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub name: String,
    pub head: CommitId,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate commit {0} with differing content")]
    DuplicateCommit(CommitId),
    #[error("duplicate project name {0:?}")]
    DuplicateProject(String),
    #[error("blob {id} does not match the digest of its content ({actual})")]
    DigestMismatch { id: BlobId, actual: BlobId },
    #[error("commit {commit} references missing parent {parent}")]
    DanglingParent { commit: CommitId, parent: CommitId },
    #[error("project {project:?} references missing head {head}")]
    DanglingHead { project: String, head: CommitId },
    #[error("commit {commit} maps {path:?} to blob {blob} which has no blob record")]
    MissingBlob {
        commit: CommitId,
        path: String,
        blob: BlobId,
    },
    #[error("corpus is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Git(#[from] GitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    EmptyId,
    InvalidPath,
    DanglingHead,
    DanglingParent,
    SelfParent,
    DuplicateParent,
    ParentCycle,
    MissingBlob,
    DigestMismatch,
    OrphanCommit,
}

/// One broken corpus invariant. `entities` names the offending ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub severity: Severity,
    pub kind: ViolationKind,
    pub entities: Vec<String>,
    pub message: String,
}

impl Violation {
    fn error(kind: ViolationKind, entities: Vec<String>, message: String) -> Self {
        Violation {
            severity: Severity::Error,
            kind,
            entities,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: {}", self.message)
    }
}

/// Projects, commits and blobs. Commits may be shared between projects.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    projects: BTreeMap<String, Project>,
    commits: BTreeMap<CommitId, Commit>,
    blobs: BTreeMap<BlobId, Option<Vec<u8>>>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assemble a corpus without any checks. Later projects or commits with
    /// the same key replace earlier ones. See [`Corpus::validate`].
    pub fn from_parts(
        projects: impl IntoIterator<Item = Project>,
        commits: impl IntoIterator<Item = Commit>,
        blobs: impl IntoIterator<Item = (BlobId, Option<Vec<u8>>)>,
    ) -> Self {
        Corpus {
            projects: projects.into_iter().map(|p| (p.name.clone(), p)).collect(),
            commits: commits.into_iter().map(|c| (c.id.clone(), c)).collect(),
            blobs: blobs.into_iter().collect(),
        }
    }

    pub fn projects(&self) -> impl Iterator<Item = &Project> {
        self.projects.values()
    }

    pub fn project(&self, name: &str) -> Option<&Project> {
        self.projects.get(name)
    }

    pub fn commits(&self) -> impl Iterator<Item = &Commit> {
        self.commits.values()
    }

    pub fn commit(&self, id: &CommitId) -> Option<&Commit> {
        self.commits.get(id)
    }

    pub fn blobs(&self) -> impl Iterator<Item = (&BlobId, Option<&[u8]>)> {
        self.blobs.iter().map(|(id, c)| (id, c.as_deref()))
    }

    pub fn has_blob(&self, id: &BlobId) -> bool {
        self.blobs.contains_key(id)
    }

    pub fn blob_content(&self, id: &BlobId) -> Option<&[u8]> {
        self.blobs.get(id).and_then(|c| c.as_deref())
    }

    pub fn project_count(&self) -> usize {
        self.projects.len()
    }

    pub fn commit_count(&self) -> usize {
        self.commits.len()
    }

    pub fn blob_count(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty() && self.commits.is_empty() && self.blobs.is_empty()
    }

    /// Commits reachable from `head` through parent links, `head` included.
    /// Missing commits are skipped.
    pub fn reachable_from<'a>(&'a self, head: &CommitId) -> BTreeSet<&'a CommitId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&CommitId> = Vec::new();
        if let Some((id, _)) = self.commits.get_key_value(head) {
            stack.push(id);
        }
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            for parent in &self.commits[id].parents {
                if let Some((pid, _)) = self.commits.get_key_value(parent) {
                    if !seen.contains(pid) {
                        stack.push(pid);
                    }
                }
            }
        }
        seen
    }

    /// Union of [`Corpus::reachable_from`] over every project head.
    pub fn reachable_commits(&self) -> BTreeSet<&CommitId> {
        let mut all = BTreeSet::new();
        for project in self.projects.values() {
            all.extend(self.reachable_from(&project.head));
        }
        all
    }

    /// Check every corpus invariant. The result is empty iff the corpus is
    /// valid; orphan commits are reported at warning level.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        for (name, project) in &self.projects {
            if name.is_empty() {
                out.push(Violation::error(
                    ViolationKind::EmptyId,
                    vec![name.clone()],
                    "project with empty name".into(),
                ));
            }
            if !self.commits.contains_key(&project.head) {
                out.push(Violation::error(
                    ViolationKind::DanglingHead,
                    vec![name.clone(), project.head.to_string()],
                    format!("project {name:?} head {} does not exist", project.head),
                ));
            }
        }

        for (id, content) in &self.blobs {
            if id.as_str().is_empty() {
                out.push(Violation::error(
                    ViolationKind::EmptyId,
                    vec![String::new()],
                    "blob with empty id".into(),
                ));
            }
            if let Some(bytes) = content {
                let actual = blob_digest(bytes);
                if &actual != id {
                    out.push(Violation::error(
                        ViolationKind::DigestMismatch,
                        vec![id.to_string()],
                        format!("blob {id} content digests to {actual}"),
                    ));
                }
            }
        }

        for (id, commit) in &self.commits {
            if id.as_str().is_empty() {
                out.push(Violation::error(
                    ViolationKind::EmptyId,
                    vec![String::new()],
                    "commit with empty id".into(),
                ));
            }
            let mut seen = HashSet::new();
            for parent in &commit.parents {
                if parent == id {
                    out.push(Violation::error(
                        ViolationKind::SelfParent,
                        vec![id.to_string()],
                        format!("commit {id} lists itself as a parent"),
                    ));
                } else if !seen.insert(parent) {
                    out.push(Violation::error(
                        ViolationKind::DuplicateParent,
                        vec![id.to_string(), parent.to_string()],
                        format!("commit {id} lists parent {parent} more than once"),
                    ));
                } else if !self.commits.contains_key(parent) {
                    out.push(Violation::error(
                        ViolationKind::DanglingParent,
                        vec![id.to_string(), parent.to_string()],
                        format!("commit {id} parent {parent} does not exist"),
                    ));
                }
            }
            for (path, blob) in commit.tree.iter() {
                if !is_valid_path(path) {
                    out.push(Violation::error(
                        ViolationKind::InvalidPath,
                        vec![id.to_string(), path.to_owned()],
                        format!("commit {id} has invalid path {path:?}"),
                    ));
                }
                if !self.blobs.contains_key(blob) {
                    out.push(Violation::error(
                        ViolationKind::MissingBlob,
                        vec![id.to_string(), blob.to_string()],
                        format!("commit {id} path {path:?} maps to unknown blob {blob}"),
                    ));
                }
            }
        }

        let reachable = self.reachable_commits();
        out.extend(self.cycle_violations(&reachable));
        for id in self.commits.keys() {
            if !reachable.contains(id) {
                out.push(Violation {
                    severity: Severity::Warning,
                    kind: ViolationKind::OrphanCommit,
                    entities: vec![id.to_string()],
                    message: format!("commit {id} is not reachable from any project head"),
                });
            }
        }
        out
    }

    fn cycle_violations(&self, reachable: &BTreeSet<&CommitId>) -> Vec<Violation> {
        let mut graph: DiGraph<&CommitId, ()> = DiGraph::new();
        let nodes: HashMap<&CommitId, NodeIndex> = reachable
            .iter()
            .map(|&id| (id, graph.add_node(id)))
            .collect();
        for (&id, &node) in &nodes {
            for parent in &self.commits[id].parents {
                if parent != id {
                    if let Some(&p) = nodes.get(parent) {
                        graph.add_edge(node, p, ());
                    }
                }
            }
        }
        let mut out: Vec<Violation> = petgraph::algo::tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1)
            .map(|scc| {
                let mut ids: Vec<String> = scc.iter().map(|&n| graph[n].to_string()).collect();
                ids.sort();
                let message = format!("parent cycle between commits {}", ids.join(", "));
                Violation::error(ViolationKind::ParentCycle, ids, message)
            })
            .collect();
        out.sort();
        out
    }
}

/// Same as [`Corpus::validate`].
pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    corpus.validate()
}

/// Nonempty, `/`-separated, no leading or trailing `/`, no empty segment.
pub fn is_valid_path(path: &str) -> bool {
    !path.is_empty() && path.split('/').all(|seg| !seg.is_empty())
}

/// Accumulates records from any number of sources into one corpus.
///
/// Commits are deduplicated by id and must be identical; project names must
/// be unique. [`CorpusBuilder::finish`] resolves references and validates.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    projects: BTreeMap<String, Project>,
    commits: BTreeMap<CommitId, Commit>,
    blobs: BTreeMap<BlobId, Option<Vec<u8>>>,
    strict: bool,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// In strict mode every blob referenced from a tree needs its own blob
    /// record. Otherwise such blobs are registered without content.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn add_blob(&mut self, id: BlobId, content: Option<Vec<u8>>) -> Result<(), CorpusError> {
        if let Some(bytes) = &content {
            let actual = blob_digest(bytes);
            if actual != id {
                return Err(CorpusError::DigestMismatch { id, actual });
            }
        }
        let slot = self.blobs.entry(id).or_insert(None);
        if slot.is_none() {
            *slot = content;
        }
        Ok(())
    }

    pub fn add_commit(&mut self, commit: Commit) -> Result<(), CorpusError> {
        match self.commits.get(&commit.id) {
            Some(existing) if *existing != commit => Err(CorpusError::DuplicateCommit(commit.id)),
            Some(_) => Ok(()),
            None => {
                self.commits.insert(commit.id.clone(), commit);
                Ok(())
            }
        }
    }

    pub fn add_project(&mut self, project: Project) -> Result<(), CorpusError> {
        if self.projects.contains_key(&project.name) {
            return Err(CorpusError::DuplicateProject(project.name));
        }
        self.projects.insert(project.name.clone(), project);
        Ok(())
    }

    pub fn has_commit(&self, id: &CommitId) -> bool {
        self.commits.contains_key(id)
    }

    /// Fold another builder into this one, failing on conflicting duplicates.
    pub fn merge(&mut self, other: CorpusBuilder) -> Result<(), CorpusError> {
        for (id, content) in other.blobs {
            self.add_blob(id, content)?;
        }
        for (_, commit) in other.commits {
            self.add_commit(commit)?;
        }
        for (_, project) in other.projects {
            self.add_project(project)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<Corpus, CorpusError> {
        for commit in self.commits.values() {
            for (path, blob) in commit.tree.iter() {
                if self.blobs.contains_key(blob) {
                    continue;
                }
                if self.strict {
                    return Err(CorpusError::MissingBlob {
                        commit: commit.id.clone(),
                        path: path.to_owned(),
                        blob: blob.clone(),
                    });
                }
                self.blobs.insert(blob.clone(), None);
            }
        }
        for commit in self.commits.values() {
            if let Some(parent) = commit
                .parents
                .iter()
                .find(|p| *p != &commit.id && !self.commits.contains_key(*p))
            {
                return Err(CorpusError::DanglingParent {
                    commit: commit.id.clone(),
                    parent: parent.clone(),
                });
            }
        }
        for project in self.projects.values() {
            if !self.commits.contains_key(&project.head) {
                return Err(CorpusError::DanglingHead {
                    project: project.name.clone(),
                    head: project.head.clone(),
                });
            }
        }
        let corpus = Corpus {
            projects: self.projects,
            commits: self.commits,
            blobs: self.blobs,
        };
        let errors: Vec<Violation> = corpus
            .validate()
            .into_iter()
            .filter(Violation::is_error)
            .collect();
        if errors.is_empty() {
            Ok(corpus)
        } else {
            Err(CorpusError::Invalid(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commit(id: &str, parents: &[&str], tree: &[(&str, &str)]) -> Commit {
        Commit {
            id: id.into(),
            parents: parents.iter().map(|&p| p.into()).collect(),
            tree: tree.iter().map(|&(p, b)| (p, BlobId::from(b))).collect(),
            timestamp: 0,
            message: String::new(),
        }
    }

    fn blobs(ids: &[&str]) -> Vec<(BlobId, Option<Vec<u8>>)> {
        ids.iter().map(|&b| (BlobId::from(b), None)).collect()
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            blob_digest(b"").as_str(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(blob_digest(b"a"), blob_digest(b"a"));
        // sha256sum <<< printf 'a'
        assert_eq!(
            blob_digest(b"a").as_str(),
            "ca978112ca1bbdcafac231b39a23dc4da786eff8147c4e72b9807785afee48bb"
        );
    }

    #[test]
    fn parent_cycle_is_one_violation_naming_both() {
        let corpus = Corpus::from_parts(
            [Project {
                name: "p".into(),
                head: "x".into(),
            }],
            [commit("x", &["y"], &[]), commit("y", &["x"], &[])],
            [],
        );
        let violations = corpus.validate();
        assert_eq!(violations.len(), 1, "{violations:?}");
        assert_eq!(violations[0].kind, ViolationKind::ParentCycle);
        assert_eq!(violations[0].entities, vec!["x", "y"]);
    }

    #[test]
    fn digest_mismatch_is_reported() {
        let corpus = Corpus::from_parts([], [], [(BlobId::from("abc"), Some(b"hello".to_vec()))]);
        let violations = corpus.validate();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::DigestMismatch);
        assert_eq!(violations[0].entities, vec!["abc"]);
    }

    #[test]
    fn orphans_are_warnings_and_not_reachable() {
        let corpus = Corpus::from_parts(
            [Project {
                name: "p".into(),
                head: "b".into(),
            }],
            [
                commit("a", &[], &[("f", "1")]),
                commit("b", &["a"], &[("f", "2")]),
                commit("z", &["a"], &[("f", "3")]),
            ],
            blobs(&["1", "2", "3"]),
        );
        let violations = corpus.validate();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].severity, Severity::Warning);
        assert_eq!(violations[0].kind, ViolationKind::OrphanCommit);
        let reachable: Vec<_> = corpus.reachable_commits().into_iter().cloned().collect();
        assert_eq!(reachable, vec![CommitId::from("a"), CommitId::from("b")]);
    }

    #[test]
    fn self_parent_and_duplicate_parent() {
        let corpus = Corpus::from_parts(
            [Project {
                name: "p".into(),
                head: "b".into(),
            }],
            [commit("a", &[], &[]), commit("b", &["a", "a", "b"], &[])],
            [],
        );
        let kinds: Vec<_> = corpus.validate().into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::SelfParent));
        assert!(kinds.contains(&ViolationKind::DuplicateParent));
    }

    #[test]
    fn invalid_paths() {
        assert!(is_valid_path("src/f.c"));
        assert!(!is_valid_path(""));
        assert!(!is_valid_path("/src/f.c"));
        assert!(!is_valid_path("src//f.c"));
        assert!(!is_valid_path("src/"));
    }

    #[test]
    fn builder_dedupes_identical_commits_and_rejects_conflicts() {
        let mut b = CorpusBuilder::new();
        b.add_commit(commit("a", &[], &[("f", "1")])).unwrap();
        b.add_commit(commit("a", &[], &[("f", "1")])).unwrap();
        let err = b.add_commit(commit("a", &[], &[("f", "2")])).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateCommit(id) if id.as_str() == "a"));
    }

    #[test]
    fn builder_strict_mode_requires_blob_records() {
        let mut b = CorpusBuilder::new().strict(true);
        b.add_commit(commit("a", &[], &[("f", "1")])).unwrap();
        assert!(matches!(b.finish(), Err(CorpusError::MissingBlob { .. })));

        let mut b = CorpusBuilder::new();
        b.add_commit(commit("a", &[], &[("f", "1")])).unwrap();
        let corpus = b.finish().unwrap();
        assert!(corpus.has_blob(&"1".into()));
        assert_eq!(corpus.blob_content(&"1".into()), None);
    }

    #[test]
    fn builder_rejects_cycles() {
        let mut b = CorpusBuilder::new();
        b.add_commit(commit("x", &["y"], &[])).unwrap();
        b.add_commit(commit("y", &["x"], &[])).unwrap();
        b.add_project(Project {
            name: "p".into(),
            head: "x".into(),
        })
        .unwrap();
        assert!(matches!(b.finish(), Err(CorpusError::Invalid(v)) if v.len() == 1));
    }

    #[test]
    fn merge_fails_on_conflicting_duplicates() {
        let mut a = CorpusBuilder::new();
        a.add_commit(commit("c", &[], &[("f", "1")])).unwrap();
        let mut b = CorpusBuilder::new();
        b.add_commit(commit("c", &[], &[("f", "2")])).unwrap();
        assert!(a.merge(b).is_err());

        let mut a = CorpusBuilder::new();
        a.add_commit(commit("c", &[], &[("f", "1")])).unwrap();
        let mut b = CorpusBuilder::new();
        b.add_commit(commit("c", &[], &[("f", "1")])).unwrap();
        b.add_project(Project {
            name: "p".into(),
            head: "c".into(),
        })
        .unwrap();
        a.merge(b).unwrap();
        assert_eq!(a.finish().unwrap().project_count(), 1);
    }
}
