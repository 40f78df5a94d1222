//! Head-state classification of every project that ever carried a
//! vulnerable blob.
//!
//! The head tree is checked in a fixed order: any vulnerable blob makes the
//! project [`Status::Vulnerable`]; otherwise any fixed blob makes it
//! [`Status::Safe`]; otherwise it is [`Status::Unknown`]. A head that deleted
//! the file is therefore Unknown.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BlobId, CommitId, Corpus};
use crate::index::{IndexBundle, IndexError};
use crate::lineage::{compute_lineage, FixSpec, LineageError, LineageSets};
use crate::report::{summarize, SummaryRow};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Lineage(#[from] LineageError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("head {head} of project {project:?} is missing from the corpus")]
    MissingHead { project: String, head: CommitId },
}

/// Ordered so that sorting statuses lists Vulnerable, then Safe, then Unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    Vulnerable,
    Safe,
    Unknown,
}

impl Status {
    pub const ALL: [Status; 3] = [Status::Vulnerable, Status::Safe, Status::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Vulnerable => "Vulnerable",
            Status::Safe => "Safe",
            Status::Unknown => "Unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlobSet {
    Vulnerable,
    Fixed,
}

/// A head tree entry that matched one of the lineage sets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub path: String,
    pub blob: BlobId,
    pub set: BlobSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectStatus {
    pub project: String,
    pub head: CommitId,
    pub status: Status,
    pub evidence: Vec<Evidence>,
    /// Vulnerable blobs found anywhere in the project's reachable history.
    pub ever_contained: BTreeSet<BlobId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub fix: FixSpec,
    pub lineage: LineageSets,
    /// Sorted by (status, project).
    pub statuses: Vec<ProjectStatus>,
    pub summary: SummaryRow,
    /// Projects that only ever held fixed blobs. Present only on request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_only_adopters: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default)]
pub struct TraceOptions {
    /// Name shown in the summary row. Defaults to the alphabetically first
    /// project whose history contains the fix commit.
    pub upstream: Option<String>,
    pub include_fixed_only: bool,
}

/// Project → vulnerable blobs seen in its history, for every project that
/// saw at least one.
pub fn vulnerable_history(
    index: &IndexBundle,
    lineage: &LineageSets,
) -> BTreeMap<String, BTreeSet<BlobId>> {
    blob_history(index, &lineage.vulnerable)
}

fn blob_history(
    index: &IndexBundle,
    blobs: &BTreeSet<BlobId>,
) -> BTreeMap<String, BTreeSet<BlobId>> {
    let mut out: BTreeMap<String, BTreeSet<BlobId>> = BTreeMap::new();
    for blob in blobs {
        for commit in index.commits_of_blob(blob) {
            for project in index.projects_of_commit(commit) {
                out.entry(project.clone()).or_default().insert(blob.clone());
            }
        }
    }
    out
}

/// Projects whose reachable history contains at least one vulnerable blob.
pub fn candidate_projects(index: &IndexBundle, lineage: &LineageSets) -> BTreeSet<String> {
    vulnerable_history(index, lineage).into_keys().collect()
}

fn classify_with_history(
    index: &IndexBundle,
    corpus: &Corpus,
    lineage: &LineageSets,
    project: &str,
    ever_contained: BTreeSet<BlobId>,
) -> Result<ProjectStatus, ClassifyError> {
    let head = index.head_of_project(project)?;
    let commit = corpus
        .commit(head)
        .ok_or_else(|| ClassifyError::MissingHead {
            project: project.to_owned(),
            head: head.clone(),
        })?;
    let mut evidence = Vec::new();
    for (path, blob) in commit.tree.iter() {
        let set = if lineage.vulnerable.contains(blob) {
            BlobSet::Vulnerable
        } else if lineage.fixed.contains(blob) {
            BlobSet::Fixed
        } else {
            continue;
        };
        evidence.push(Evidence {
            path: path.to_owned(),
            blob: blob.clone(),
            set,
        });
    }
    let status = if evidence.iter().any(|e| e.set == BlobSet::Vulnerable) {
        Status::Vulnerable
    } else if evidence.iter().any(|e| e.set == BlobSet::Fixed) {
        Status::Safe
    } else {
        Status::Unknown
    };
    Ok(ProjectStatus {
        project: project.to_owned(),
        head: head.clone(),
        status,
        evidence,
        ever_contained,
    })
}

/// Classify one project from its head tree.
pub fn classify_project(
    index: &IndexBundle,
    corpus: &Corpus,
    lineage: &LineageSets,
    project: &str,
) -> Result<ProjectStatus, ClassifyError> {
    let ever: BTreeSet<BlobId> = lineage
        .vulnerable
        .iter()
        .filter(|blob| {
            index
                .commits_of_blob(blob)
                .iter()
                .any(|c| index.projects_of_commit(c).contains(project))
        })
        .cloned()
        .collect();
    classify_with_history(index, corpus, lineage, project, ever)
}

/// Full trace with default options.
pub fn classify_all(
    index: &IndexBundle,
    corpus: &Corpus,
    fix: &FixSpec,
) -> Result<TraceReport, ClassifyError> {
    trace(index, corpus, fix, &TraceOptions::default())
}

/// Compute lineage, classify every candidate project and summarize.
pub fn trace(
    index: &IndexBundle,
    corpus: &Corpus,
    fix: &FixSpec,
    options: &TraceOptions,
) -> Result<TraceReport, ClassifyError> {
    let lineage = compute_lineage(index, corpus, fix)?;
    let history = vulnerable_history(index, &lineage);

    let mut statuses: Vec<ProjectStatus> = history
        .into_par_iter()
        .map(|(project, ever)| classify_with_history(index, corpus, &lineage, &project, ever))
        .collect::<Result<_, _>>()?;
    statuses.sort_by(|a, b| (a.status, &a.project).cmp(&(b.status, &b.project)));

    let fixed_only_adopters = options.include_fixed_only.then(|| {
        blob_history(index, &lineage.fixed)
            .into_keys()
            .filter(|p| !statuses.iter().any(|s| &s.project == p))
            .collect()
    });

    let upstream = options.upstream.clone().unwrap_or_else(|| {
        index
            .projects_of_commit(&fix.fix_commit)
            .iter()
            .next()
            .cloned()
            .unwrap_or_else(|| "UNKNOWN".to_owned())
    });

    let mut report = TraceReport {
        fix: fix.clone(),
        lineage,
        statuses,
        summary: SummaryRow::default(),
        fixed_only_adopters,
    };
    report.summary = summarize(&report, &upstream);
    Ok(report)
}
