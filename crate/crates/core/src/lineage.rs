//! Vulnerable and fixed blob sets for one fix commit.
//!
//! Every file the fix changes in place yields a seed pair: the blob before
//! the fix (vulnerable) and after it (fixed). All earlier revisions of a
//! vulnerable seed, found by following `b2ob` across the whole corpus, are
//! taken as vulnerable; all later revisions of a fixed seed, found through
//! `ob2b`, are taken as fixed. A blob that lands in both sets (possible when
//! a fix is reverted somewhere) stays vulnerable only.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BlobId, CommitId, Corpus};
use crate::index::{diff_against_parents, IndexBundle, IndexError};

static CVE_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^CVE-\d{4}-\d{4,}$").unwrap());

pub fn is_cve_id(label: &str) -> bool {
    CVE_ID.is_match(label)
}

#[derive(Debug, Error)]
pub enum LineageError {
    #[error("fix commit {0} not found in corpus")]
    UnknownCommit(CommitId),
    #[error("fix commit {0} has no parent to compare against")]
    RootFixCommit(CommitId),
    #[error("fix commit {0} changes no tracked file in place")]
    NoSeeds(CommitId),
    #[error("{0:?} is not a CVE identifier (expected CVE-YYYY-NNNN)")]
    InvalidCveId(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixSpec {
    pub fix_commit: CommitId,
    /// Restrict seeds to these paths; `None` keeps every changed path.
    pub path_filter: Option<BTreeSet<String>>,
    pub cve_id: Option<String>,
}

impl FixSpec {
    pub fn new(fix_commit: impl Into<CommitId>) -> Self {
        FixSpec {
            fix_commit: fix_commit.into(),
            path_filter: None,
            cve_id: None,
        }
    }

    pub fn with_paths<I, S>(mut self, paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.path_filter = Some(paths.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_cve(mut self, cve_id: &str) -> Result<Self, LineageError> {
        if !is_cve_id(cve_id) {
            return Err(LineageError::InvalidCveId(cve_id.to_owned()));
        }
        self.cve_id = Some(cve_id.to_owned());
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FixSeed {
    pub path: String,
    pub vulnerable_seed: BlobId,
    pub fixed_seed: BlobId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageSets {
    pub seeds: Vec<FixSeed>,
    pub vulnerable: BTreeSet<BlobId>,
    /// Fixed blobs with the overlap already removed.
    pub fixed: BTreeSet<BlobId>,
    /// Blobs that were both ancestors and descendants of the fix.
    pub overlap: BTreeSet<BlobId>,
}

/// Seed pairs from the in-place changes of the fix commit against each of
/// its parents, filtered by the fix's path filter.
pub fn fix_seeds(corpus: &Corpus, fix: &FixSpec) -> Result<Vec<FixSeed>, LineageError> {
    let commit = corpus
        .commit(&fix.fix_commit)
        .ok_or_else(|| LineageError::UnknownCommit(fix.fix_commit.clone()))?;
    if commit.parents.is_empty() {
        return Err(LineageError::RootFixCommit(commit.id.clone()));
    }
    let seeds: BTreeSet<FixSeed> = diff_against_parents(commit, corpus)?
        .into_iter()
        .filter(|e| {
            fix.path_filter
                .as_ref()
                .is_none_or(|paths| paths.contains(&e.path))
        })
        .map(|e| FixSeed {
            path: e.path,
            vulnerable_seed: e.old_blob,
            fixed_seed: e.new_blob,
        })
        .collect();
    Ok(seeds.into_iter().collect())
}

fn closure<'a, 'g, F>(seeds: impl IntoIterator<Item = &'a BlobId>, next: F) -> BTreeSet<BlobId>
where
    F: Fn(&BlobId) -> &'g BTreeSet<BlobId>,
{
    let mut seen: BTreeSet<BlobId> = BTreeSet::new();
    let mut work: Vec<BlobId> = seeds.into_iter().cloned().collect();
    while let Some(blob) = work.pop() {
        if seen.contains(&blob) {
            continue;
        }
        work.extend(next(&blob).iter().filter(|b| !seen.contains(*b)).cloned());
        seen.insert(blob);
    }
    seen
}

/// Seeds plus every blob reachable from them through `b2ob`.
pub fn ancestor_closure<'a>(
    index: &IndexBundle,
    seeds: impl IntoIterator<Item = &'a BlobId>,
) -> BTreeSet<BlobId> {
    closure(seeds, |b| index.old_blobs(b))
}

/// Seeds plus every blob reachable from them through `ob2b`.
pub fn descendant_closure<'a>(
    index: &IndexBundle,
    seeds: impl IntoIterator<Item = &'a BlobId>,
) -> BTreeSet<BlobId> {
    closure(seeds, |b| index.new_blobs(b))
}

pub fn compute_lineage(
    index: &IndexBundle,
    corpus: &Corpus,
    fix: &FixSpec,
) -> Result<LineageSets, LineageError> {
    let seeds = fix_seeds(corpus, fix)?;
    if seeds.is_empty() {
        return Err(LineageError::NoSeeds(fix.fix_commit.clone()));
    }
    let vulnerable = ancestor_closure(index, seeds.iter().map(|s| &s.vulnerable_seed));
    let mut fixed = descendant_closure(index, seeds.iter().map(|s| &s.fixed_seed));
    let overlap: BTreeSet<BlobId> = vulnerable.intersection(&fixed).cloned().collect();
    fixed.retain(|b| !overlap.contains(b));
    log::debug!(
        "fix {}: {} seeds, {} vulnerable, {} fixed, {} overlapping",
        fix.fix_commit,
        seeds.len(),
        vulnerable.len(),
        fixed.len(),
        overlap.len()
    );
    Ok(LineageSets {
        seeds,
        vulnerable,
        fixed,
        overlap,
    })
}
