//! Commit-message scan for CVE identifiers, to surface candidate fix commits.
//!
//! Hits are proposals for a human to triage; a message that mentions a CVE
//! is not necessarily the fix.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommitId, Corpus};
use crate::index::IndexBundle;

pub const DEFAULT_PATTERN: &str = r"CVE-\d{4}-\d{4,}";
const EXCERPT_CHARS: usize = 120;
const EXCERPT_LEAD: usize = 40;

static CVE_ANYCASE: LazyLock<Regex> = LazyLock::new(|| {
    RegexBuilder::new(DEFAULT_PATTERN)
        .case_insensitive(true)
        .build()
        .unwrap()
});

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid pattern: {0}")]
    InvalidPattern(#[from] regex::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CveHit {
    pub project: String,
    pub commit: CommitId,
    /// Uppercased, deduplicated, in order of first appearance.
    pub cve_ids: Vec<String>,
    pub excerpt: String,
}

/// The default pattern matches CVE ids case-insensitively. A custom pattern
/// is used as given (so `CVE` is a plain substring search).
pub fn compile_pattern(pattern: Option<&str>) -> Result<Regex, ScanError> {
    match pattern {
        None => Ok(CVE_ANYCASE.clone()),
        Some(p) => Ok(Regex::new(p)?),
    }
}

fn dedupe_upper<'a>(found: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    found
        .map(str::to_uppercase)
        .filter(|id| seen.insert(id.clone()))
        .collect()
}

/// Canonical CVE ids in `message`; when there are none (a custom pattern
/// matched something else) the pattern's own matches are used instead.
fn extract_ids(message: &str, pattern: &Regex) -> Vec<String> {
    let ids = dedupe_upper(CVE_ANYCASE.find_iter(message).map(|m| m.as_str()));
    if !ids.is_empty() {
        return ids;
    }
    dedupe_upper(pattern.find_iter(message).map(|m| m.as_str()))
}

/// Up to 120 characters of `message` around byte offset `at`, whitespace
/// flattened to single spaces.
fn excerpt(message: &str, at: usize) -> String {
    let chars: Vec<char> = message.chars().collect();
    let at_char = message[..at].chars().count();
    let mut start = at_char.saturating_sub(EXCERPT_LEAD);
    let end = (start + EXCERPT_CHARS).min(chars.len());
    start = start.min(end.saturating_sub(EXCERPT_CHARS));
    chars[start..end]
        .iter()
        .map(|&c| if c.is_whitespace() { ' ' } else { c })
        .collect()
}

fn scan(
    corpus: &Corpus,
    regex: &Regex,
    commit_projects: &BTreeMap<&CommitId, Vec<&str>>,
) -> Vec<CveHit> {
    let mut hits: Vec<CveHit> = commit_projects
        .par_iter()
        .flat_map_iter(|(&id, projects)| {
            let message = &corpus.commit(id).expect("indexed commit exists").message;
            let found = regex
                .find(message)
                .map(|m| (extract_ids(message, regex), excerpt(message, m.start())));
            found.into_iter().flat_map(move |(ids, text)| {
                projects.iter().map(move |p| CveHit {
                    project: (*p).to_owned(),
                    commit: id.clone(),
                    cve_ids: ids.clone(),
                    excerpt: text.clone(),
                })
            })
        })
        .collect();
    hits.sort();
    hits
}

/// Scan every commit reachable from a project head. A commit shared by
/// several projects yields one hit per project. Sorted by (project, commit).
pub fn scan_commit_messages(
    corpus: &Corpus,
    pattern: Option<&str>,
) -> Result<Vec<CveHit>, ScanError> {
    let regex = compile_pattern(pattern)?;
    let mut commit_projects: BTreeMap<&CommitId, Vec<&str>> = BTreeMap::new();
    for project in corpus.projects() {
        for id in corpus.reachable_from(&project.head) {
            commit_projects.entry(id).or_default().push(&project.name);
        }
    }
    Ok(scan(corpus, &regex, &commit_projects))
}

/// Same as [`scan_commit_messages`], taking project membership from `c2p`.
pub fn scan_with_index(
    corpus: &Corpus,
    index: &IndexBundle,
    pattern: Option<&str>,
) -> Result<Vec<CveHit>, ScanError> {
    let regex = compile_pattern(pattern)?;
    let commit_projects: BTreeMap<&CommitId, Vec<&str>> = index
        .c2p()
        .iter()
        .filter(|(id, _)| corpus.commit(id).is_some())
        .map(|(id, ps)| (id, ps.iter().map(String::as_str).collect()))
        .collect();
    Ok(scan(corpus, &regex, &commit_projects))
}

/// One JSON object per line: `{project, commit, cve_ids, excerpt}`.
pub fn write_hits<W: Write>(hits: &[CveHit], mut out: W) -> std::io::Result<()> {
    for hit in hits {
        serde_json::to_writer(&mut out, hit)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
