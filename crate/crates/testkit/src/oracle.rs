//! Brute-force reference trace.
//!
//! Works straight from the corpus: its own reachability walk, exhaustive
//! lineage-edge enumeration, fixpoint closures, and head trees read directly.
//! Nothing here calls into `vlt_core::index`, `lineage` or `classifier`.

use std::collections::{BTreeMap, BTreeSet};

use vlt_core::classifier::{BlobSet, Evidence, ProjectStatus, Status, TraceReport};
use vlt_core::corpus::{BlobId, CommitId, Corpus};
use vlt_core::lineage::{FixSeed, FixSpec, LineageSets};
use vlt_core::report::SummaryRow;

#[derive(Debug, PartialEq, Eq)]
pub enum OracleError {
    UnknownCommit,
    RootCommit,
    NoSeeds,
}

/// Commits reachable from `head` by breadth-first search.
pub fn reachable(corpus: &Corpus, head: &CommitId) -> BTreeSet<CommitId> {
    let mut seen = BTreeSet::new();
    let mut frontier = vec![head.clone()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for id in frontier {
            if corpus.commit(&id).is_none() || !seen.insert(id.clone()) {
                continue;
            }
            next.extend(corpus.commit(&id).unwrap().parents.iter().cloned());
        }
        frontier = next;
    }
    seen
}

/// Every (old, new) in-place change between a reachable commit and each of
/// its parents.
pub fn all_edges(corpus: &Corpus) -> BTreeSet<(BlobId, BlobId)> {
    let mut ids = BTreeSet::new();
    for p in corpus.projects() {
        ids.extend(reachable(corpus, &p.head));
    }
    let mut edges = BTreeSet::new();
    for id in ids {
        let child = corpus.commit(&id).unwrap();
        for pid in &child.parents {
            let parent = corpus.commit(pid).unwrap();
            for (path, old) in parent.tree.iter() {
                if let Some(new) = child.tree.get(path) {
                    if new != old {
                        edges.insert((old.clone(), new.clone()));
                    }
                }
            }
        }
    }
    edges
}

/// Expand `seeds` until no edge adds anything. `backward` follows edges
/// from new to old (ancestors); otherwise old to new (descendants).
pub fn fixpoint(
    edges: &BTreeSet<(BlobId, BlobId)>,
    seeds: &BTreeSet<BlobId>,
    backward: bool,
) -> BTreeSet<BlobId> {
    let mut set = seeds.clone();
    loop {
        let before = set.len();
        for (old, new) in edges {
            let (from, to) = if backward { (new, old) } else { (old, new) };
            if set.contains(from) {
                set.insert(to.clone());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

pub fn trace(corpus: &Corpus, fix: &FixSpec) -> Result<TraceReport, OracleError> {
    let commit = corpus
        .commit(&fix.fix_commit)
        .ok_or(OracleError::UnknownCommit)?;
    if commit.parents.is_empty() {
        return Err(OracleError::RootCommit);
    }
    let mut seeds = BTreeSet::new();
    for pid in &commit.parents {
        let parent = corpus.commit(pid).unwrap();
        for (path, new) in commit.tree.iter() {
            let keep = match &fix.path_filter {
                Some(paths) => paths.contains(path),
                None => true,
            };
            if let Some(old) = parent.tree.get(path) {
                if old != new && keep {
                    seeds.insert(FixSeed {
                        path: path.to_owned(),
                        vulnerable_seed: old.clone(),
                        fixed_seed: new.clone(),
                    });
                }
            }
        }
    }
    if seeds.is_empty() {
        return Err(OracleError::NoSeeds);
    }

    let edges = all_edges(corpus);
    let vulnerable = fixpoint(
        &edges,
        &seeds.iter().map(|s| s.vulnerable_seed.clone()).collect(),
        true,
    );
    let descendants = fixpoint(
        &edges,
        &seeds.iter().map(|s| s.fixed_seed.clone()).collect(),
        false,
    );
    let overlap: BTreeSet<BlobId> = descendants.intersection(&vulnerable).cloned().collect();
    let fixed: BTreeSet<BlobId> = descendants.difference(&overlap).cloned().collect();

    let mut statuses = Vec::new();
    let mut upstream: Option<String> = None;
    for project in corpus.projects() {
        let history = reachable(corpus, &project.head);
        if upstream.is_none() && history.contains(&fix.fix_commit) {
            upstream = Some(project.name.clone());
        }
        let ever: BTreeSet<BlobId> = history
            .iter()
            .flat_map(|c| {
                corpus
                    .commit(c)
                    .unwrap()
                    .tree
                    .iter()
                    .map(|(_, b)| b.clone())
                    .collect::<Vec<_>>()
            })
            .filter(|b| vulnerable.contains(b))
            .collect();
        if ever.is_empty() {
            continue;
        }
        let head_tree = &corpus.commit(&project.head).unwrap().tree;
        let mut evidence = Vec::new();
        let mut has_vulnerable = false;
        let mut has_fixed = false;
        for (path, blob) in head_tree.iter() {
            if vulnerable.contains(blob) {
                has_vulnerable = true;
                evidence.push(Evidence {
                    path: path.to_owned(),
                    blob: blob.clone(),
                    set: BlobSet::Vulnerable,
                });
            } else if fixed.contains(blob) {
                has_fixed = true;
                evidence.push(Evidence {
                    path: path.to_owned(),
                    blob: blob.clone(),
                    set: BlobSet::Fixed,
                });
            }
        }
        let status = if has_vulnerable {
            Status::Vulnerable
        } else if has_fixed {
            Status::Safe
        } else {
            Status::Unknown
        };
        statuses.push(ProjectStatus {
            project: project.name.clone(),
            head: project.head.clone(),
            status,
            evidence,
            ever_contained: ever,
        });
    }
    statuses.sort_by(|a, b| (a.status, &a.project).cmp(&(b.status, &b.project)));

    let mut counts: BTreeMap<Status, usize> = BTreeMap::new();
    for s in &statuses {
        *counts.entry(s.status).or_default() += 1;
    }
    let summary = SummaryRow {
        project_with_cve: upstream.unwrap_or_else(|| "UNKNOWN".into()),
        cve: fix.cve_id.clone().unwrap_or_else(|| "UNKNOWN".into()),
        vulnerable_blobs: vulnerable.len(),
        vulnerable_projects: counts.get(&Status::Vulnerable).copied().unwrap_or(0),
        safe_projects: counts.get(&Status::Safe).copied().unwrap_or(0),
        unknown_projects: counts.get(&Status::Unknown).copied().unwrap_or(0),
    };
    Ok(TraceReport {
        fix: fix.clone(),
        lineage: LineageSets {
            seeds: seeds.into_iter().collect(),
            vulnerable,
            fixed,
            overlap,
        },
        statuses,
        summary,
        fixed_only_adopters: None,
    })
}
