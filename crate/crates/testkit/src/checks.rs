//! Structural checks on an index against the corpus it was built from.

use std::collections::{BTreeMap, BTreeSet};

use vlt_core::corpus::{BlobId, CommitId, Corpus};
use vlt_core::index::IndexBundle;

use crate::oracle;

/// Every violated invariant, described. Empty when the index is sound.
pub fn index_invariants(corpus: &Corpus, index: &IndexBundle) -> Vec<String> {
    let mut problems = Vec::new();

    for (new, olds) in index.b2ob() {
        for old in olds {
            if !index.new_blobs(old).contains(new) {
                problems.push(format!("b2ob[{new}] has {old} but ob2b[{old}] lacks {new}"));
            }
        }
    }
    for (old, news) in index.ob2b() {
        for new in news {
            if !index.old_blobs(new).contains(old) {
                problems.push(format!("ob2b[{old}] has {new} but b2ob[{new}] lacks {old}"));
            }
        }
    }

    let mut membership: BTreeMap<CommitId, BTreeSet<String>> = BTreeMap::new();
    for project in corpus.projects() {
        for c in oracle::reachable(corpus, &project.head) {
            membership
                .entry(c)
                .or_default()
                .insert(project.name.clone());
        }
        match index.head_of_project(&project.name) {
            Ok(head) if head == &project.head => {}
            _ => problems.push(format!("p2h[{}] is not {}", project.name, project.head)),
        }
    }
    if index.p2h().len() != corpus.project_count() {
        problems.push("p2h has projects not in the corpus".into());
    }
    if index.c2p() != &membership {
        problems.push("c2p differs from head reachability".into());
    }

    let mut containment: BTreeMap<BlobId, BTreeSet<CommitId>> = BTreeMap::new();
    for c in membership.keys() {
        for (_, blob) in corpus.commit(c).unwrap().tree.iter() {
            containment
                .entry(blob.clone())
                .or_default()
                .insert(c.clone());
        }
    }
    for (blob, commits) in index.b2c() {
        match containment.get(blob) {
            Some(expected) if expected == commits => {}
            _ => problems.push(format!("b2c[{blob}] is unsound")),
        }
    }
    for blob in containment.keys() {
        if !index.b2c().contains_key(blob) {
            problems.push(format!("b2c misses {blob}"));
        }
    }

    let edges = oracle::all_edges(corpus);
    let indexed: BTreeSet<(BlobId, BlobId)> = index
        .b2ob()
        .iter()
        .flat_map(|(new, olds)| olds.iter().map(move |old| (old.clone(), new.clone())))
        .collect();
    if indexed != edges {
        problems.push("lineage edges differ from exhaustive enumeration".into());
    }
    problems
}
