//! Seeded random corpus generation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use vlt_core::corpus::{BlobId, Commit, CommitId, Corpus, Project, TreeSnapshot};
use vlt_core::lineage::FixSpec;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub projects: usize,
    pub commits: usize,
    pub paths: usize,
    pub blobs: usize,
    /// Probability that a non-first commit starts a new root.
    pub root_rate: f64,
    pub merge_rate: f64,
    /// Per-path probability that a commit rewrites the file.
    pub edit_rate: f64,
}

impl GenConfig {
    /// Sizes drawn uniformly within the given upper bounds.
    pub fn random_within<R: Rng>(
        rng: &mut R,
        max_projects: usize,
        max_commits: usize,
        max_paths: usize,
        max_blobs: usize,
    ) -> Self {
        GenConfig {
            projects: rng.gen_range(1..=max_projects),
            commits: rng.gen_range(2..=max_commits),
            paths: rng.gen_range(1..=max_paths),
            blobs: rng.gen_range(2..=max_blobs),
            root_rate: rng.gen_range(0.0..0.15),
            merge_rate: rng.gen_range(0.0..0.25),
            edit_rate: rng.gen_range(0.15..0.6),
        }
    }

    /// Bounds used by the oracle-equivalence suite: ≤20 projects,
    /// ≤200 commits, ≤5 paths, ≤30 blobs.
    pub fn small<R: Rng>(rng: &mut R) -> Self {
        Self::random_within(rng, 20, 200, 5, 30)
    }
}

fn path_name(i: usize) -> String {
    match i % 3 {
        0 => format!("src/file{i}.c"),
        1 => format!("lib/mod{i}/impl.c"),
        _ => format!("test{i}.c"),
    }
}

fn message<R: Rng>(rng: &mut R, i: usize) -> String {
    if rng.gen_bool(0.05) {
        format!(
            "Fix issue {i} (CVE-20{:02}-{:04})",
            rng.gen_range(10..25),
            rng.gen_range(0..10000)
        )
    } else {
        format!("change {i}")
    }
}

fn random_tree<R: Rng>(rng: &mut R, paths: &[String], blobs: &[BlobId]) -> TreeSnapshot {
    let mut tree = TreeSnapshot::new();
    for p in paths {
        if rng.gen_bool(0.7) {
            tree.insert(p.clone(), blobs.choose(rng).unwrap().clone());
        }
    }
    tree
}

/// Build a random, valid corpus. Commits are created in topological order;
/// edits draw from a small blob pool so reverts (lineage cycles) are common.
pub fn random_corpus<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Corpus {
    let paths: Vec<String> = (0..cfg.paths).map(path_name).collect();
    let blobs: Vec<BlobId> = (0..cfg.blobs)
        .map(|i| BlobId::new(format!("b{i}")))
        .collect();
    let mut commits: Vec<Commit> = Vec::with_capacity(cfg.commits);

    for i in 0..cfg.commits {
        let id = CommitId::new(format!("c{i:05}"));
        let recent = |rng: &mut R| {
            if rng.gen_bool(0.8) {
                rng.gen_range(i.saturating_sub(8)..i)
            } else {
                rng.gen_range(0..i)
            }
        };
        let (parents, tree) = if i == 0 || rng.gen_bool(cfg.root_rate) {
            (vec![], random_tree(rng, &paths, &blobs))
        } else if i >= 2 && rng.gen_bool(cfg.merge_rate) {
            let a = recent(rng);
            let mut b = rng.gen_range(0..i);
            if b == a {
                b = (a + 1) % i;
            }
            let (ta, tb) = (&commits[a].tree, &commits[b].tree);
            let mut tree = TreeSnapshot::new();
            for p in &paths {
                let pick = match rng.gen_range(0..10) {
                    0..=3 => ta.get(p).cloned(),
                    4..=7 => tb.get(p).cloned(),
                    8 => Some(blobs.choose(rng).unwrap().clone()),
                    _ => None,
                };
                if let Some(blob) = pick {
                    tree.insert(p.clone(), blob);
                }
            }
            (vec![commits[a].id.clone(), commits[b].id.clone()], tree)
        } else {
            let p = recent(rng);
            let mut tree = commits[p].tree.clone();
            for path in &paths {
                let roll: f64 = rng.gen();
                if tree.get(path).is_some() {
                    if roll < cfg.edit_rate {
                        tree.insert(path.clone(), blobs.choose(rng).unwrap().clone());
                    } else if roll < cfg.edit_rate + 0.04 {
                        tree.remove(path);
                    }
                } else if roll < 0.1 {
                    tree.insert(path.clone(), blobs.choose(rng).unwrap().clone());
                }
            }
            (vec![commits[p].id.clone()], tree)
        };
        commits.push(Commit {
            id,
            parents,
            tree,
            timestamp: 1_600_000_000 + i as i64 * 60,
            message: message(rng, i),
        });
    }

    let projects: Vec<Project> = (0..cfg.projects)
        .map(|j| {
            // bias heads towards later commits
            let lo = cfg.commits / 3;
            let k = if rng.gen_bool(0.7) {
                rng.gen_range(lo..cfg.commits)
            } else {
                rng.gen_range(0..cfg.commits)
            };
            Project {
                name: format!("p{j:02}"),
                head: commits[k].id.clone(),
            }
        })
        .collect();

    let used: BTreeSet<BlobId> = commits
        .iter()
        .flat_map(|c| c.tree.iter().map(|(_, b)| b.clone()).collect::<Vec<_>>())
        .collect();
    Corpus::from_parts(projects, commits, used.into_iter().map(|b| (b, None)))
}

/// Commits reachable from any head that change at least one file in place.
pub fn fix_candidates(corpus: &Corpus) -> Vec<CommitId> {
    let reachable = corpus.reachable_commits();
    corpus
        .commits()
        .filter(|c| reachable.contains(&c.id))
        .filter(|c| {
            c.parents.iter().any(|p| {
                let parent = corpus.commit(p).unwrap();
                c.tree
                    .iter()
                    .any(|(path, b)| parent.tree.get(path).is_some_and(|pb| pb != b))
            })
        })
        .map(|c| c.id.clone())
        .collect()
}

/// A random fix commit, sometimes with a path filter restricted to the
/// paths it changes. `None` if no commit changes a file in place.
pub fn pick_fix<R: Rng>(rng: &mut R, corpus: &Corpus) -> Option<FixSpec> {
    let candidates = fix_candidates(corpus);
    let id = candidates.choose(rng)?.clone();
    let mut fix = FixSpec::new(id.clone());
    if rng.gen_bool(0.25) {
        let commit = corpus.commit(&id).unwrap();
        let changed: Vec<String> = commit
            .parents
            .iter()
            .flat_map(|p| {
                let parent = corpus.commit(p).unwrap();
                commit
                    .tree
                    .iter()
                    .filter(|(path, b)| parent.tree.get(path).is_some_and(|pb| pb != *b))
                    .map(|(path, _)| path.to_owned())
                    .collect::<Vec<_>>()
            })
            .collect();
        fix = fix.with_paths([changed.choose(rng).unwrap().clone()]);
    }
    if rng.gen_bool(0.5) {
        fix = fix
            .with_cve(&format!("CVE-2020-{:04}", rng.gen_range(0..10000)))
            .unwrap();
    }
    Some(fix)
}

/// Random lineage graph as an edge list over `nodes` blobs, cycles allowed.
pub fn random_edges<R: Rng>(rng: &mut R, nodes: usize) -> Vec<(BlobId, BlobId)> {
    let density = rng.gen_range(0.0..3.0);
    let count = ((nodes as f64) * density) as usize;
    (0..count)
        .filter_map(|_| {
            let a = rng.gen_range(0..nodes);
            let b = rng.gen_range(0..nodes);
            (a != b).then(|| (BlobId::new(format!("n{a}")), BlobId::new(format!("n{b}"))))
        })
        .collect()
}

/// A corpus of `commits` commits spread over `projects` linear histories,
/// with exactly `seeded` messages carrying a CVE id (some lowercase) and a
/// sprinkling of near-miss decoys. Returns the corpus and the seeded
/// (project, commit) pairs.
pub fn cve_corpus<R: Rng>(
    rng: &mut R,
    commits: usize,
    projects: usize,
    seeded: usize,
) -> (Corpus, BTreeSet<(String, CommitId)>) {
    let decoys = [
        "Mention CVE in passing",
        "Not a CVE-2019-123 id",
        "CWE-2019-12345 weakness class",
        "cve tracker update",
        "CVE-19-12345 malformed",
        "See CVE 2020 1234",
    ];
    let mut seeded_at: BTreeSet<usize> = BTreeSet::new();
    while seeded_at.len() < seeded {
        seeded_at.insert(rng.gen_range(0..commits));
    }
    let per_project = commits.div_ceil(projects);
    let mut out = Vec::new();
    let mut heads: BTreeMap<String, CommitId> = BTreeMap::new();
    let mut expected = BTreeSet::new();
    for i in 0..commits {
        let project = format!("proj{:03}", i / per_project);
        let id = CommitId::new(format!("{:040x}", i * 7919 + 1));
        let parents: Vec<CommitId> = heads.get(&project).cloned().into_iter().collect();
        let message = if seeded_at.contains(&i) {
            expected.insert((project.clone(), id.clone()));
            let cve = format!(
                "CVE-{}-{}",
                rng.gen_range(1999..2025),
                rng.gen_range(1000..200000)
            );
            let cve = if rng.gen_bool(0.3) {
                cve.to_lowercase()
            } else {
                cve
            };
            format!("Fix buffer overflow\n\nAddresses {cve}.")
        } else if rng.gen_bool(0.1) {
            decoys.choose(rng).unwrap().to_string()
        } else {
            format!("Routine change {i}")
        };
        out.push(Commit {
            id: id.clone(),
            parents,
            tree: TreeSnapshot::new(),
            timestamp: i as i64,
            message,
        });
        heads.insert(project, id);
    }
    let projects = heads.into_iter().map(|(name, head)| Project { name, head });
    (Corpus::from_parts(projects, out, []), expected)
}
