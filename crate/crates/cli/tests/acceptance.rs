//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlt_core::classifier::{classify_all, Status};
use vlt_core::corpus::{BlobId, CommitId};
use vlt_core::cve_search::scan_commit_messages;
use vlt_core::index::{build_indexes, load_index, save_index, IndexBundle, LineageEdge};
use vlt_core::lineage::{ancestor_closure, descendant_closure, FixSpec};
use vlt_core::report::{parse_json, render, Format, COLUMNS};
use vlt_testkit::gen::{cve_corpus, pick_fix, random_corpus, random_edges, GenConfig};
use vlt_testkit::{checks, fixture_path, load_fixture, oracle};

const ORACLE_CORPORA: usize = 500;
const ORACLE_BUDGET: Duration = Duration::from_secs(300);
const CLOSURE_GRAPHS: usize = 1000;
const MAX_GRAPH_NODES: usize = 100;
const INVARIANT_CORPORA: usize = 500;
const CVE_COMMITS: usize = 1000;
const CVE_SEEDED: usize = 37;
const PERF_COMMITS: usize = 10_000;
const PERF_PROJECTS: usize = 50;
const BUILD_BUDGET: Duration = Duration::from_secs(60);
const MEMORY_BUDGET_KB: u64 = 2 * 1024 * 1024;
const TRACE_BUDGET: Duration = Duration::from_secs(5);
const FIXTURE_BUDGET: Duration = Duration::from_secs(1);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

struct PipelineOutput {
    json: Vec<u8>,
    csv: Vec<u8>,
    table: Vec<u8>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vlt(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_vlt"))
        .args(args)
        .env_remove("VLT_JOBS")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "vlt {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// ingest, index, trace and report through the binary.
fn cli_pipeline(fixture: &str, fix: &str, cve: &str) -> Result<PipelineOutput, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.jsonl");
    let index = dir.path().join("index.vlct");
    let report = dir.path().join("report.json");
    vlt(&[
        "ingest",
        "--corpus",
        s(&fixture_path(fixture)),
        "--out",
        s(&corpus),
    ])?;
    vlt(&["index", "--corpus", s(&corpus), "--out", s(&index)])?;
    vlt(&[
        "trace",
        "--index",
        s(&index),
        "--corpus",
        s(&corpus),
        "--fix-commit",
        fix,
        "--cve",
        cve,
        "--out",
        s(&report),
    ])?;
    let csv = vlt(&["report", "--in", s(&report), "--format", "csv"])?;
    let table = vlt(&["report", "--in", s(&report), "--format", "table"])?;
    let json = std::fs::read(&report).map_err(|e| e.to_string())?;
    Ok(PipelineOutput { json, csv, table })
}

fn read_golden(name: &str) -> Result<Vec<u8>, String> {
    std::fs::read(fixture_path(name)).map_err(|e| format!("{name}: {e}"))
}

fn fixture_fidelity() -> Outcome {
    let started = Instant::now();
    let PipelineOutput { json, table, .. } = cli_pipeline("m.jsonl", "c3", "CVE-2020-0001")?;
    let elapsed = started.elapsed();
    ensure(table == read_golden("m.table.golden")?, || {
        format!(
            "table differs from golden:\n{}",
            String::from_utf8_lossy(&table)
        )
    })?;
    let report = parse_json(&json).map_err(|e| e.to_string())?;
    let names = |status: Status| -> Vec<&str> {
        report
            .statuses
            .iter()
            .filter(|p| p.status == status)
            .map(|p| p.project.as_str())
            .collect()
    };
    ensure(names(Status::Vulnerable) == ["P1"], || {
        format!("vulnerable {:?}", names(Status::Vulnerable))
    })?;
    ensure(names(Status::Safe) == ["P2", "U"], || {
        format!("safe {:?}", names(Status::Safe))
    })?;
    ensure(names(Status::Unknown) == ["P3"], || {
        format!("unknown {:?}", names(Status::Unknown))
    })?;
    ensure(report.statuses.iter().all(|p| p.project != "P4"), || {
        "P4 classified".into()
    })?;
    let m = load_fixture("m.jsonl");
    let fix = FixSpec::new("c3").with_cve("CVE-2020-0001").unwrap();
    let expected = oracle::trace(&m, &fix).map_err(|e| format!("{e:?}"))?;
    ensure(report.summary == expected.summary, || {
        "summary differs from oracle".into()
    })?;
    ensure(report.summary.vulnerable_blobs == 2, || {
        "vulnerable blobs != 2".into()
    })?;
    ensure(elapsed < FIXTURE_BUDGET, || {
        format!("pipeline took {elapsed:.2?}")
    })?;
    Ok(format!("2/1/2/1 matches golden, pipeline {elapsed:.2?}"))
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let (mut compared, mut agreed, mut generated) = (0usize, 0usize, 0usize);
    let (mut with_merges, mut with_cycles) = (0usize, 0usize);
    let mut first_failure = None;
    while compared < ORACLE_CORPORA && generated < 4 * ORACLE_CORPORA {
        generated += 1;
        let cfg = GenConfig::small(&mut rng);
        let corpus = random_corpus(&mut rng, &cfg);
        let Some(fix) = pick_fix(&mut rng, &corpus) else {
            continue;
        };
        compared += 1;
        let index = build_indexes(&corpus).map_err(|e| e.to_string())?;
        if corpus.commits().any(|c| c.parents.len() > 1) {
            with_merges += 1;
        }
        let edges = oracle::all_edges(&corpus);
        if edges
            .iter()
            .any(|(a, b)| edges.contains(&(b.clone(), a.clone())))
        {
            with_cycles += 1;
        }
        let same = match (
            classify_all(&index, &corpus, &fix),
            oracle::trace(&corpus, &fix),
        ) {
            (Ok(got), Ok(want)) => got == want,
            (Err(_), Err(_)) => true,
            _ => false,
        };
        if same {
            agreed += 1;
        } else if first_failure.is_none() {
            first_failure = Some(format!("corpus #{generated} fix {}", fix.fix_commit));
        }
    }
    let elapsed = started.elapsed();
    ensure(compared >= ORACLE_CORPORA, || {
        format!("only {compared} corpora had a fix commit")
    })?;
    ensure(agreed == compared, || {
        format!(
            "{agreed}/{compared} agree; first mismatch {}",
            first_failure.unwrap_or_default()
        )
    })?;
    ensure(with_merges > 0 && with_cycles > 0, || {
        "no merges or revert cycles generated".into()
    })?;
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "{agreed}/{compared} agree ({with_merges} with merges, {with_cycles} with revert cycles) in {elapsed:.2?}"
    ))
}

fn closure_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut cyclic = 0;
    for g in 0..CLOSURE_GRAPHS {
        let nodes = rng.gen_range(1..=MAX_GRAPH_NODES);
        let edges = random_edges(&mut rng, nodes);
        let mut index = IndexBundle::new();
        for (old, new) in &edges {
            index.record_edge(LineageEdge {
                path: "f".into(),
                old_blob: old.clone(),
                new_blob: new.clone(),
                commit: CommitId::from("c"),
            });
        }
        let edge_set: BTreeSet<(BlobId, BlobId)> = edges.iter().cloned().collect();
        let all: Vec<BlobId> = (0..nodes).map(|i| BlobId::new(format!("n{i}"))).collect();
        let k = rng.gen_range(1..=nodes.min(5));
        let seeds: BTreeSet<BlobId> = all.choose_multiple(&mut rng, k).cloned().collect();
        let more: BTreeSet<BlobId> = seeds.iter().chain(all.choose(&mut rng)).cloned().collect();

        let anc = ancestor_closure(&index, &seeds);
        let desc = descendant_closure(&index, &seeds);
        let has_cycle = edge_set
            .iter()
            .any(|(a, b)| oracle::fixpoint(&edge_set, &[b.clone()].into(), false).contains(a));
        if has_cycle {
            cyclic += 1;
        }
        ensure(anc == oracle::fixpoint(&edge_set, &seeds, true), || {
            format!("graph {g}: ancestors differ")
        })?;
        ensure(desc == oracle::fixpoint(&edge_set, &seeds, false), || {
            format!("graph {g}: descendants differ")
        })?;
        ensure(ancestor_closure(&index, &anc) == anc, || {
            format!("graph {g}: ancestor closure not idempotent")
        })?;
        ensure(descendant_closure(&index, &desc) == desc, || {
            format!("graph {g}: descendant closure not idempotent")
        })?;
        ensure(anc.is_subset(&ancestor_closure(&index, &more)), || {
            format!("graph {g}: ancestors not monotone")
        })?;
        ensure(desc.is_subset(&descendant_closure(&index, &more)), || {
            format!("graph {g}: descendants not monotone")
        })?;
    }
    ensure(cyclic > 0, || "no cyclic instances generated".into())?;
    Ok(format!("{CLOSURE_GRAPHS} graphs ({cyclic} cyclic)"))
}

fn index_invariants() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("index.vlct");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for i in 0..INVARIANT_CORPORA {
        let cfg = GenConfig::small(&mut rng);
        let corpus = random_corpus(&mut rng, &cfg);
        let index = build_indexes(&corpus).map_err(|e| e.to_string())?;
        let problems = checks::index_invariants(&corpus, &index);
        ensure(problems.is_empty(), || {
            format!("corpus {i}: {}", problems.join("; "))
        })?;
        save_index(&index, &path).map_err(|e| e.to_string())?;
        let loaded = load_index(&path).map_err(|e| e.to_string())?;
        ensure(loaded == index, || {
            format!("corpus {i}: save/load changed the index")
        })?;
    }
    Ok(format!(
        "{INVARIANT_CORPORA} corpora, inverse/b2c/c2p/round trip all hold"
    ))
}

fn report_schema() -> Outcome {
    let columns = [
        "Project with CVE",
        "CVE",
        "Vulnerable Blobs",
        "Vulnerable Projects",
        "Safe Projects",
        "Unknown Projects",
    ];
    ensure(COLUMNS == columns, || format!("columns {COLUMNS:?}"))?;
    let m = load_fixture("m.jsonl");
    let index = build_indexes(&m).map_err(|e| e.to_string())?;
    let report = classify_all(
        &index,
        &m,
        &FixSpec::new("c3").with_cve("CVE-2020-0001").unwrap(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        render(&report, Format::Csv).unwrap() == read_golden("m.csv.golden")?,
        || "csv golden differs".into(),
    )?;
    ensure(
        render(&report, Format::Table).unwrap() == read_golden("m.table.golden")?,
        || "table golden differs".into(),
    )?;

    let mut notes = Vec::new();
    for (fixture, fix, cve) in [
        ("riot_like", "riot-07", "CVE-2017-8289"),
        ("qemu_like", "qemu-05", "CVE-2018-17962"),
    ] {
        let PipelineOutput { json, csv, .. } = cli_pipeline(&format!("{fixture}.jsonl"), fix, cve)?;
        ensure(
            csv == read_golden(&format!("{fixture}.golden.csv"))?,
            || {
                format!(
                    "{fixture}: csv differs from golden:\n{}",
                    String::from_utf8_lossy(&csv)
                )
            },
        )?;
        let report = parse_json(&json).map_err(|e| e.to_string())?;
        let corpus = load_fixture(&format!("{fixture}.jsonl"));
        let fix_spec = FixSpec::new(fix).with_cve(cve).unwrap();
        let expected = oracle::trace(&corpus, &fix_spec).map_err(|e| format!("{e:?}"))?;
        ensure(report.summary == expected.summary, || {
            format!("{fixture}: golden differs from oracle")
        })?;
        let s = &report.summary;
        let total = s.vulnerable_projects + s.safe_projects + s.unknown_projects;
        if fixture == "riot_like" {
            ensure(s.vulnerable_projects >= 5 * s.safe_projects.max(1), || {
                format!(
                    "{fixture}: vulnerable {} not >> safe {}",
                    s.vulnerable_projects, s.safe_projects
                )
            })?;
        } else {
            ensure(2 * s.unknown_projects > total, || {
                format!(
                    "{fixture}: unknown {}/{total} is not a majority",
                    s.unknown_projects
                )
            })?;
        }
        notes.push(format!(
            "{fixture} {}/{}/{}/{}",
            s.vulnerable_blobs, s.vulnerable_projects, s.safe_projects, s.unknown_projects
        ));
    }
    Ok(format!("six columns verbatim; {}", notes.join(", ")))
}

fn cve_scan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let (corpus, seeded) = cve_corpus(&mut rng, CVE_COMMITS, 25, CVE_SEEDED);
    ensure(seeded.len() == CVE_SEEDED, || {
        format!("seeded {} ids", seeded.len())
    })?;
    ensure(corpus.commit_count() == CVE_COMMITS, || {
        "wrong commit count".into()
    })?;
    let found: BTreeSet<(String, CommitId)> = scan_commit_messages(&corpus, None)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|h| (h.project, h.commit))
        .collect();
    let hits = found.intersection(&seeded).count();
    let precision = if found.is_empty() {
        1.0
    } else {
        hits as f64 / found.len() as f64
    };
    let recall = hits as f64 / seeded.len() as f64;
    ensure(precision == 1.0 && recall == 1.0, || {
        format!("precision {precision:.3} recall {recall:.3}")
    })?;
    Ok(format!("{} hits, precision 1.0, recall 1.0", found.len()))
}

/// Peak resident set size of this process in KiB (Linux only).
fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

fn desk_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let cfg = GenConfig {
        projects: PERF_PROJECTS,
        commits: PERF_COMMITS,
        paths: 120,
        blobs: 4000,
        root_rate: 0.002,
        merge_rate: 0.05,
        edit_rate: 0.05,
    };
    let corpus = random_corpus(&mut rng, &cfg);
    let started = Instant::now();
    let index = build_indexes(&corpus).map_err(|e| e.to_string())?;
    let build = started.elapsed();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("index.vlct");
    save_index(&index, &path).map_err(|e| e.to_string())?;
    drop(index);
    let fix = pick_fix(&mut rng, &corpus).ok_or("no fix candidate")?;
    let started = Instant::now();
    let loaded = load_index(&path).map_err(|e| e.to_string())?;
    let load = started.elapsed();
    let started = Instant::now();
    let report = classify_all(&loaded, &corpus, &fix).map_err(|e| e.to_string())?;
    let trace = started.elapsed();
    let peak = peak_rss_kb();

    ensure(build < BUILD_BUDGET, || {
        format!("index build took {build:.2?}")
    })?;
    ensure(trace < TRACE_BUDGET, || format!("trace took {trace:.2?}"))?;
    if let Some(kb) = peak {
        ensure(kb < MEMORY_BUDGET_KB, || {
            format!("peak RSS {} MiB", kb / 1024)
        })?;
    }
    Ok(format!(
        "{} commits / {} projects: build {build:.2?}, load {load:.2?}, trace {trace:.2?} ({} candidates), peak RSS {}",
        corpus.commit_count(),
        corpus.project_count(),
        report.statuses.len(),
        peak.map_or("n/a".into(), |kb| format!("{} MiB", kb / 1024))
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("AC1 fixture fidelity", fixture_fidelity),
        ("AC2 oracle equivalence", oracle_equivalence),
        ("AC3 closure correctness", closure_correctness),
        ("AC4 index invariants", index_invariants),
        ("AC5 table schema and case-study patterns", report_schema),
        ("AC6 CVE scan precision/recall", cve_scan),
        ("AC7 desk-scale performance", desk_performance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
