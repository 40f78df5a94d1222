use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vlt_core::classifier::{trace, TraceOptions};
use vlt_core::corpus::write_corpus;
use vlt_core::index::{build_indexes, write_index};
use vlt_core::lineage::FixSpec;
use vlt_core::report::{render, Format};
use vlt_testkit::{fixture_path, load_fixture};

fn vlt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlt"))
        .args(args)
        .env_remove("VLT_JOBS")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = vlt(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Pipeline {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    index: PathBuf,
    report: PathBuf,
}

fn pipeline(fixture: &str, fix: &str, extra: &[&str]) -> Pipeline {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let index = dir.path().join("index.vlct");
    let report = dir.path().join("report.json");
    let input = fixture_path(fixture);
    ok(&["ingest", "--corpus", s(&input), "--out", s(&corpus)]);
    ok(&["index", "--corpus", s(&corpus), "--out", s(&index)]);
    let mut args = vec![
        "trace",
        "--index",
        s(&index),
        "--corpus",
        s(&corpus),
        "--fix-commit",
        fix,
        "--out",
        s(&report),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    Pipeline {
        _dir: dir,
        corpus,
        index,
        report,
    }
}

#[test]
fn m_table_report() {
    let p = pipeline("m.jsonl", "c3", &["--cve", "CVE-2020-0001"]);
    let table = ok(&["report", "--in", s(&p.report), "--format", "table"]);
    let golden = std::fs::read(fixture_path("m.table.golden")).unwrap();
    assert_eq!(
        String::from_utf8(table).unwrap(),
        String::from_utf8(golden).unwrap()
    );
    let csv = ok(&["report", "--in", s(&p.report), "--format", "csv"]);
    assert_eq!(csv, std::fs::read(fixture_path("m.csv.golden")).unwrap());
}

#[test]
fn pipeline_equals_library_calls() {
    let fix = FixSpec::new("c3")
        .with_paths(["src/f.c"])
        .with_cve("CVE-2020-0001")
        .unwrap();
    let p = pipeline(
        "m.jsonl",
        "c3",
        &[
            "--paths",
            "src/f.c",
            "--cve",
            "CVE-2020-0001",
            "--fixed-only",
        ],
    );

    let corpus = load_fixture("m.jsonl");
    let mut corpus_bytes = Vec::new();
    write_corpus(&corpus, &mut corpus_bytes).unwrap();
    assert_eq!(std::fs::read(&p.corpus).unwrap(), corpus_bytes);

    let index = build_indexes(&corpus).unwrap();
    let mut index_bytes = Vec::new();
    write_index(&index, &mut index_bytes).unwrap();
    assert_eq!(std::fs::read(&p.index).unwrap(), index_bytes);

    let options = TraceOptions {
        upstream: None,
        include_fixed_only: true,
    };
    let report = trace(&index, &corpus, &fix, &options).unwrap();
    assert_eq!(
        std::fs::read(&p.report).unwrap(),
        render(&report, Format::Json).unwrap()
    );
    let json = ok(&["report", "--in", s(&p.report), "--format", "json"]);
    assert_eq!(json, render(&report, Format::Json).unwrap());
}

#[test]
fn project_lists() {
    let p = pipeline("m.jsonl", "c3", &[]);
    let lists = p.report.parent().unwrap().join("lists");
    ok(&["report", "--in", s(&p.report), "--lists", s(&lists)]);
    let read = |f: &str| std::fs::read_to_string(lists.join(f)).unwrap();
    assert_eq!(read("vulnerable.txt"), "P1\n");
    assert_eq!(read("safe.txt"), "P2\nU\n");
    assert_eq!(read("unknown.txt"), "P3\n");
}

#[test]
fn unknown_fix_commit_is_a_data_error() {
    let p = pipeline("m.jsonl", "c3", &[]);
    let out_path = p.report.with_file_name("other.json");
    let out = vlt(&[
        "trace",
        "--index",
        s(&p.index),
        "--corpus",
        s(&p.corpus),
        "--fix-commit",
        "nonexistent",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
    assert!(!out_path.exists());
}

#[test]
fn unknown_format_is_a_usage_error() {
    let p = pipeline("m.jsonl", "c3", &[]);
    let out = vlt(&["report", "--in", s(&p.report), "--format", "xml"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in ["table", "csv", "json"] {
        assert!(stderr.contains(name), "{stderr}");
    }
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_and_help() {
    assert_eq!(vlt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vlt(&["index", "--bogus"]).status.code(), Some(1));
    assert_eq!(vlt(&["index"]).status.code(), Some(1));
    let help = vlt(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("scan-cve"));
    assert_eq!(
        vlt(&["ingest", "--git", "x", "--out", "y"]).status.code(),
        Some(1)
    );
    let jobs = Command::new(env!("CARGO_BIN_EXE_vlt"))
        .args(["index", "--corpus", "x", "--out", "y"])
        .env("VLT_JOBS", "zero")
        .output()
        .unwrap();
    assert_eq!(jobs.status.code(), Some(1));
}

#[test]
fn bad_inputs_are_data_errors_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(
        vlt(&["index", "--corpus", s(&missing), "--out", s(&out)])
            .status
            .code(),
        Some(2)
    );

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"type\":\"project\",\"name\":\"p\",\"head\":\"nowhere\"}\n",
    )
    .unwrap();
    let res = vlt(&["ingest", "--corpus", s(&bad), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nowhere"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn index_from_another_corpus_is_rejected() {
    let m = pipeline("m.jsonl", "c3", &[]);
    let r = pipeline("r.jsonl", "r2", &[]);
    let out = vlt(&[
        "trace",
        "--index",
        s(&r.index),
        "--corpus",
        s(&m.corpus),
        "--fix-commit",
        "c3",
        "--out",
        s(&m.report),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_writes_jsonl() {
    let p = pipeline("m.jsonl", "c3", &[]);
    let stdout = ok(&["scan-cve", "--index", s(&p.index), "--corpus", s(&p.corpus)]);
    let text = String::from_utf8(stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    let hit: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(hit["project"], "U");
    assert_eq!(hit["commit"], "c3");
    assert_eq!(hit["cve_ids"][0], "CVE-2020-0001");

    let hits = p.report.with_file_name("hits.jsonl");
    ok(&[
        "--jobs",
        "2",
        "scan-cve",
        "--index",
        s(&p.index),
        "--corpus",
        s(&p.corpus),
        "--pattern",
        "overflow",
        "--out",
        s(&hits),
    ]);
    assert_eq!(std::fs::read_to_string(&hits).unwrap(), text);
}
