use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;
use vlt_core::classifier::{trace, ClassifyError, TraceOptions};
use vlt_core::corpus::{
    import_repository, jsonl::ingest_into, write_corpus, CorpusBuilder, CorpusError,
};
use vlt_core::cve_search::{scan_with_index, write_hits, ScanError};
use vlt_core::index::{build_indexes, read_index, write_index, IndexBundle, IndexError};
use vlt_core::lineage::{FixSpec, LineageError};
use vlt_core::report::{parse_json, render, render_many, write_project_lists, Format, ReportError};
use vlt_core::Corpus;

use crate::{Command, IndexArgs, IngestArgs, ReportArgs, ScanArgs, TraceArgs};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// A flag combination clap cannot express.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<CorpusError>()
            || cause.is::<IndexError>()
            || cause.is::<LineageError>()
            || cause.is::<ClassifyError>()
            || cause.is::<ReportError>()
            || cause.is::<ScanError>()
            || cause.is::<io::Error>()
        {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Ingest(args) => ingest(args),
        Command::Index(args) => index(args),
        Command::ScanCve(args) => scan_cve(args),
        Command::Trace(args) => trace_cmd(args),
        Command::Report(args) => report(args),
    }
}

fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    for path in paths {
        if !path.exists() {
            return Err(io::Error::new(
                io::ErrorKind::NotFound,
                "no such file or directory",
            ))
            .with_context(|| format!("input {}", path.display()));
        }
    }
    Ok(())
}

/// Write to a temporary file next to `path`, then rename over it.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("create temporary file in {}", dir.display()))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        fill(&mut out)?;
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let started = Instant::now();
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let mut builder = CorpusBuilder::new();
    ingest_into(&mut builder, BufReader::new(file))
        .with_context(|| format!("read {}", path.display()))?;
    let corpus = builder
        .finish()
        .with_context(|| format!("validate {}", path.display()))?;
    log::info!(
        "loaded {}: {} projects, {} commits, {} blobs in {:.2?}",
        path.display(),
        corpus.project_count(),
        corpus.commit_count(),
        corpus.blob_count(),
        started.elapsed()
    );
    Ok(corpus)
}

fn load_index(path: &Path) -> Result<IndexBundle> {
    let data = std::fs::read(path).with_context(|| format!("open {}", path.display()))?;
    read_index(&data).with_context(|| format!("read index {}", path.display()))
}

/// Refuse an index that was built from a different corpus.
fn check_index_matches(index: &IndexBundle, corpus: &Corpus) -> Result<()> {
    let same = index.p2h().len() == corpus.project_count()
        && corpus
            .projects()
            .all(|p| index.p2h().get(&p.name) == Some(&p.head));
    if !same {
        return Err(IndexError::Corrupt("index was not built from this corpus".into()).into());
    }
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<()> {
    if args.repos.len() != args.names.len() {
        bail!(UsageError(format!(
            "every --git needs a matching --name ({} repositories, {} names)",
            args.repos.len(),
            args.names.len()
        )));
    }
    if args.corpora.is_empty() && args.repos.is_empty() {
        bail!(UsageError(
            "nothing to ingest: give --corpus or --git".into()
        ));
    }
    require_inputs(args.corpora.iter().chain(&args.repos))?;

    let mut builder = CorpusBuilder::new().strict(args.strict);
    for path in &args.corpora {
        let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
        ingest_into(&mut builder, BufReader::new(file))
            .with_context(|| format!("read {}", path.display()))?;
    }
    for (repo, name) in args.repos.iter().zip(&args.names) {
        let project = import_repository(&mut builder, repo, name)
            .with_context(|| format!("import {}", repo.display()))?;
        log::info!(
            "imported {} as {} at {}",
            repo.display(),
            project.name,
            project.head
        );
    }
    let corpus = builder.finish()?;
    for warning in corpus.validate() {
        log::warn!("{warning}");
    }
    write_atomic(&args.out, |out| Ok(write_corpus(&corpus, out)?))?;
    log::info!(
        "wrote {}: {} projects, {} commits, {} blobs",
        args.out.display(),
        corpus.project_count(),
        corpus.commit_count(),
        corpus.blob_count()
    );
    Ok(())
}

fn index(args: &IndexArgs) -> Result<()> {
    require_inputs([&args.corpus])?;
    let corpus = load_corpus(&args.corpus)?;
    let started = Instant::now();
    let index = build_indexes(&corpus)?;
    log::info!(
        "indexed {} lineage edges, {} blobs in {:.2?}",
        index.edge_log().len(),
        index.b2c().len(),
        started.elapsed()
    );
    write_atomic(&args.out, |out| Ok(write_index(&index, out)?))
}

fn scan_cve(args: &ScanArgs) -> Result<()> {
    require_inputs([&args.index, &args.corpus])?;
    let corpus = load_corpus(&args.corpus)?;
    let index = load_index(&args.index)?;
    check_index_matches(&index, &corpus)?;
    let hits = scan_with_index(&corpus, &index, args.pattern.as_deref())?;
    log::info!("{} matching (project, commit) pairs", hits.len());
    match &args.out {
        Some(path) => write_atomic(path, |out| Ok(write_hits(&hits, out)?)),
        None => Ok(write_hits(&hits, io::stdout().lock())?),
    }
}

fn trace_cmd(args: &TraceArgs) -> Result<()> {
    require_inputs([&args.index, &args.corpus])?;
    let mut fix = FixSpec::new(args.fix_commit.as_str());
    if !args.paths.is_empty() {
        fix = fix.with_paths(args.paths.iter().cloned());
    }
    if let Some(cve) = &args.cve {
        fix = fix.with_cve(cve)?;
    }
    let corpus = load_corpus(&args.corpus)?;
    let index = load_index(&args.index)?;
    check_index_matches(&index, &corpus)?;

    let started = Instant::now();
    let options = TraceOptions {
        upstream: args.upstream.clone(),
        include_fixed_only: args.fixed_only,
    };
    let report = trace(&index, &corpus, &fix, &options)?;
    let s = &report.summary;
    log::info!(
        "traced {} in {:.2?}: {} vulnerable blobs, {} vulnerable / {} safe / {} unknown projects",
        fix.fix_commit,
        started.elapsed(),
        s.vulnerable_blobs,
        s.vulnerable_projects,
        s.safe_projects,
        s.unknown_projects
    );
    let bytes = render(&report, Format::Json)?;
    write_atomic(&args.out, |out| Ok(out.write_all(&bytes)?))
}

fn report(args: &ReportArgs) -> Result<()> {
    require_inputs(&args.inputs)?;
    if args.lists.is_some() && args.inputs.len() != 1 {
        bail!(UsageError("--lists needs exactly one --in".into()));
    }
    let format: Format = args.format.into();
    if format == Format::Json && args.inputs.len() != 1 {
        bail!(UsageError("--format json needs exactly one --in".into()));
    }
    let reports = args
        .inputs
        .iter()
        .map(|path| {
            let data = std::fs::read(path).with_context(|| format!("open {}", path.display()))?;
            parse_json(&data).with_context(|| format!("read report {}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(dir) = &args.lists {
        for path in write_project_lists(&reports[0], dir)? {
            log::info!("wrote {}", path.display());
        }
    }
    let bytes = render_many(&reports, format)?;
    match &args.out {
        Some(path) => write_atomic(path, |out| Ok(out.write_all(&bytes)?)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(&bytes)?;
            Ok(stdout.flush()?)
        }
    }
}
