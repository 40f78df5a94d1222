//! `vlt`: ingest corpora, build the lineage index, scan for CVE mentions,
//! trace a fix commit and render reports.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vlt_core::report::Format;

#[derive(Debug, Parser)]
#[command(
    name = "vlt",
    version,
    about = "Trace vulnerable file lineage across project histories"
)]
pub struct Cli {
    /// Worker threads (defaults to available parallelism)
    #[arg(long, global = true, env = "VLT_JOBS", value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    /// More output on stderr; repeat for more detail
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only report errors
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge JSONL corpora and git repositories into one corpus snapshot
    Ingest(IngestArgs),
    /// Build the lineage index from a corpus snapshot
    Index(IndexArgs),
    /// List commits whose messages mention a CVE id
    ScanCve(ScanArgs),
    /// Classify every project against a fix commit
    Trace(TraceArgs),
    /// Render one or more trace reports
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSONL corpus file (repeatable)
    #[arg(long = "corpus", value_name = "FILE")]
    pub corpora: Vec<PathBuf>,
    /// Git repository to import (repeatable, paired with --name)
    #[arg(long = "git", value_name = "DIR")]
    pub repos: Vec<PathBuf>,
    /// Project name for the matching --git
    #[arg(long = "name", value_name = "NAME")]
    pub names: Vec<String>,
    /// Reject trees that reference blobs without a blob record
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_name = "FILE")]
    pub index: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Regular expression to search for instead of canonical CVE ids
    #[arg(long, value_name = "REGEX")]
    pub pattern: Option<String>,
    /// Write JSONL hits here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_name = "FILE")]
    pub index: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "SHA")]
    pub fix_commit: String,
    /// Only seed from these paths of the fix commit
    #[arg(long, value_name = "P1,P2,...", value_delimiter = ',')]
    pub paths: Vec<String>,
    /// CVE id shown in the summary
    #[arg(long, value_name = "ID")]
    pub cve: Option<String>,
    /// Project name shown in the summary
    #[arg(long, value_name = "NAME")]
    pub upstream: Option<String>,
    /// Also list projects that only ever held fixed blobs
    #[arg(long)]
    pub fixed_only: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Table,
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => Format::Table,
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trace report (repeatable; table and csv get one row each)
    #[arg(long = "in", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: FormatArg,
    /// Write project lists per status into this directory
    #[arg(long, value_name = "DIR")]
    pub lists: Option<PathBuf>,
    /// Write the rendering here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

/// Parse `argv` and run; returns the process exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                commands::EXIT_USAGE
            } else {
                0
            };
        }
    };
    init_logging(&cli);
    if let Some(jobs) = cli.jobs {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.into())
            .build_global()
        {
            log::error!("cannot start worker pool: {err}");
            return commands::EXIT_INTERNAL;
        }
    }
    match std::panic::catch_unwind(|| commands::dispatch(&cli.command)) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            commands::exit_code(&err)
        }
        Err(_) => commands::EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
