//! Test support for vlt: seeded random corpora and a brute-force reference
//! implementation of the trace that never touches `IndexBundle`.

pub mod checks;
pub mod gen;
pub mod oracle;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use vlt_core::corpus::{ingest_corpus, Corpus};

/// Path of a bundled fixture under `crates/core/fixtures`.
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> Corpus {
    let file = File::open(fixture_path(name)).expect("fixture exists");
    ingest_corpus(BufReader::new(file)).expect("fixture is valid")
}
