//! Line-delimited JSON corpus format (VLC-JSONL v1).
//!
//! One UTF-8 JSON object per line, in any order:
//!
//! ```text
//! {"type":"blob","id":"<hex-or-token>","content_b64":"<base64>"}
//! {"type":"commit","id":"c2","parents":["c1"],"timestamp":0,"message":"...","tree":{"src/f.c":"a0"}}
//! {"type":"project","name":"U","head":"c4"}
//! ```
//!
//! Blank lines are ignored.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BlobId, Commit, CommitId, Corpus, CorpusBuilder, CorpusError, Project};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Record {
    Blob {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        content_b64: Option<String>,
    },
    Commit {
        id: String,
        #[serde(default)]
        parents: Vec<String>,
        timestamp: i64,
        #[serde(default)]
        message: String,
        #[serde(default)]
        tree: BTreeMap<String, String>,
    },
    Project {
        name: String,
        head: String,
    },
}

/// Parse a record stream into a validated corpus.
pub fn ingest_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut builder = CorpusBuilder::new();
    ingest_into(&mut builder, reader)?;
    builder.finish()
}

/// Parse a record stream into an existing builder.
pub fn ingest_into<R: BufRead>(builder: &mut CorpusBuilder, reader: R) -> Result<(), CorpusError> {
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            Record::Blob { id, content_b64 } => {
                if id.is_empty() {
                    return Err(malformed(line_no, "blob id is empty"));
                }
                let content = content_b64
                    .map(|b64| BASE64.decode(b64.as_bytes()))
                    .transpose()
                    .map_err(|e| malformed(line_no, &format!("invalid content_b64: {e}")))?;
                builder.add_blob(BlobId(id), content)?;
            }
            Record::Commit {
                id,
                parents,
                timestamp,
                message,
                tree,
            } => {
                if id.is_empty() {
                    return Err(malformed(line_no, "commit id is empty"));
                }
                builder.add_commit(Commit {
                    id: CommitId(id),
                    parents: parents.into_iter().map(CommitId).collect(),
                    tree: tree.into_iter().map(|(p, b)| (p, BlobId(b))).collect(),
                    timestamp,
                    message,
                })?;
            }
            Record::Project { name, head } => {
                if name.is_empty() {
                    return Err(malformed(line_no, "project name is empty"));
                }
                builder.add_project(Project {
                    name,
                    head: CommitId(head),
                })?;
            }
        }
    }
    Ok(())
}

fn malformed(line: usize, message: &str) -> CorpusError {
    CorpusError::Malformed {
        line,
        message: message.to_owned(),
    }
}

/// Write `corpus` in canonical order: blobs, then commits, then projects,
/// each sorted by key.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for (id, content) in corpus.blobs() {
        let record = Record::Blob {
            id: id.to_string(),
            content_b64: content.map(|c| BASE64.encode(c)),
        };
        write_record(&mut out, &record)?;
    }
    for commit in corpus.commits() {
        let record = Record::Commit {
            id: commit.id.to_string(),
            parents: commit.parents.iter().map(|p| p.to_string()).collect(),
            timestamp: commit.timestamp,
            message: commit.message.clone(),
            tree: commit
                .tree
                .iter()
                .map(|(p, b)| (p.to_owned(), b.to_string()))
                .collect(),
        };
        write_record(&mut out, &record)?;
    }
    for project in corpus.projects() {
        let record = Record::Project {
            name: project.name.clone(),
            head: project.head.to_string(),
        };
        write_record(&mut out, &record)?;
    }
    Ok(())
}

fn write_record<W: Write>(out: &mut W, record: &Record) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}
