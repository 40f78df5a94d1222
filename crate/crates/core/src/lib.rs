//! Vulnerable blob lineage tracing.
//!
//! Given a corpus of version-controlled projects and the commit that fixes a
//! known vulnerability, this crate finds every earlier revision of the files
//! touched by the fix (assumed vulnerable) and every later revision (assumed
//! fixed), then checks the head of every project that ever carried one of the
//! vulnerable revisions and labels it [`classifier::Status::Vulnerable`],
//! [`classifier::Status::Safe`] or [`classifier::Status::Unknown`].
//!
//! The pipeline is:
//!
//! 1. [`corpus`] ingests projects, commits, trees and blobs (line-delimited
//!    JSON records or Git object databases).
//! 2. [`index`] derives the blob → old-blob, old-blob → blob, blob → commits,
//!    commit → projects and project → head maps.
//! 3. [`lineage`] computes the vulnerable and fixed blob sets for a fix.
//! 4. [`classifier`] labels each candidate project from its head tree.
//! 5. [`report`] renders the summary row and project lists.
//!
//! [`cve_search`] proposes candidate fix commits by scanning commit messages.

pub mod classifier;
pub mod corpus;
pub mod cve_search;
pub mod index;
pub mod lineage;
pub mod report;

pub use classifier::{classify_all, Status, TraceReport};
pub use corpus::{blob_digest, BlobId, Commit, CommitId, Corpus, Project, TreeSnapshot};
pub use index::{build_indexes, IndexBundle, LineageEdge};
pub use lineage::{compute_lineage, FixSpec, LineageSets};
