//! Minimal reader for Git object databases (loose objects and v2 packs) and
//! conversion of a repository's history into corpus records.
//!
//! Blob ids are recomputed as SHA-256 of the blob bytes so that imported
//! repositories and hand-written corpora agree on identity. Commit ids keep
//! Git's hex SHA-1. Submodule entries are skipped; tags are ignored.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use flate2::read::ZlibDecoder;
use sha1::{Digest, Sha1};
use thiserror::Error;

use super::{blob_digest, BlobId, Commit, CommitId, CorpusBuilder, CorpusError, Project};

#[derive(Debug, Error)]
pub enum GitError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0} is not a git repository")]
    NotARepository(PathBuf),
    #[error("cannot resolve default branch: {0}")]
    UnresolvableHead(String),
    #[error("object {0} not found")]
    MissingObject(Oid),
    #[error("corrupt object {id}: {reason}")]
    CorruptObject { id: String, reason: String },
    #[error("corrupt pack {path}: {reason}")]
    CorruptPack { path: PathBuf, reason: String },
    #[error("object {id} is a {found}, expected a {expected}")]
    UnexpectedKind {
        id: Oid,
        found: ObjectKind,
        expected: ObjectKind,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> GitError + '_ {
    move |source| GitError::Io {
        path: path.to_owned(),
        source,
    }
}

/// A 20-byte Git object name.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Oid([u8; 20]);

impl Oid {
    pub fn from_hex(s: &str) -> Option<Oid> {
        let mut out = [0u8; 20];
        hex::decode_to_slice(s.trim(), &mut out).ok()?;
        Some(Oid(out))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oid({})", self.to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    Commit,
    Tree,
    Blob,
    Tag,
}

impl ObjectKind {
    fn from_name(name: &[u8]) -> Option<Self> {
        match name {
            b"commit" => Some(ObjectKind::Commit),
            b"tree" => Some(ObjectKind::Tree),
            b"blob" => Some(ObjectKind::Blob),
            b"tag" => Some(ObjectKind::Tag),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ObjectKind::Commit => "commit",
            ObjectKind::Tree => "tree",
            ObjectKind::Blob => "blob",
            ObjectKind::Tag => "tag",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn object_hash(kind: ObjectKind, data: &[u8]) -> Oid {
    let mut hasher = Sha1::new();
    hasher.update(kind.name().as_bytes());
    hasher.update(b" ");
    hasher.update(data.len().to_string().as_bytes());
    hasher.update([0u8]);
    hasher.update(data);
    Oid(hasher.finalize().into())
}

struct Pack {
    path: PathBuf,
    data: Vec<u8>,
    /// Sorted by oid, as in the .idx file.
    entries: Vec<(Oid, u64)>,
}

impl Pack {
    fn open(idx_path: &Path) -> Result<Pack, GitError> {
        let pack_path = idx_path.with_extension("pack");
        let idx = fs::read(idx_path).map_err(io_err(idx_path))?;
        let data = fs::read(&pack_path).map_err(io_err(&pack_path))?;
        let corrupt = |reason: &str| GitError::CorruptPack {
            path: idx_path.to_owned(),
            reason: reason.to_owned(),
        };

        if idx.len() < 8 + 256 * 4 || idx[..4] != [0xff, b't', b'O', b'c'] {
            return Err(corrupt("unsupported index format (only v2 is read)"));
        }
        if be_u32(&idx[4..8]) != 2 {
            return Err(corrupt("unsupported index version"));
        }
        let count = be_u32(&idx[8 + 255 * 4..8 + 256 * 4]) as usize;
        let names_at = 8 + 256 * 4;
        let offsets_at = names_at + count * 20 + count * 4;
        let large_at = offsets_at + count * 4;
        if idx.len() < large_at {
            return Err(corrupt("index truncated"));
        }
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let mut name = [0u8; 20];
            name.copy_from_slice(&idx[names_at + i * 20..names_at + (i + 1) * 20]);
            let raw = be_u32(&idx[offsets_at + i * 4..offsets_at + i * 4 + 4]);
            let offset = if raw & 0x8000_0000 != 0 {
                let at = large_at + (raw & 0x7fff_ffff) as usize * 8;
                let bytes = idx
                    .get(at..at + 8)
                    .ok_or_else(|| corrupt("large offset out of range"))?;
                u64::from_be_bytes(bytes.try_into().unwrap())
            } else {
                u64::from(raw)
            };
            entries.push((Oid(name), offset));
        }

        if data.len() < 12 || &data[..4] != b"PACK" {
            return Err(GitError::CorruptPack {
                path: pack_path,
                reason: "missing PACK signature".into(),
            });
        }
        let version = be_u32(&data[4..8]);
        if version != 2 && version != 3 {
            return Err(GitError::CorruptPack {
                path: pack_path,
                reason: format!("unsupported pack version {version}"),
            });
        }
        Ok(Pack {
            path: pack_path,
            data,
            entries,
        })
    }

    fn offset_of(&self, id: &Oid) -> Option<u64> {
        self.entries
            .binary_search_by(|(name, _)| name.cmp(id))
            .ok()
            .map(|i| self.entries[i].1)
    }

    fn corrupt(&self, reason: impl Into<String>) -> GitError {
        GitError::CorruptPack {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    fn byte(&self, pos: usize) -> Result<u8, GitError> {
        self.data
            .get(pos)
            .copied()
            .ok_or_else(|| self.corrupt(format!("read past end at {pos}")))
    }

    fn inflate(&self, pos: usize, size: usize) -> Result<Vec<u8>, GitError> {
        let input = self
            .data
            .get(pos..)
            .ok_or_else(|| self.corrupt("object data out of range"))?;
        let mut out = Vec::with_capacity(size.min(1 << 24));
        ZlibDecoder::new(input)
            .take(size as u64 + 1)
            .read_to_end(&mut out)
            .map_err(|e| self.corrupt(format!("inflate at {pos}: {e}")))?;
        if out.len() != size {
            return Err(self.corrupt(format!(
                "object at {pos} inflated to {} bytes, expected {size}",
                out.len()
            )));
        }
        Ok(out)
    }
}

type Cached = (ObjectKind, Rc<Vec<u8>>);

/// Read-only view of `.git/objects`.
pub struct ObjectStore {
    objects_dir: PathBuf,
    packs: Vec<Pack>,
    cache: RefCell<HashMap<(usize, u64), Cached>>,
}

const CACHE_LIMIT: usize = 8192;

impl ObjectStore {
    pub fn open(objects_dir: &Path) -> Result<Self, GitError> {
        if !objects_dir.is_dir() {
            return Err(GitError::NotARepository(objects_dir.to_owned()));
        }
        let mut packs = Vec::new();
        let pack_dir = objects_dir.join("pack");
        if pack_dir.is_dir() {
            let mut idx_files: Vec<PathBuf> = fs::read_dir(&pack_dir)
                .map_err(io_err(&pack_dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "idx"))
                .collect();
            idx_files.sort();
            for idx in idx_files {
                packs.push(Pack::open(&idx)?);
            }
        }
        Ok(ObjectStore {
            objects_dir: objects_dir.to_owned(),
            packs,
            cache: RefCell::new(HashMap::new()),
        })
    }

    /// Read and verify one object.
    pub fn read(&self, id: &Oid) -> Result<(ObjectKind, Rc<Vec<u8>>), GitError> {
        if let Some(found) = self.read_loose(id)? {
            return Ok(found);
        }
        for (pack_no, pack) in self.packs.iter().enumerate() {
            if let Some(offset) = pack.offset_of(id) {
                let (kind, data) = self.read_packed(pack_no, offset, 0)?;
                if object_hash(kind, &data) != *id {
                    return Err(GitError::CorruptObject {
                        id: id.to_hex(),
                        reason: "packed object hash mismatch".into(),
                    });
                }
                return Ok((kind, data));
            }
        }
        Err(GitError::MissingObject(*id))
    }

    fn read_expect(&self, id: &Oid, expected: ObjectKind) -> Result<Rc<Vec<u8>>, GitError> {
        let (found, data) = self.read(id)?;
        if found != expected {
            return Err(GitError::UnexpectedKind {
                id: *id,
                found,
                expected,
            });
        }
        Ok(data)
    }

    fn loose_path(&self, id: &Oid) -> PathBuf {
        let hex = id.to_hex();
        self.objects_dir.join(&hex[..2]).join(&hex[2..])
    }

    fn read_loose(&self, id: &Oid) -> Result<Option<Cached>, GitError> {
        let path = self.loose_path(id);
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let corrupt = |reason: String| GitError::CorruptObject {
            id: id.to_hex(),
            reason,
        };
        let mut full = Vec::new();
        ZlibDecoder::new(raw.as_slice())
            .read_to_end(&mut full)
            .map_err(|e| corrupt(format!("inflate: {e}")))?;
        let nul = full
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| corrupt("missing header terminator".into()))?;
        let header = &full[..nul];
        let space = header
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| corrupt("malformed header".into()))?;
        let kind = ObjectKind::from_name(&header[..space])
            .ok_or_else(|| corrupt("unknown object type".into()))?;
        let size: usize = std::str::from_utf8(&header[space + 1..])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt("malformed size".into()))?;
        let data = full[nul + 1..].to_vec();
        if data.len() != size {
            return Err(corrupt(format!(
                "header says {size} bytes, found {}",
                data.len()
            )));
        }
        if object_hash(kind, &data) != *id {
            return Err(corrupt("hash mismatch".into()));
        }
        Ok(Some((kind, Rc::new(data))))
    }

    fn read_packed(&self, pack_no: usize, offset: u64, depth: usize) -> Result<Cached, GitError> {
        if let Some(hit) = self.cache.borrow().get(&(pack_no, offset)) {
            return Ok(hit.clone());
        }
        let pack = &self.packs[pack_no];
        if depth > 10_000 {
            return Err(pack.corrupt("delta chain too deep"));
        }
        let mut pos = offset as usize;
        let mut c = pack.byte(pos)?;
        pos += 1;
        let type_code = (c >> 4) & 7;
        let mut size = (c & 0x0f) as usize;
        let mut shift = 4;
        while c & 0x80 != 0 {
            c = pack.byte(pos)?;
            pos += 1;
            if shift > 57 {
                return Err(pack.corrupt("object size varint overflow"));
            }
            size |= ((c & 0x7f) as usize) << shift;
            shift += 7;
        }

        let result = match type_code {
            1..=4 => {
                let kind = [
                    ObjectKind::Commit,
                    ObjectKind::Tree,
                    ObjectKind::Blob,
                    ObjectKind::Tag,
                ][type_code as usize - 1];
                (kind, Rc::new(pack.inflate(pos, size)?))
            }
            6 => {
                let mut c = pack.byte(pos)?;
                pos += 1;
                let mut back = (c & 0x7f) as u64;
                while c & 0x80 != 0 {
                    c = pack.byte(pos)?;
                    pos += 1;
                    back = ((back + 1) << 7) | (c & 0x7f) as u64;
                }
                let base_offset = offset
                    .checked_sub(back)
                    .ok_or_else(|| pack.corrupt("delta base before start of pack"))?;
                let (kind, base) = self.read_packed(pack_no, base_offset, depth + 1)?;
                let delta = pack.inflate(pos, size)?;
                (
                    kind,
                    Rc::new(apply_delta(&base, &delta).map_err(|r| pack.corrupt(r))?),
                )
            }
            7 => {
                let base_id = pack
                    .data
                    .get(pos..pos + 20)
                    .ok_or_else(|| pack.corrupt("truncated base reference"))?;
                let base_id = Oid(base_id.try_into().unwrap());
                let (kind, base) = self.read(&base_id)?;
                let delta = pack.inflate(pos + 20, size)?;
                (
                    kind,
                    Rc::new(apply_delta(&base, &delta).map_err(|r| pack.corrupt(r))?),
                )
            }
            other => return Err(pack.corrupt(format!("invalid object type {other}"))),
        };

        let mut cache = self.cache.borrow_mut();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert((pack_no, offset), result.clone());
        Ok(result)
    }

    /// Every object name in the store, loose and packed.
    pub fn all_ids(&self) -> Result<BTreeSet<Oid>, GitError> {
        let mut ids = BTreeSet::new();
        let dir = &self.objects_dir;
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let entry = entry.map_err(io_err(dir))?;
            let fan = entry.file_name().to_string_lossy().into_owned();
            if fan.len() != 2 || !entry.path().is_dir() {
                continue;
            }
            let sub = entry.path();
            for obj in fs::read_dir(&sub).map_err(io_err(&sub))? {
                let obj = obj.map_err(io_err(&sub))?;
                let rest = obj.file_name().to_string_lossy().into_owned();
                if let Some(id) = Oid::from_hex(&format!("{fan}{rest}")) {
                    ids.insert(id);
                }
            }
        }
        for pack in &self.packs {
            ids.extend(pack.entries.iter().map(|(id, _)| *id));
        }
        Ok(ids)
    }
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn delta_varint(delta: &[u8], pos: &mut usize) -> Result<usize, String> {
    let mut value = 0usize;
    let mut shift = 0;
    loop {
        let c = *delta.get(*pos).ok_or("truncated delta header")?;
        *pos += 1;
        if shift > 57 {
            return Err("delta size overflow".into());
        }
        value |= ((c & 0x7f) as usize) << shift;
        shift += 7;
        if c & 0x80 == 0 {
            return Ok(value);
        }
    }
}

/// Apply a Git pack delta to `base`.
fn apply_delta(base: &[u8], delta: &[u8]) -> Result<Vec<u8>, String> {
    let mut pos = 0;
    let source_size = delta_varint(delta, &mut pos)?;
    if source_size != base.len() {
        return Err(format!(
            "delta expects base of {source_size} bytes, got {}",
            base.len()
        ));
    }
    let target_size = delta_varint(delta, &mut pos)?;
    let mut out = Vec::with_capacity(target_size.min(1 << 24));
    while pos < delta.len() {
        let op = delta[pos];
        pos += 1;
        if op & 0x80 != 0 {
            let mut offset = 0usize;
            let mut size = 0usize;
            for i in 0..4 {
                if op & (1 << i) != 0 {
                    offset |= (*delta.get(pos).ok_or("truncated copy")? as usize) << (8 * i);
                    pos += 1;
                }
            }
            for i in 0..3 {
                if op & (0x10 << i) != 0 {
                    size |= (*delta.get(pos).ok_or("truncated copy")? as usize) << (8 * i);
                    pos += 1;
                }
            }
            if size == 0 {
                size = 0x10000;
            }
            let chunk = base
                .get(offset..offset + size)
                .ok_or("copy out of base range")?;
            out.extend_from_slice(chunk);
        } else if op != 0 {
            let n = op as usize;
            let chunk = delta.get(pos..pos + n).ok_or("truncated insert")?;
            out.extend_from_slice(chunk);
            pos += n;
        } else {
            return Err("reserved delta opcode 0".into());
        }
    }
    if out.len() != target_size {
        return Err(format!(
            "delta produced {} bytes, expected {target_size}",
            out.len()
        ));
    }
    Ok(out)
}

#[derive(Debug)]
struct GitCommit {
    tree: Oid,
    parents: Vec<Oid>,
    timestamp: i64,
    message: String,
}

fn parse_commit(id: &Oid, data: &[u8]) -> Result<GitCommit, GitError> {
    let corrupt = |reason: &str| GitError::CorruptObject {
        id: id.to_hex(),
        reason: reason.to_owned(),
    };
    let (headers, message) = match data.windows(2).position(|w| w == b"\n\n") {
        Some(i) => (&data[..i], &data[i + 2..]),
        None => (data, &[][..]),
    };
    let mut tree = None;
    let mut parents = Vec::new();
    let mut committer_ts = None;
    let mut author_ts = None;
    for line in headers.split(|&b| b == b'\n') {
        if line.first() == Some(&b' ') {
            continue;
        }
        let line = String::from_utf8_lossy(line);
        let (key, value) = line.split_once(' ').unwrap_or((&line, ""));
        match key {
            "tree" => tree = Some(Oid::from_hex(value).ok_or_else(|| corrupt("bad tree id"))?),
            "parent" => parents.push(Oid::from_hex(value).ok_or_else(|| corrupt("bad parent id"))?),
            "committer" => committer_ts = signature_time(value),
            "author" => author_ts = signature_time(value),
            _ => {}
        }
    }
    Ok(GitCommit {
        tree: tree.ok_or_else(|| corrupt("commit has no tree"))?,
        parents,
        timestamp: committer_ts.or(author_ts).unwrap_or(0),
        message: String::from_utf8_lossy(message).into_owned(),
    })
}

/// `Name <email> 1700000000 +0000` → 1700000000
fn signature_time(value: &str) -> Option<i64> {
    let after_email = &value[value.rfind('>')? + 1..];
    after_email.split_whitespace().next()?.parse().ok()
}

enum TreeEntry {
    Blob(String, Oid),
    Tree(String, Oid),
}

fn parse_tree(id: &Oid, data: &[u8]) -> Result<Vec<TreeEntry>, GitError> {
    let corrupt = |reason: &str| GitError::CorruptObject {
        id: id.to_hex(),
        reason: reason.to_owned(),
    };
    let mut entries = Vec::new();
    let mut pos = 0;
    while pos < data.len() {
        let space = data[pos..]
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| corrupt("entry without mode"))?;
        let mode = &data[pos..pos + space];
        pos += space + 1;
        let nul = data[pos..]
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| corrupt("entry without name terminator"))?;
        let name = String::from_utf8_lossy(&data[pos..pos + nul]).into_owned();
        pos += nul + 1;
        let oid: [u8; 20] = data
            .get(pos..pos + 20)
            .ok_or_else(|| corrupt("truncated entry id"))?
            .try_into()
            .unwrap();
        pos += 20;
        match mode {
            b"40000" | b"040000" => entries.push(TreeEntry::Tree(name, Oid(oid))),
            b"160000" => {}
            _ => entries.push(TreeEntry::Blob(name, Oid(oid))),
        }
    }
    Ok(entries)
}

/// Locate the repository metadata directory for a work tree or bare repo.
fn find_git_dir(path: &Path) -> Result<PathBuf, GitError> {
    let dot_git = path.join(".git");
    if dot_git.is_dir() {
        return Ok(dot_git);
    }
    if dot_git.is_file() {
        let text = fs::read_to_string(&dot_git).map_err(io_err(&dot_git))?;
        if let Some(target) = text.trim().strip_prefix("gitdir:") {
            return Ok(path.join(target.trim()));
        }
    }
    if path.join("objects").is_dir() {
        return Ok(path.to_owned());
    }
    Err(GitError::NotARepository(path.to_owned()))
}

fn resolve_ref(git_dir: &Path, name: &str, depth: usize) -> Result<Option<Oid>, GitError> {
    if depth > 8 {
        return Err(GitError::UnresolvableHead(format!(
            "symbolic ref loop at {name}"
        )));
    }
    let loose = git_dir.join(name);
    if loose.is_file() {
        let text = fs::read_to_string(&loose).map_err(io_err(&loose))?;
        let text = text.trim();
        if let Some(target) = text.strip_prefix("ref:") {
            return resolve_ref(git_dir, target.trim(), depth + 1);
        }
        return Oid::from_hex(text)
            .map(Some)
            .ok_or_else(|| GitError::UnresolvableHead(format!("{name} holds {text:?}")));
    }
    let packed = git_dir.join("packed-refs");
    if packed.is_file() {
        let text = fs::read_to_string(&packed).map_err(io_err(&packed))?;
        for line in text.lines() {
            if line.starts_with('#') || line.starts_with('^') {
                continue;
            }
            if let Some((hex, refname)) = line.split_once(' ') {
                if refname.trim() == name {
                    return Ok(Oid::from_hex(hex));
                }
            }
        }
    }
    Ok(None)
}

/// The default branch tip, or `None` when HEAD is missing or unborn.
fn resolve_head(git_dir: &Path) -> Result<Option<Oid>, GitError> {
    let head = git_dir.join("HEAD");
    if !head.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&head).map_err(io_err(&head))?;
    let text = text.trim();
    if let Some(target) = text.strip_prefix("ref:") {
        return resolve_ref(git_dir, target.trim(), 0);
    }
    Oid::from_hex(text)
        .map(Some)
        .ok_or_else(|| GitError::UnresolvableHead(format!("HEAD holds {text:?}")))
}

/// Newest childless commit in the store; ties go to the smallest id.
fn fallback_head(store: &ObjectStore) -> Result<Oid, GitError> {
    let mut commits = HashMap::new();
    for id in store.all_ids()? {
        let (kind, data) = store.read(&id)?;
        if kind == ObjectKind::Commit {
            commits.insert(id, parse_commit(&id, &data)?);
        }
    }
    let parents: BTreeSet<Oid> = commits.values().flat_map(|c| c.parents.clone()).collect();
    commits
        .iter()
        .filter(|(id, _)| !parents.contains(id))
        .max_by(|(a_id, a), (b_id, b)| a.timestamp.cmp(&b.timestamp).then(b_id.cmp(a_id)))
        .map(|(id, _)| *id)
        .ok_or_else(|| GitError::UnresolvableHead("repository has no commits".into()))
}

struct Importer<'a> {
    store: &'a ObjectStore,
    builder: &'a mut CorpusBuilder,
    blobs: HashMap<Oid, BlobId>,
    trees: HashMap<Oid, Rc<Vec<(String, BlobId)>>>,
}

impl Importer<'_> {
    fn blob(&mut self, id: &Oid) -> Result<BlobId, CorpusError> {
        if let Some(b) = self.blobs.get(id) {
            return Ok(b.clone());
        }
        let content = self.store.read_expect(id, ObjectKind::Blob)?;
        let digest = blob_digest(&content);
        self.builder
            .add_blob(digest.clone(), Some(content.as_ref().clone()))?;
        self.blobs.insert(*id, digest.clone());
        Ok(digest)
    }

    fn tree(&mut self, id: &Oid) -> Result<Rc<Vec<(String, BlobId)>>, CorpusError> {
        if let Some(t) = self.trees.get(id) {
            return Ok(t.clone());
        }
        let data = self.store.read_expect(id, ObjectKind::Tree)?;
        let mut flat = Vec::new();
        for entry in parse_tree(id, &data)? {
            match entry {
                TreeEntry::Blob(name, oid) => flat.push((name, self.blob(&oid)?)),
                TreeEntry::Tree(name, oid) => {
                    for (path, blob) in self.tree(&oid)?.iter() {
                        flat.push((format!("{name}/{path}"), blob.clone()));
                    }
                }
            }
        }
        let flat = Rc::new(flat);
        self.trees.insert(*id, flat.clone());
        Ok(flat)
    }

    fn history(&mut self, head: Oid) -> Result<(), CorpusError> {
        let mut stack = vec![head];
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let commit_id = CommitId(id.to_hex());
            if self.builder.has_commit(&commit_id) {
                // shared with an earlier import, ancestors included
                continue;
            }
            let data = self.store.read_expect(&id, ObjectKind::Commit)?;
            let parsed = parse_commit(&id, &data)?;
            let tree = self.tree(&parsed.tree)?;
            stack.extend(parsed.parents.iter().filter(|p| !seen.contains(*p)));
            self.builder.add_commit(Commit {
                id: commit_id,
                parents: parsed
                    .parents
                    .iter()
                    .map(|p| CommitId(p.to_hex()))
                    .collect(),
                tree: tree.iter().map(|(p, b)| (p.clone(), b.clone())).collect(),
                timestamp: parsed.timestamp,
                message: parsed.message,
            })?;
        }
        Ok(())
    }
}

/// Import the history reachable from a repository's default branch as
/// project `name`.
///
/// The head is HEAD's target. When HEAD is missing or points at an unborn
/// branch, the newest commit without children is used, ties broken by the
/// smallest id.
pub fn import_repository(
    builder: &mut CorpusBuilder,
    path: &Path,
    name: &str,
) -> Result<Project, CorpusError> {
    let git_dir = find_git_dir(path)?;
    let store = ObjectStore::open(&git_dir.join("objects"))?;
    let head = match resolve_head(&git_dir)? {
        Some(id) => id,
        None => fallback_head(&store)?,
    };
    log::debug!("importing {} as {name:?} from head {head}", path.display());
    let mut importer = Importer {
        store: &store,
        builder,
        blobs: HashMap::new(),
        trees: HashMap::new(),
    };
    importer.history(head)?;
    let project = Project {
        name: name.to_owned(),
        head: CommitId(head.to_hex()),
    };
    builder.add_project(project.clone())?;
    Ok(project)
}
