//! Single-file index persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "VLCT1"                 5-byte magic
//! u32 version             currently 1
//! u32 section count       6
//! section*                u8 tag, u64 payload length, payload
//! [u8; 32]                SHA-256 of every preceding byte
//! ```
//!
//! Section tags: 1 `b2ob`, 2 `ob2b`, 3 `b2c`, 4 `c2p`, 5 `p2h`, 6 edge log.
//! Strings are a u32 byte length followed by UTF-8. Set-valued maps are a
//! u64 entry count, then per entry the key and a u64-counted list of values.
//! `p2h` is a u64 count of key/value string pairs; the edge log is a u64
//! count of (path, old blob, new blob, commit) string quadruples.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{IndexBundle, IndexError, LineageEdge};
use crate::corpus::{BlobId, CommitId};

pub const MAGIC: &[u8; 5] = b"VLCT1";
pub const FORMAT_VERSION: u32 = 1;

const TAG_B2OB: u8 = 1;
const TAG_OB2B: u8 = 2;
const TAG_B2C: u8 = 3;
const TAG_C2P: u8 = 4;
const TAG_P2H: u8 = 5;
const TAG_EDGES: u8 = 6;
const SECTIONS: u32 = 6;

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_set_map<K: AsRef<str>, V: AsRef<str>>(buf: &mut Vec<u8>, map: &BTreeMap<K, BTreeSet<V>>) {
    buf.extend_from_slice(&(map.len() as u64).to_le_bytes());
    for (k, vs) in map {
        put_str(buf, k.as_ref());
        buf.extend_from_slice(&(vs.len() as u64).to_le_bytes());
        for v in vs {
            put_str(buf, v.as_ref());
        }
    }
}

impl AsRef<str> for BlobId {
    fn as_ref(&self) -> &str {
        self.as_str()
    }
}

impl AsRef<str> for CommitId {
    fn as_ref(&self) -> &str {
        self.as_str()
    }
}

fn section(out: &mut Vec<u8>, tag: u8, payload: Vec<u8>) {
    out.push(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
}

/// Serialize `index` into its on-disk byte form.
pub fn write_index<W: Write>(index: &IndexBundle, mut out: W) -> std::io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&SECTIONS.to_le_bytes());

    let mut p = Vec::new();
    put_set_map(&mut p, &index.b2ob);
    section(&mut buf, TAG_B2OB, p);

    let mut p = Vec::new();
    put_set_map(&mut p, &index.ob2b);
    section(&mut buf, TAG_OB2B, p);

    let mut p = Vec::new();
    put_set_map(&mut p, &index.b2c);
    section(&mut buf, TAG_B2C, p);

    let mut p = Vec::new();
    put_set_map(&mut p, &index.c2p);
    section(&mut buf, TAG_C2P, p);

    let mut p = Vec::new();
    p.extend_from_slice(&(index.p2h.len() as u64).to_le_bytes());
    for (name, head) in &index.p2h {
        put_str(&mut p, name);
        put_str(&mut p, head.as_str());
    }
    section(&mut buf, TAG_P2H, p);

    let mut p = Vec::new();
    p.extend_from_slice(&(index.edge_log.len() as u64).to_le_bytes());
    for e in &index.edge_log {
        put_str(&mut p, &e.path);
        put_str(&mut p, e.old_blob.as_str());
        put_str(&mut p, e.new_blob.as_str());
        put_str(&mut p, e.commit.as_str());
    }
    section(&mut buf, TAG_EDGES, p);

    let digest = Sha256::digest(&buf);
    out.write_all(&buf)?;
    out.write_all(&digest)?;
    out.flush()
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::Truncated)?;
        let bytes = self.data.get(self.pos..end).ok_or(IndexError::Truncated)?;
        self.pos = end;
        Ok(bytes)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize, IndexError> {
        let n = self.u64()?;
        // every element needs at least four bytes
        if n > (self.data.len() - self.pos) as u64 / 4 + 1 {
            return Err(IndexError::Truncated);
        }
        Ok(n as usize)
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| IndexError::Corrupt("string is not UTF-8".into()))
    }

    fn set_map<K: Ord, V: Ord>(
        &mut self,
        key: impl Fn(String) -> K,
        value: impl Fn(String) -> V,
    ) -> Result<BTreeMap<K, BTreeSet<V>>, IndexError> {
        let mut map = BTreeMap::new();
        for _ in 0..self.count()? {
            let k = key(self.string()?);
            let mut set = BTreeSet::new();
            for _ in 0..self.count()? {
                set.insert(value(self.string()?));
            }
            map.insert(k, set);
        }
        Ok(map)
    }
}

/// Parse the byte form produced by [`write_index`].
pub fn read_index(data: &[u8]) -> Result<IndexBundle, IndexError> {
    if data.len() < MAGIC.len() {
        return if MAGIC.starts_with(data) {
            Err(IndexError::Truncated)
        } else {
            Err(IndexError::WrongMagic)
        };
    }
    if &data[..MAGIC.len()] != MAGIC {
        return Err(IndexError::WrongMagic);
    }
    let mut r = Reader {
        data,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch { found: version });
    }
    let sections = r.u32()?;
    let mut index = IndexBundle::new();
    let mut seen = BTreeSet::new();
    for _ in 0..sections {
        let tag = r.u8()?;
        let len = r.u64()? as usize;
        let payload = r.take(len)?;
        if !seen.insert(tag) {
            return Err(IndexError::Corrupt(format!("section {tag} repeated")));
        }
        let mut s = Reader {
            data: payload,
            pos: 0,
        };
        match tag {
            TAG_B2OB => index.b2ob = s.set_map(BlobId::new, BlobId::new)?,
            TAG_OB2B => index.ob2b = s.set_map(BlobId::new, BlobId::new)?,
            TAG_B2C => index.b2c = s.set_map(BlobId::new, CommitId::new)?,
            TAG_C2P => index.c2p = s.set_map(CommitId::new, |v| v)?,
            TAG_P2H => {
                for _ in 0..s.count()? {
                    let name = s.string()?;
                    let head = CommitId::new(s.string()?);
                    index.p2h.insert(name, head);
                }
            }
            TAG_EDGES => {
                for _ in 0..s.count()? {
                    index.edge_log.insert(LineageEdge {
                        path: s.string()?,
                        old_blob: BlobId::new(s.string()?),
                        new_blob: BlobId::new(s.string()?),
                        commit: CommitId::new(s.string()?),
                    });
                }
            }
            other => return Err(IndexError::Corrupt(format!("unknown section tag {other}"))),
        }
        if s.pos != payload.len() {
            return Err(IndexError::Corrupt(format!(
                "section {tag} has trailing bytes"
            )));
        }
    }
    if seen.len() != SECTIONS as usize {
        return Err(IndexError::Corrupt("missing sections".into()));
    }
    let body_end = r.pos;
    let checksum = r.take(32)?;
    if Sha256::digest(&data[..body_end]).as_slice() != checksum {
        return Err(IndexError::Corrupt("checksum mismatch".into()));
    }
    if r.pos != data.len() {
        return Err(IndexError::Corrupt("trailing bytes after checksum".into()));
    }
    Ok(index)
}

/// Write `index` to `path` via a sibling temporary file and rename.
pub fn save_index(index: &IndexBundle, path: &Path) -> Result<(), IndexError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut buf = Vec::new();
    write_index(index, &mut buf)?;
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<IndexBundle, IndexError> {
    read_index(&fs::read(path)?)
}
