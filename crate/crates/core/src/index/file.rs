//! Index file layout, all integers little-endian:
//!
//! ```text
//! header   magic "LSVI" | version u32 = 1 | dim u32 | count u64
//!          | name_len u32 | name utf8 | kind u8 | descriptor_version u32
//! entries  count x ( id_len u32 | id utf8 | node_kind u8 | visible u8 | dim x f32 )
//!          sorted by node_id
//! trailer  crc32 (IEEE) of every preceding byte, u32
//! ```

use std::path::Path;

use super::{IndexEntry, IndexError, NodeKind, VectorIndex};
use crate::embed::{EmbedderDescriptor, EmbedderKind, EmbeddingVector};

const MAGIC: &[u8; 4] = b"LSVI";
const VERSION: u32 = 1;

fn kind_code(kind: EmbedderKind) -> u8 {
    match kind {
        EmbedderKind::OfflineHash => 0,
        EmbedderKind::Remote => 1,
        EmbedderKind::External => 2,
    }
}

fn node_code(kind: NodeKind) -> u8 {
    match kind {
        NodeKind::Column => 0,
        NodeKind::Table => 1,
        NodeKind::Category => 2,
    }
}

pub(super) fn encode(index: &VectorIndex) -> Vec<u8> {
    let d = index.descriptor();
    let mut buf = Vec::with_capacity(64 + index.len() * (index.dim() * 4 + 48));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(d.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(d.name.len() as u32).to_le_bytes());
    buf.extend_from_slice(d.name.as_bytes());
    buf.push(kind_code(d.kind));
    buf.extend_from_slice(&d.version.to_le_bytes());
    for e in index.entries() {
        buf.extend_from_slice(&(e.node_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.node_id.as_bytes());
        buf.push(node_code(e.node_kind));
        buf.push(u8::from(e.visible_in_search));
        for v in e.vector.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub(super) fn save(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    let bytes = encode(index);
    let tmp = path.with_extension("tmp");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub(super) fn load(path: &Path) -> Result<VectorIndex, IndexError> {
    decode(&std::fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt("truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn string(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| corrupt("invalid utf-8"))
    }
}

fn corrupt(why: &str) -> IndexError {
    IndexError::CorruptFile(why.to_string())
}

pub(super) fn decode(bytes: &[u8]) -> Result<VectorIndex, IndexError> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(corrupt("truncated"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    let name = r.string()?;
    let kind = match r.u8()? {
        0 => EmbedderKind::OfflineHash,
        1 => EmbedderKind::Remote,
        2 => EmbedderKind::External,
        other => return Err(corrupt(&format!("unknown embedder kind {other}"))),
    };
    let descriptor_version = r.u32()?;
    let mut index = VectorIndex::new(EmbedderDescriptor {
        name,
        dim,
        kind,
        version: descriptor_version,
    });
    for _ in 0..count {
        let node_id = r.string()?;
        let node_kind = match r.u8()? {
            0 => NodeKind::Column,
            1 => NodeKind::Table,
            2 => NodeKind::Category,
            other => return Err(corrupt(&format!("unknown node kind {other}"))),
        };
        let visible_in_search = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(corrupt("bad visibility flag")),
        };
        let raw = r.take(dim * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if index.contains(&node_id) {
            return Err(corrupt("duplicate node id"));
        }
        index.upsert(IndexEntry {
            node_id,
            vector: EmbeddingVector::from_raw(values),
            node_kind,
            visible_in_search,
        })?;
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(index)
}
