//! Binary embedding tables (`SMOS` files).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SMOS" | version: u32 = 1 | ptm_id: u16 len + UTF-8 | dim: u32 | count: u32
//! count × ( clip_id: u16 len + UTF-8 | dim × f32 )
//! ```

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::bytes::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"SMOS";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub clip_id: String,
    pub vector: Vec<f32>,
}

/// Per-PTM map from clip id to a fixed-length pooled embedding, in manifest order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    ptm_id: String,
    dim: usize,
    records: Vec<EmbeddingRecord>,
    index: HashMap<String, usize>,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.ptm_id == other.ptm_id
            && self.dim == other.dim
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.clip_id == b.clip_id
                    && a.vector.iter().map(|v| v.to_bits()).eq(b.vector.iter().map(|v| v.to_bits()))
            })
    }
}

impl EmbeddingTable {
    pub fn new(ptm_id: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        Ok(Self {
            ptm_id: ptm_id.into(),
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn from_records(ptm_id: impl Into<String>, dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut table = Self::new(ptm_id, dim)?;
        for r in records {
            table.push(r.clip_id, r.vector)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, clip_id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let clip_id = clip_id.into();
        if vector.len() != self.dim {
            return Err(Error::dim("embedding table", "dim", self.dim, vector.len()));
        }
        if self.index.contains_key(&clip_id) {
            return Err(Error::Data(format!("duplicate clip id `{clip_id}` in table `{}`", self.ptm_id)));
        }
        self.index.insert(clip_id.clone(), self.records.len());
        self.records.push(EmbeddingRecord { clip_id, vector });
        Ok(())
    }

    pub fn ptm_id(&self) -> &str {
        &self.ptm_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, clip_id: &str) -> Option<&[f32]> {
        self.index.get(clip_id).map(|&i| self.records[i].vector.as_slice())
    }

    /// The vector for `clip_id`, promoted to `f64`.
    pub fn get_f64(&self, clip_id: &str) -> Result<Vec<f64>> {
        self.get(clip_id)
            .map(|v| v.iter().map(|&x| f64::from(x)).collect())
            .ok_or_else(|| Error::MissingEmbedding {
                clip: clip_id.to_owned(),
                table: self.ptm_id.clone(),
            })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::default();
        w.bytes(&EMBEDDING_MAGIC);
        w.u32(EMBEDDING_VERSION);
        w.str16(&self.ptm_id)?;
        w.u32(to_u32(self.dim, "dim")?);
        w.u32(to_u32(self.records.len(), "count")?);
        for r in &self.records {
            w.str16(&r.clip_id)?;
            for &v in &r.vector {
                w.f32(v);
            }
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let header = read_header(&mut r)?;
        let mut table = Self::new(header.ptm_id, header.dim)?;
        table.records.reserve(header.count);
        let mut seen = HashSet::with_capacity(header.count);
        for _ in 0..header.count {
            let at = r.offset();
            let clip_id = r.str16("clip_id")?;
            if !seen.insert(clip_id.clone()) {
                return Err(Error::Corruption {
                    offset: at,
                    msg: format!("duplicate clip id `{clip_id}`"),
                });
            }
            let mut vector = Vec::with_capacity(header.dim);
            for _ in 0..header.dim {
                vector.push(r.f32("embedding value")?);
            }
            table.index.insert(clip_id.clone(), table.records.len());
            table.records.push(EmbeddingRecord { clip_id, vector });
        }
        if r.remaining() != 0 {
            return Err(Error::Corruption {
                offset: r.offset(),
                msg: format!(
                    "{} trailing bytes after {} records of dim {}",
                    r.remaining(),
                    header.count,
                    header.dim
                ),
            });
        }
        Ok(table)
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit in u32")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingHeader {
    pub version: u32,
    pub ptm_id: String,
    pub dim: usize,
    pub count: usize,
}

fn read_header(r: &mut ByteReader<'_>) -> Result<EmbeddingHeader> {
    let magic = r.take(4, "magic")?;
    if magic != EMBEDDING_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"SMOS\"")));
    }
    let version = r.u32("version")?;
    if version != EMBEDDING_VERSION {
        return Err(Error::Format(format!("unsupported embedding file version {version}")));
    }
    let ptm_id = r.str16("ptm_id")?;
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(Error::Corruption {
            offset: r.offset() - 4,
            msg: "header dim is 0".into(),
        });
    }
    let count = r.u32("count")? as usize;
    Ok(EmbeddingHeader {
        version,
        ptm_id,
        dim,
        count,
    })
}

/// Parses only the header of an embedding file.
pub fn read_embedding_header(bytes: &[u8]) -> Result<EmbeddingHeader> {
    read_header(&mut ByteReader::new(bytes))
}

pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = table.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::from_bytes(&bytes)
}
