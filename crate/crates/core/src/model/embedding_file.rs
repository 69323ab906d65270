//! Precomputed per-token context vectors.
//!
//! Layout, little endian: magic `GZEMB\0\0\1`, `u32` row width, `u32` document
//! count, then per document a `u32` id length, the UTF-8 id, a `u32` row count
//! and `rows × width` `f64` values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::tensor::Mat;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GZEMB\0\0\x01";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    pub dim: usize,
    docs: BTreeMap<String, Mat>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore { dim, docs: BTreeMap::new() }
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, rows: Mat) -> Result<()> {
        if rows.cols != self.dim {
            return Err(Error::Shape(format!("embedding rows have width {}, store expects {}", rows.cols, self.dim)));
        }
        self.docs.insert(doc_id.into(), rows);
        Ok(())
    }

    pub fn row(&self, doc_id: &str, token: usize) -> Result<&[f64]> {
        match self.docs.get(doc_id) {
            Some(m) if token < m.rows => Ok(m.row(token)),
            _ => Err(Error::MissingEmbedding { doc_id: doc_id.to_string(), token }),
        }
    }

    pub fn lookup(&self, doc_id: &str, tokens: &[usize]) -> Result<Mat> {
        let mut out = Mat::zeros(tokens.len(), self.dim);
        for (i, &t) in tokens.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(doc_id, t)?);
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.docs.len() as u32).to_le_bytes());
        for (id, m) in &self.docs {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(m.rows as u32).to_le_bytes());
            for v in &m.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not an embedding file".into()));
        }
        let dim = read_u32(&mut bytes)? as usize;
        let n_docs = read_u32(&mut bytes)?;
        let mut store = EmbeddingStore::new(dim);
        for _ in 0..n_docs {
            let len = read_u32(&mut bytes)? as usize;
            let mut id = vec![0u8; len];
            read_exact(&mut bytes, &mut id)?;
            let id = String::from_utf8(id).map_err(|e| Error::Parse(format!("embedding doc id: {e}")))?;
            let rows = read_u32(&mut bytes)? as usize;
            let mut data = Vec::with_capacity(rows * dim);
            for _ in 0..rows * dim {
                let mut b = [0u8; 8];
                read_exact(&mut bytes, &mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            store.docs.insert(id, Mat::from_vec(rows, dim, data));
        }
        if !bytes.is_empty() {
            return Err(Error::Parse("trailing bytes in embedding file".into()));
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Parse("truncated embedding file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_lookup() {
        let mut s = EmbeddingStore::new(2);
        s.insert("d1", Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        s.insert("d2", Mat::from_rows(&[vec![-1.5, 0.25]])).unwrap();
        let back = EmbeddingStore::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.lookup("d1", &[1, 0]).unwrap().data, vec![3.0, 4.0, 1.0, 2.0]);
        assert!(matches!(back.row("d1", 2), Err(Error::MissingEmbedding { .. })));
        assert!(matches!(back.row("zz", 0), Err(Error::MissingEmbedding { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = EmbeddingStore::new(3);
        assert!(s.insert("d", Mat::zeros(1, 2)).is_err());
        assert!(EmbeddingStore::from_bytes(b"nope").is_err());
        let mut bytes = EmbeddingStore::new(1).to_bytes();
        bytes.push(0);
        assert!(EmbeddingStore::from_bytes(&bytes).is_err());
    }
}
