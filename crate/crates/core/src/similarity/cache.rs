//! Content-addressed embedding cache.
//!
//! One file per text, named `<sha256 hex of text>.bin`: a little-endian `u32`
//! dimension followed by that many little-endian `f32` components. Writes go
//! to a temporary name and are renamed into place, so concurrent readers
//! never see a partial vector.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::provider::{EmbeddingError, EmbeddingProvider};
use crate::digest::sha256_hex;
use crate::{Error, Result};

pub struct EmbeddingCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(EmbeddingCache { dir })
    }

    pub fn path_for(&self, text: &str) -> PathBuf {
        self.dir.join(format!("{}.bin", sha256_hex(text.as_bytes())))
    }

    pub fn get(&self, text: &str) -> Result<Option<Vec<f32>>> {
        let path = self.path_for(text);
        match fs::read(&path) {
            Ok(bytes) => decode(&bytes, &path).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn put(&self, text: &str, vector: &[f32]) -> Result<()> {
        let path = self.path_for(text);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            sha256_hex(text.as_bytes()),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, encode(vector)).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

pub fn encode(vector: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * vector.len());
    out.extend_from_slice(&(vector.len() as u32).to_le_bytes());
    for x in vector {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], path: &Path) -> Result<Vec<f32>> {
    let bad = |reason: &str| Error::Ingest {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let header: [u8; 4] = bytes
        .get(..4)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| bad("short header"))?;
    let dim = u32::from_le_bytes(header) as usize;
    if bytes.len() != 4 + 4 * dim {
        return Err(bad("length does not match dimension header"));
    }
    Ok(bytes[4..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Serves embeddings from the cache and fills it from `inner` on a miss.
pub struct CachedProvider<P> {
    inner: P,
    cache: EmbeddingCache,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: EmbeddingCache) -> Self {
        CachedProvider { inner, cache }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> std::result::Result<Vec<f32>, EmbeddingError> {
        if let Ok(Some(v)) = self.cache.get(text) {
            if v.len() == self.inner.dimension() {
                return Ok(v);
            }
        }
        let v = self.inner.embed(text)?;
        if v.len() == self.inner.dimension() {
            // A failed cache write only costs a refetch later.
            let _ = self.cache.put(text, &v);
        }
        Ok(v)
    }
}
