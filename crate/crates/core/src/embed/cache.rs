//! Content-addressed vector cache: little-endian f32 payloads keyed by
//! sha256(embedder_id, text), each with a JSON sidecar naming the
//! embedder and dimension.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    embedder_id: String,
    dim: usize,
}

pub struct VectorCache {
    root: PathBuf,
}

impl VectorCache {
    pub fn new(root: impl Into<PathBuf>) -> VectorCache {
        VectorCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key(embedder_id: &str, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(embedder_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn vec_path(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.vec"))
    }

    fn sidecar_path(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    /// Fetch the cached vector for (embedder_id, text), or None on a miss
    /// or an entry that fails its sidecar checks.
    pub fn get(&self, embedder_id: &str, text: &str) -> Option<Vec<f32>> {
        let key = Self::key(embedder_id, text);
        let sidecar: Sidecar =
            serde_json::from_slice(&fs::read(self.sidecar_path(&key)).ok()?).ok()?;
        if sidecar.embedder_id != embedder_id {
            return None;
        }
        let bytes = fs::read(self.vec_path(&key)).ok()?;
        if bytes.len() != sidecar.dim * 4 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    }

    /// Store a vector. The payload is published before its sidecar so a
    /// concurrent reader never sees a sidecar without bytes behind it.
    pub fn put(&self, embedder_id: &str, text: &str, vector: &[f32]) -> Result<()> {
        if vector.is_empty() {
            return Err(Error::Embedder("refusing to cache an empty vector".into()));
        }
        let key = Self::key(embedder_id, text);
        let mut bytes = Vec::with_capacity(vector.len() * 4);
        for value in vector {
            bytes.extend_from_slice(&value.to_le_bytes());
        }
        fsutil::publish_atomic(&self.vec_path(&key), &bytes)?;
        let sidecar = Sidecar { embedder_id: embedder_id.to_string(), dim: vector.len() };
        let sidecar_bytes = serde_json::to_vec(&sidecar)
            .map_err(|e| Error::Internal(format!("sidecar serialization failed: {e}")))?;
        fsutil::publish_atomic(&self.sidecar_path(&key), &sidecar_bytes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let cache = VectorCache::new(dir.path());
        let v = vec![0.25f32, -1.5, 3.0e-8, f32::MIN_POSITIVE];
        cache.put("e1", "some text", &v).unwrap();
        let got = cache.get("e1", "some text").unwrap();
        assert_eq!(v, got);
        for (a, b) in v.iter().zip(&got) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn keys_separate_embedders_and_texts() {
        let dir = tempfile::tempdir().unwrap();
        let cache = VectorCache::new(dir.path());
        cache.put("e1", "text", &[1.0]).unwrap();
        assert!(cache.get("e2", "text").is_none());
        assert!(cache.get("e1", "other").is_none());
        assert_ne!(VectorCache::key("e1", "text"), VectorCache::key("e2", "text"));
    }

    #[test]
    fn first_writer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = VectorCache::new(dir.path());
        cache.put("e1", "t", &[1.0, 2.0]).unwrap();
        cache.put("e1", "t", &[9.0, 9.0]).unwrap();
        assert_eq!(cache.get("e1", "t").unwrap(), vec![1.0, 2.0]);
    }
}
