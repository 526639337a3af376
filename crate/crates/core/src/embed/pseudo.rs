//! Deterministic hash-bucket embedder for hermetic tests. Texts sharing
//! vocabulary land in shared buckets and get high cosine similarity, so
//! fixtures can control cluster structure without any model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::Embedder;
use crate::error::{Error, Result};

/// FNV-1a 64-bit hash; stable across platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub struct PseudoEmbedder {
    dim: usize,
    seed: u64,
    id: String,
}

impl PseudoEmbedder {
    pub fn new(dim: usize, seed: u64) -> PseudoEmbedder {
        PseudoEmbedder { dim, seed, id: format!("pseudo:dim={dim},seed={seed}") }
    }

    /// Parse an embedder spec like "pseudo:dim=64,seed=7". A bare
    /// "pseudo" takes dim 64, seed 7. Returns None for other families.
    pub fn from_spec(spec: &str) -> Option<Result<PseudoEmbedder>> {
        let rest = if spec == "pseudo" {
            ""
        } else {
            spec.strip_prefix("pseudo:")?
        };
        let mut dim = 64usize;
        let mut seed = 7u64;
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let parsed = match part.split_once('=') {
                Some(("dim", v)) => v.parse::<usize>().map(|d| dim = d).map_err(|e| e.to_string()),
                Some(("seed", v)) => v.parse::<u64>().map(|s| seed = s).map_err(|e| e.to_string()),
                _ => Err(format!("unknown key in {part:?}")),
            };
            if let Err(msg) = parsed {
                return Some(Err(Error::Parse {
                    context: format!("embedder spec {spec:?}"),
                    message: msg,
                }));
            }
        }
        if dim == 0 {
            return Some(Err(Error::Parse {
                context: format!("embedder spec {spec:?}"),
                message: "dim must be positive".into(),
            }));
        }
        Some(Ok(PseudoEmbedder::new(dim, seed)))
    }

    fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f64; self.dim];
        for token in text.split_whitespace() {
            let bucket = (fnv1a64(token.as_bytes()) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        // Per-text perturbation of magnitude 1e-3 so distinct texts with
        // equal token multisets still separate slightly.
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(text.as_bytes()) ^ self.seed);
        let perturbation: Vec<f64> =
            (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = perturbation.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (slot, p) in v.iter_mut().zip(&perturbation) {
                *slot += p * 1e-3 / norm;
            }
        }
        v.into_iter().map(|x| x as f32).collect()
    }
}

impl Embedder for PseudoEmbedder {
    fn embedder_id(&self) -> &str {
        &self.id
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
