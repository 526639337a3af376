//! Unit-normalized contextualized embeddings for documents and sentences,
//! behind a pluggable embedder with a persistent vector cache.

pub mod cache;
pub mod pseudo;
pub mod sentence;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::harness::OutputCorpus;
use crate::vecmath;

pub use cache::VectorCache;
pub use pseudo::PseudoEmbedder;
pub use sentence::split_sentences;

/// Texts per upstream embedding request.
pub const EMBED_BATCH: usize = 64;

/// Source of raw (not yet normalized) embedding vectors. Implementations
/// must return one vector per input text, all of one dimension, and be
/// safe to call from several threads.
pub trait Embedder: Sync {
    fn embedder_id(&self) -> &str;
    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>>;
}

/// One sentence of one record, with its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEntry {
    pub record_index: u32,
    pub text: String,
    pub vector: Vec<f32>,
}

/// All vectors for one corpus: a unit-normalized document vector per
/// record plus unit-normalized vectors for every sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedCorpus {
    pub scenario_id: String,
    pub embedder_id: String,
    pub dim: usize,
    pub doc_vectors: Vec<Vec<f32>>,
    pub sentences: Vec<SentenceEntry>,
}

impl EmbeddedCorpus {
    pub fn n_docs(&self) -> usize {
        self.doc_vectors.len()
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.doc_vectors.iter().chain(self.sentences.iter().map(|s| &s.vector)) {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
            }
            let norm = vecmath::norm_f32(v);
            if (norm - 1.0).abs() >= 1e-6 {
                return Err(Error::Embedder(format!(
                    "{}: vector norm {norm} outside 1 +/- 1e-6",
                    self.scenario_id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Internal(format!("embedded corpus serialization: {e}")))?;
        fsutil::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<EmbeddedCorpus> {
        let bytes = std::fs::read(path)?;
        let corpus: EmbeddedCorpus = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        corpus.validate()?;
        Ok(corpus)
    }
}

fn check_dim(expected: &mut Option<usize>, found: usize, what: &str) -> Result<()> {
    match expected {
        Some(d) if *d != found => Err(Error::Embedder(format!(
            "dimension drift: {what} has dim {found}, expected {d}"
        ))),
        Some(_) => Ok(()),
        None => {
            *expected = Some(found);
            Ok(())
        }
    }
}

/// Embed texts, serving repeats and cache hits without upstream calls.
/// Returned vectors are L2-normalized; embedding the same text twice under
/// one embedder_id yields bitwise-equal vectors.
pub fn embed_texts(
    texts: &[&str],
    embedder: &dyn Embedder,
    cache: Option<&VectorCache>,
) -> Result<Vec<Vec<f32>>> {
    for (i, t) in texts.iter().enumerate() {
        if t.trim().is_empty() {
            return Err(Error::EmptyInput(format!("text {i} is empty")));
        }
    }
    let embedder_id = embedder.embedder_id().to_string();

    // Dedupe, preserving first-seen order and the first input position of
    // each unique text (used to pinpoint failures).
    let mut order: Vec<&str> = Vec::new();
    let mut first_pos: Vec<usize> = Vec::new();
    let mut unique_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in texts.iter().enumerate() {
        unique_index.entry(t).or_insert_with(|| {
            order.push(t);
            first_pos.push(i);
            order.len() - 1
        });
    }

    let mut vectors: Vec<Option<Vec<f32>>> = vec![None; order.len()];
    let mut dim: Option<usize> = None;
    if let Some(cache) = cache {
        for (u, t) in order.iter().enumerate() {
            if let Some(v) = cache.get(&embedder_id, t) {
                check_dim(&mut dim, v.len(), "cached vector")?;
                vectors[u] = Some(v);
            }
        }
    }

    let missing: Vec<usize> = (0..order.len()).filter(|u| vectors[*u].is_none()).collect();
    for chunk in missing.chunks(EMBED_BATCH) {
        let chunk_texts: Vec<&str> = chunk.iter().map(|u| order[*u]).collect();
        let raws = match embedder.embed_raw(&chunk_texts) {
            Ok(raws) => raws,
            Err(batch_err) => {
                // Re-try singly so the error names one text.
                for (k, t) in chunk_texts.iter().enumerate() {
                    if embedder.embed_raw(&[t]).is_err() {
                        return Err(Error::Embedder(format!(
                            "text {}: {batch_err}",
                            first_pos[chunk[k]]
                        )));
                    }
                }
                return Err(batch_err);
            }
        };
        if raws.len() != chunk_texts.len() {
            return Err(Error::Embedder(format!(
                "embedder returned {} vectors for {} texts",
                raws.len(),
                chunk_texts.len()
            )));
        }
        for (k, raw) in raws.into_iter().enumerate() {
            let u = chunk[k];
            check_dim(&mut dim, raw.len(), &format!("vector for text {}", first_pos[u]))?;
            if vecmath::norm_f32(&raw) == 0.0 {
                return Err(Error::Embedder(format!(
                    "zero vector for text {}",
                    first_pos[u]
                )));
            }
            let normalized = vecmath::normalize_to_f32(&raw);
            if let Some(cache) = cache {
                cache.put(&embedder_id, order[u], &normalized)?;
                // Serve what the cache holds so concurrent writers of the
                // same key converge on identical bytes.
                if let Some(stored) = cache.get(&embedder_id, order[u]) {
                    vectors[u] = Some(stored);
                    continue;
                }
            }
            vectors[u] = Some(normalized);
        }
    }

    Ok(texts
        .iter()
        .map(|t| {
            vectors[unique_index[t]]
                .clone()
                .expect("every unique text embedded")
        })
        .collect())
}

/// Embed every record text and every sentence of a complete corpus.
pub fn embed_corpus(
    corpus: &OutputCorpus,
    embedder: &dyn Embedder,
    cache: Option<&VectorCache>,
) -> Result<EmbeddedCorpus> {
    corpus.validate()?;
    let scenario_id = &corpus.scenario.scenario_id;

    let doc_texts = corpus.texts();
    let doc_vectors = embed_texts(&doc_texts, embedder, cache).map_err(|e| {
        Error::Embedder(format!("{scenario_id} documents: {e}"))
    })?;

    let mut sentence_meta: Vec<(u32, String)> = Vec::new();
    for (i, record) in corpus.records.iter().enumerate() {
        for sentence in split_sentences(&record.text) {
            sentence_meta.push((i as u32, sentence));
        }
    }
    let sentence_texts: Vec<&str> = sentence_meta.iter().map(|(_, s)| s.as_str()).collect();
    let sentence_vectors = embed_texts(&sentence_texts, embedder, cache).map_err(|e| {
        Error::Embedder(format!("{scenario_id} sentences: {e}"))
    })?;

    let dim = doc_vectors.first().map(|v| v.len()).unwrap_or(0);
    let sentences = sentence_meta
        .into_iter()
        .zip(sentence_vectors)
        .map(|((record_index, text), vector)| SentenceEntry { record_index, text, vector })
        .collect();
    let embedded = EmbeddedCorpus {
        scenario_id: scenario_id.clone(),
        embedder_id: embedder.embedder_id().to_string(),
        dim,
        doc_vectors,
        sentences,
    };
    embedded.validate()?;
    Ok(embedded)
}
