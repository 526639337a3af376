//! Persona-topic semantic axes. Seed words are embedded as the mean of
//! the sentences containing them across both default corpora; the axis is
//! the difference of the persona-pole and topic-pole means, validated by
//! leave-one-out cosine checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddedCorpus;
use crate::error::{Error, Result};
use crate::lexstats::{tokenize, SeedWordSets};
use crate::vecmath;

/// Axis norms below this are considered degenerate.
pub const AXIS_NORM_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordVector {
    pub token: String,
    /// Unit-normalized mean of supporting sentence embeddings.
    pub vector: Vec<f32>,
    /// Number of supporting sentences found.
    pub support: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticAxis {
    pub embedder_id: String,
    pub dim: usize,
    /// pole_p - pole_t, not normalized.
    pub axis: Vec<f64>,
    /// Unweighted mean of persona-pole word vectors, not re-normalized.
    pub pole_p: Vec<f64>,
    /// Unweighted mean of topic-pole word vectors, not re-normalized.
    pub pole_t: Vec<f64>,
    pub persona_words: Vec<WordVector>,
    pub topic_words: Vec<WordVector>,
    /// Seed tokens dropped for lack of any supporting sentence.
    pub dropped: Vec<String>,
    pub seed_sets: SeedWordSets,
}

impl SemanticAxis {
    pub fn axis_norm(&self) -> f64 {
        vecmath::norm_f64(&self.axis)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Internal(format!("serialize axis: {e}")))?;
        crate::fsutil::write_atomic(path, &bytes)
    }

    pub fn load(path: &std::path::Path) -> Result<SemanticAxis> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Token sets per sentence, precomputed once per corpus pair.
struct SentenceIndex<'a> {
    vectors: Vec<&'a [f32]>,
    token_sets: Vec<BTreeSet<String>>,
}

impl<'a> SentenceIndex<'a> {
    fn build(corpora: &[&'a EmbeddedCorpus]) -> SentenceIndex<'a> {
        let mut vectors = Vec::new();
        let mut token_sets = Vec::new();
        for corpus in corpora {
            for entry in &corpus.sentences {
                vectors.push(entry.vector.as_slice());
                token_sets.push(tokenize(&entry.text).into_iter().collect());
            }
        }
        SentenceIndex { vectors, token_sets }
    }

    fn supporting(&self, token: &str) -> Vec<&'a [f32]> {
        self.vectors
            .iter()
            .zip(&self.token_sets)
            .filter(|(_, set)| set.contains(token))
            .map(|(v, _)| *v)
            .collect()
    }
}

/// Embed one seed word: unit-normalized mean of the embeddings of every
/// sentence containing the token (by tokenizer match) in the supplied
/// corpora. Errors when no sentence supports the token.
pub fn embed_seed_word(token: &str, corpora: &[&EmbeddedCorpus]) -> Result<WordVector> {
    check_corpora(corpora)?;
    let index = SentenceIndex::build(corpora);
    word_vector_from_index(token, &index)
}

fn word_vector_from_index(token: &str, index: &SentenceIndex<'_>) -> Result<WordVector> {
    let support = index.supporting(token);
    if support.is_empty() {
        return Err(Error::MissingSupport { token: token.to_string() });
    }
    let mean = vecmath::mean_f32(&support)?;
    let quantized: Vec<f32> = mean.iter().map(|&v| v as f32).collect();
    let vector = vecmath::normalize_to_f32(&quantized);
    Ok(WordVector { token: token.to_string(), vector, support: support.len() as u32 })
}

fn check_corpora(corpora: &[&EmbeddedCorpus]) -> Result<()> {
    if corpora.is_empty() {
        return Err(Error::EmptyInput("corpus list for word embedding".into()));
    }
    let first = corpora[0];
    for corpus in &corpora[1..] {
        if corpus.embedder_id != first.embedder_id {
            return Err(Error::IncomparableCorpora {
                left: first.embedder_id.clone(),
                right: corpus.embedder_id.clone(),
            });
        }
        if corpus.dim != first.dim {
            return Err(Error::DimensionMismatch { expected: first.dim, found: corpus.dim });
        }
    }
    Ok(())
}

fn pole_mean(words: &[WordVector], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0f64; dim];
    for word in words {
        for (m, &v) in mean.iter_mut().zip(&word.vector) {
            *m += v as f64;
        }
    }
    let n = words.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Build the axis from seed-word sets over the two default corpora
/// (default-topic and default-persona cells of the target's family).
/// Tokens without sentence support are dropped and reported; a pole that
/// loses every word is an error, as is a near-zero axis.
pub fn build_axis(
    seed_sets: &SeedWordSets,
    default_topic: &EmbeddedCorpus,
    default_persona: &EmbeddedCorpus,
) -> Result<SemanticAxis> {
    let corpora = [default_topic, default_persona];
    check_corpora(&corpora)?;
    let index = SentenceIndex::build(&corpora);
    let dim = default_topic.dim;

    let mut dropped = Vec::new();
    let mut embed_pole = |tokens: &[crate::lexstats::SeedWord]| -> Vec<WordVector> {
        let mut words = Vec::new();
        for seed in tokens {
            match word_vector_from_index(&seed.token, &index) {
                Ok(word) => words.push(word),
                Err(Error::MissingSupport { token }) => dropped.push(token),
                Err(_) => unreachable!("word_vector_from_index only fails on support"),
            }
        }
        words
    };
    let persona_words = embed_pole(&seed_sets.persona_pole);
    let topic_words = embed_pole(&seed_sets.topic_pole);
    dropped.sort();

    if persona_words.is_empty() {
        return Err(Error::EmptyInput("persona pole has no embeddable words".into()));
    }
    if topic_words.is_empty() {
        return Err(Error::EmptyInput("topic pole has no embeddable words".into()));
    }

    let pole_p = pole_mean(&persona_words, dim);
    let pole_t = pole_mean(&topic_words, dim);
    let axis: Vec<f64> = pole_p.iter().zip(&pole_t).map(|(p, t)| p - t).collect();
    let norm = vecmath::norm_f64(&axis);
    if norm < AXIS_NORM_FLOOR {
        return Err(Error::AxisDegenerate { norm });
    }

    Ok(SemanticAxis {
        embedder_id: default_topic.embedder_id.clone(),
        dim,
        axis,
        pole_p,
        pole_t,
        persona_words,
        topic_words,
        dropped,
        seed_sets: seed_sets.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooEntry {
    pub token: String,
    /// Pole the word belongs to: "persona" or "topic".
    pub pole: String,
    pub cos_own: f64,
    pub cos_other: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<LooEntry>,
    /// Fraction of evaluated words passing; None when both poles skipped.
    pub pass_rate: Option<f64>,
    pub persona_pole_skipped: bool,
    pub topic_pole_skipped: bool,
}

fn loo_pole(
    words: &[WordVector],
    other_pole: &[f64],
    pole_name: &str,
    dim: usize,
    entries: &mut Vec<LooEntry>,
) {
    for (i, word) in words.iter().enumerate() {
        let rest: Vec<&WordVector> =
            words.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w).collect();
        let mut reduced = vec![0.0f64; dim];
        for w in &rest {
            for (m, &v) in reduced.iter_mut().zip(&w.vector) {
                *m += v as f64;
            }
        }
        let n = rest.len() as f64;
        for m in &mut reduced {
            *m /= n;
        }
        let cos_own = vecmath::cosine_mixed(&word.vector, &reduced);
        let cos_other = vecmath::cosine_mixed(&word.vector, other_pole);
        entries.push(LooEntry {
            token: word.token.clone(),
            pole: pole_name.to_string(),
            cos_own,
            cos_other,
            passed: cos_own > cos_other,
        });
    }
}

/// Leave-one-out validation: each pole word must be closer (cosine) to
/// its own pole recomputed without it than to the opposite pole. Poles
/// with fewer than 2 words are skipped rather than failed.
pub fn validate_axis_loo(axis: &SemanticAxis) -> ValidationReport {
    let mut entries = Vec::new();
    let persona_pole_skipped = axis.persona_words.len() < 2;
    let topic_pole_skipped = axis.topic_words.len() < 2;
    if !persona_pole_skipped {
        loo_pole(&axis.persona_words, &axis.pole_t, "persona", axis.dim, &mut entries);
    }
    if !topic_pole_skipped {
        loo_pole(&axis.topic_words, &axis.pole_p, "topic", axis.dim, &mut entries);
    }
    let pass_rate = if entries.is_empty() {
        None
    } else {
        Some(entries.iter().filter(|e| e.passed).count() as f64 / entries.len() as f64)
    };
    ValidationReport { entries, pass_rate, persona_pole_skipped, topic_pole_skipped }
}
