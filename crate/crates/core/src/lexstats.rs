//! Token counting and weighted log-odds with an informative Dirichlet
//! prior, used to pick the seed words that distinguish the default-topic
//! corpus (persona pole) from the default-persona corpus (topic pole).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default pseudo-count for tokens absent from the prior corpora.
pub const PRIOR_FLOOR: f64 = 0.01;

/// Default z threshold for seed-word significance.
pub const Z_THRESHOLD: f64 = 1.96;

/// Lowercase, split on whitespace, and strip every character outside
/// [a-z0-9] within each piece: "Step-by-step Guide!" -> [stepbystep,
/// guide]. No stop-word removal; pole lists legitimately contain "i",
/// "the", "we".
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let token: String = piece
                .chars()
                .map(|c| c.to_ascii_lowercase())
                .filter(|c| c.is_ascii_alphanumeric())
                .collect();
            if token.is_empty() {
                None
            } else {
                Some(token)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub corpus_id: String,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl TokenCounts {
    pub fn from_counts(corpus_id: impl Into<String>, counts: BTreeMap<String, u64>) -> TokenCounts {
        let total = counts.values().sum();
        TokenCounts { corpus_id: corpus_id.into(), counts, total }
    }

    pub fn from_texts(corpus_id: impl Into<String>, texts: &[&str]) -> TokenCounts {
        let mut counts = BTreeMap::new();
        for text in texts {
            for token in tokenize(text) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        TokenCounts::from_counts(corpus_id, counts)
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }
}

/// Real-valued pseudo-counts summed over the prior corpora. Queries are
/// floored so every token in a comparison has positive alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    pub prior_id: String,
    pub counts: BTreeMap<String, f64>,
    pub floor: f64,
}

impl DirichletPrior {
    /// Uniform prior: alpha_w = mass for every queried token.
    pub fn uniform(mass: f64) -> DirichletPrior {
        DirichletPrior {
            prior_id: format!("uniform({mass})"),
            counts: BTreeMap::new(),
            floor: mass,
        }
    }

    pub fn alpha(&self, token: &str) -> f64 {
        self.counts.get(token).copied().unwrap_or(0.0).max(self.floor)
    }
}

/// Sum counts over the supplied prior corpora. The floor applies at query
/// time, so tokens outside every prior corpus get `floor`.
pub fn build_prior(corpora: &[&TokenCounts], floor: f64) -> Result<DirichletPrior> {
    if corpora.is_empty() {
        return Err(Error::EmptyInput("prior corpus list".into()));
    }
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    let mut ids = Vec::new();
    for corpus in corpora {
        ids.push(corpus.corpus_id.as_str());
        for (token, count) in &corpus.counts {
            *counts.entry(token.clone()).or_insert(0.0) += *count as f64;
        }
    }
    Ok(DirichletPrior { prior_id: format!("sum({})", ids.join("+")), counts, floor })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    pub delta: f64,
    pub variance: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsResult {
    pub corpus_a: String,
    pub corpus_b: String,
    pub prior_id: String,
    /// One score per token of vocab(a) + vocab(b), in token order.
    pub scores: Vec<TokenScore>,
}

/// Weighted log-odds of corpus a against corpus b under an informative
/// Dirichlet prior. Positive z means the token leans toward a.
pub fn weighted_log_odds(
    a: &TokenCounts,
    b: &TokenCounts,
    prior: &DirichletPrior,
) -> Result<LogOddsResult> {
    if a.total == 0 {
        return Err(Error::EmptyInput(format!("corpus {} has zero tokens", a.corpus_id)));
    }
    if b.total == 0 {
        return Err(Error::EmptyInput(format!("corpus {} has zero tokens", b.corpus_id)));
    }
    let vocab: BTreeSet<&str> = a
        .counts
        .keys()
        .map(String::as_str)
        .chain(b.counts.keys().map(String::as_str))
        .collect();
    let alpha0: f64 = vocab.iter().map(|w| prior.alpha(w)).sum();
    let n_a = a.total as f64;
    let n_b = b.total as f64;

    let mut scores = Vec::with_capacity(vocab.len());
    for token in vocab {
        let alpha_w = prior.alpha(token);
        let y_a = a.get(token) as f64;
        let y_b = b.get(token) as f64;
        let num_a = y_a + alpha_w;
        let num_b = y_b + alpha_w;
        let den_a = n_a + alpha0 - y_a - alpha_w;
        let den_b = n_b + alpha0 - y_b - alpha_w;
        if num_a <= 0.0 || num_b <= 0.0 || den_a <= 0.0 || den_b <= 0.0 {
            return Err(Error::Internal(format!(
                "non-positive log-odds operand for token {token} (degenerate vocabulary)"
            )));
        }
        let delta = (num_a / den_a).ln() - (num_b / den_b).ln();
        let variance = 1.0 / num_a + 1.0 / num_b;
        let z = delta / variance.sqrt();
        scores.push(TokenScore { token: token.to_string(), delta, variance, z });
    }
    Ok(LogOddsResult {
        corpus_a: a.corpus_id.clone(),
        corpus_b: b.corpus_id.clone(),
        prior_id: prior.prior_id.clone(),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedWord {
    pub token: String,
    /// |z| of the token (topic-pole words score negative in the raw
    /// comparison but are stored unsigned).
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedWordSets {
    /// W_p, ordered by descending |z| (ties lexicographic).
    pub persona_pole: Vec<SeedWord>,
    /// W_t, same ordering.
    pub topic_pole: Vec<SeedWord>,
    pub corpus_a: String,
    pub corpus_b: String,
    pub fallback_used: bool,
}

fn sorted_pool<'a>(
    scores: &'a [TokenScore],
    keep: impl Fn(&TokenScore) -> bool,
) -> Vec<&'a TokenScore> {
    let mut pool: Vec<&TokenScore> = scores.iter().filter(|s| keep(s)).collect();
    pool.sort_by(|x, y| {
        y.z.abs()
            .partial_cmp(&x.z.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.token.cmp(&y.token))
    });
    pool
}

/// Split significant tokens into the persona pole (z > threshold) and the
/// topic pole (z < -threshold). A side with fewer than 3 survivors falls
/// back to its top 10 tokens by |z|, never crossing sign; zero-z tokens
/// pad in lexicographic order, persona side choosing first so the poles
/// stay disjoint.
pub fn select_seed_words(result: &LogOddsResult, z_threshold: f64) -> Result<SeedWordSets> {
    if result.scores.is_empty() {
        return Err(Error::EmptyInput("log-odds vocabulary".into()));
    }
    let positive = sorted_pool(&result.scores, |s| s.z > 0.0);
    let negative = sorted_pool(&result.scores, |s| s.z < 0.0);
    let zeros = sorted_pool(&result.scores, |s| s.z == 0.0);

    let significant_p: Vec<&TokenScore> =
        positive.iter().copied().take_while(|s| s.z > z_threshold).collect();
    let significant_t: Vec<&TokenScore> =
        negative.iter().copied().take_while(|s| -s.z > z_threshold).collect();

    let mut fallback_used = false;
    let persona_side: Vec<&TokenScore> = if significant_p.len() >= 3 {
        significant_p
    } else {
        fallback_used = true;
        let mut side: Vec<&TokenScore> = positive.iter().copied().take(10).collect();
        side.extend(zeros.iter().copied().take(10 - side.len().min(10)));
        side
    };
    let taken: BTreeSet<&str> = persona_side.iter().map(|s| s.token.as_str()).collect();
    let topic_side: Vec<&TokenScore> = if significant_t.len() >= 3 {
        significant_t
    } else {
        fallback_used = true;
        let mut side: Vec<&TokenScore> = negative.iter().copied().take(10).collect();
        side.extend(
            zeros
                .iter()
                .copied()
                .filter(|s| !taken.contains(s.token.as_str()))
                .take(10 - side.len().min(10)),
        );
        side
    };

    if persona_side.is_empty() {
        return Err(Error::EmptyInput("no tokens available for the persona pole".into()));
    }
    if topic_side.is_empty() {
        return Err(Error::EmptyInput("no tokens available for the topic pole".into()));
    }

    let to_words = |side: Vec<&TokenScore>| {
        side.into_iter()
            .map(|s| SeedWord { token: s.token.clone(), z: s.z.abs() })
            .collect::<Vec<_>>()
    };
    Ok(SeedWordSets {
        persona_pole: to_words(persona_side),
        topic_pole: to_words(topic_side),
        corpus_a: result.corpus_a.clone(),
        corpus_b: result.corpus_b.clone(),
        fallback_used,
    })
}
