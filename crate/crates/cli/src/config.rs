//! Project configuration: one TOML file naming the registry, the artifact
//! directory, backends, and seeds. Relative paths resolve against the
//! config file's own directory so a project is relocatable.

use std::path::{Path, PathBuf};

use caricheck_core::{ClassifierSpec, Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorScope {
    /// Prior counts from every registered corpus on disk whose persona or
    /// topic matches the compared pair (or is the default).
    Matching,
    /// Prior counts from the two compared corpora only.
    Pair,
}

impl PriorScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            PriorScope::Matching => "matching",
            PriorScope::Pair => "pair",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    registry: String,
    project_dir: Option<String>,
    embedder: Option<String>,
    seed: Option<u64>,
    jobs: Option<usize>,
    prior_scope: Option<String>,
    generation: Option<RawGeneration>,
    embedding: Option<RawEmbedding>,
    classifier: Option<RawClassifier>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeneration {
    endpoint: String,
    auth_env: Option<String>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
    retries: Option<u32>,
    backoff_ms: Option<u64>,
    concurrency: Option<usize>,
    timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbedding {
    endpoint: String,
    auth_env: Option<String>,
    retries: Option<u32>,
    backoff_ms: Option<u64>,
    timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClassifier {
    kind: Option<String>,
    n_trees: Option<usize>,
    l2: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub auth_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone)]
pub struct EmbeddingConfig {
    pub endpoint: String,
    pub auth_env: Option<String>,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub registry_path: PathBuf,
    pub project_dir: PathBuf,
    pub embedder_spec: String,
    pub seed: u64,
    pub jobs: usize,
    pub prior_scope: PriorScope,
    pub generation: Option<GenerationConfig>,
    pub embedding: Option<EmbeddingConfig>,
    pub classifier: ClassifierSpec,
}

fn config_error(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Parse { context: path.display().to_string(), message: message.to_string() }
}

fn classifier_from_raw(path: &Path, raw: Option<&RawClassifier>) -> Result<ClassifierSpec> {
    let kind = raw.and_then(|c| c.kind.as_deref()).unwrap_or("random_forest");
    match kind {
        "random_forest" | "forest" => Ok(ClassifierSpec::RandomForest {
            n_trees: raw.and_then(|c| c.n_trees).unwrap_or(100),
        }),
        "logistic" => {
            let ClassifierSpec::Logistic { l2, max_iters, tol } =
                ClassifierSpec::logistic_default()
            else {
                unreachable!("logistic_default returns Logistic")
            };
            Ok(ClassifierSpec::Logistic {
                l2: raw.and_then(|c| c.l2).unwrap_or(l2),
                max_iters: raw.and_then(|c| c.max_iters).unwrap_or(max_iters),
                tol: raw.and_then(|c| c.tol).unwrap_or(tol),
            })
        }
        other => Err(config_error(path, format!("unknown classifier kind: {other}"))),
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<ProjectConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(path, format!("cannot read config: {e}")))?;
        let raw: RawConfig =
            toml::from_str(&text).map_err(|e| config_error(path, e.message()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

        let registry_path = base.join(&raw.registry);
        if !registry_path.exists() {
            return Err(config_error(
                path,
                format!("registry file does not exist: {}", registry_path.display()),
            ));
        }
        let prior_scope = match raw.prior_scope.as_deref() {
            None | Some("matching") => PriorScope::Matching,
            Some("pair") => PriorScope::Pair,
            Some(other) => {
                return Err(config_error(path, format!("unknown prior_scope: {other}")))
            }
        };
        let classifier = classifier_from_raw(path, raw.classifier.as_ref())?;
        let generation = raw.generation.map(|g| GenerationConfig {
            endpoint: g.endpoint,
            auth_env: g.auth_env,
            temperature: g.temperature.unwrap_or(1.0),
            max_tokens: g.max_tokens.unwrap_or(512),
            retries: g.retries.unwrap_or(3),
            backoff_ms: g.backoff_ms.unwrap_or(1000),
            concurrency: g.concurrency.unwrap_or(4),
            timeout_secs: g.timeout_secs.unwrap_or(60),
        });
        let embedding = raw.embedding.map(|e| EmbeddingConfig {
            endpoint: e.endpoint,
            auth_env: e.auth_env,
            retries: e.retries.unwrap_or(3),
            backoff_ms: e.backoff_ms.unwrap_or(1000),
            timeout_secs: e.timeout_secs.unwrap_or(60),
        });

        Ok(ProjectConfig {
            registry_path,
            project_dir: base.join(raw.project_dir.as_deref().unwrap_or(".")),
            embedder_spec: raw
                .embedder
                .unwrap_or_else(|| "pseudo:dim=64,seed=7".to_string()),
            seed: raw.seed.unwrap_or(17),
            jobs: raw.jobs.unwrap_or(1).max(1),
            prior_scope,
            generation,
            embedding,
            classifier,
        })
    }

    pub fn corpora_dir(&self) -> PathBuf {
        self.project_dir.join("corpora")
    }

    pub fn vectors_dir(&self) -> PathBuf {
        self.project_dir.join("vectors")
    }

    pub fn axes_dir(&self) -> PathBuf {
        self.project_dir.join("axes")
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.project_dir.join("scores")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.project_dir.join("reports")
    }

    pub fn generation_cache_dir(&self) -> PathBuf {
        self.project_dir.join("cache").join("generation")
    }

    pub fn vector_cache_dir(&self) -> PathBuf {
        self.project_dir.join("cache").join("vectors")
    }

    /// Switch classifier family from the --classifier flag, keeping the
    /// configured parameters when the family matches the config.
    pub fn classifier_override(&self, kind: &str) -> Result<ClassifierSpec> {
        match kind {
            "forest" | "random_forest" => Ok(match &self.classifier {
                spec @ ClassifierSpec::RandomForest { .. } => spec.clone(),
                _ => ClassifierSpec::default(),
            }),
            "logistic" => Ok(match &self.classifier {
                spec @ ClassifierSpec::Logistic { .. } => spec.clone(),
                _ => ClassifierSpec::logistic_default(),
            }),
            other => Err(Error::InvalidArgument(format!("unknown classifier kind: {other}"))),
        }
    }

    pub fn ensure_layout(&self) -> Result<()> {
        for dir in [
            self.corpora_dir(),
            self.vectors_dir(),
            self.axes_dir(),
            self.scores_dir(),
            self.reports_dir(),
            self.generation_cache_dir(),
            self.vector_cache_dir(),
        ] {
            std::fs::create_dir_all(&dir)?;
        }
        Ok(())
    }
}
