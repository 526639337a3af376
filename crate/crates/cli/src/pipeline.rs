//! Stage orchestration over a project directory. Every stage writes its
//! output under a name that encodes a fingerprint of the stage inputs, so
//! an artifact that exists under the expected name is fresh by
//! construction and is loaded instead of recomputed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use caricheck_core::{
    aggregate, build_axis, build_prior, embed_corpus, exaggeration_score, generate_corpus,
    individuation_score, ingest_corpus, per_doc_cosines, select_seed_words, validate_axis_loo,
    vmeasure_score, weighted_log_odds, wilson_interval, write_corpus_jsonl, AggregateRow,
    ClassifierSpec, ClusterScore, Dimension, Embedder, EmbeddedCorpus, Error, ExaggerationScore,
    GenOptions, GenerationCache, IndividuationScore, OutputCorpus, PseudoEmbedder, Result,
    SamplingParams, ScenarioRegistry, ScenarioSpec, SeedWordSets, SemanticAxis, TokenCounts,
    ValidationReport, VectorCache,
};
use caricheck_core::analysis::report::{write_csv, write_json, write_svg_data, SvgPoint};
use caricheck_core::fsutil;
use caricheck_remote::{EndpointConfig, HttpEmbedder, HttpTextGenerator};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PriorScope, ProjectConfig};

pub const SEED_Z_THRESHOLD: f64 = 1.96;
pub const GATE_Z: f64 = 1.96;
pub const PRIOR_FLOOR: f64 = 0.01;
pub const VMEASURE_K: usize = 2;

/// 12 hex chars of SHA-256 over newline-joined parts; the artifact
/// freshness key.
pub fn sha12(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())[..12].to_string()
}

fn file_sha12(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes))[..12].to_string())
}

/// How far down the stage sequence a subcommand goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageGoal {
    Generate,
    Embed,
    SeedWords,
    Axis,
    Individuate,
    Exaggerate,
}

#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub vmeasure: bool,
    pub per_doc: bool,
}

pub struct RunCtx {
    pub config: ProjectConfig,
    pub registry: ScenarioRegistry,
    pub classifier: ClassifierSpec,
    pub seed: u64,
    pub jobs: usize,
    embedder: Box<dyn Embedder + Send>,
    generator: Option<HttpTextGenerator>,
    gen_opts: GenOptions,
    gcache: GenerationCache,
    vcache: VectorCache,
}

impl RunCtx {
    pub fn new(config: ProjectConfig, registry: ScenarioRegistry) -> Result<RunCtx> {
        config.ensure_layout()?;
        let embedder = build_embedder(&config)?;
        let (generator, gen_opts) = match &config.generation {
            Some(gen) => {
                let mut endpoint = EndpointConfig::new(&gen.endpoint);
                endpoint.timeout_secs = gen.timeout_secs;
                if let Some(name) = &gen.auth_env {
                    endpoint = endpoint.with_auth_env(name);
                }
                let opts = GenOptions {
                    sampling: SamplingParams {
                        temperature: gen.temperature,
                        max_tokens: gen.max_tokens,
                    },
                    retries: gen.retries,
                    backoff_ms: gen.backoff_ms,
                    concurrency: gen.concurrency,
                };
                (Some(HttpTextGenerator::new(&endpoint)?), opts)
            }
            None => (None, GenOptions::default()),
        };
        let gcache = GenerationCache::new(config.generation_cache_dir());
        let vcache = VectorCache::new(config.vector_cache_dir());
        Ok(RunCtx {
            classifier: config.classifier.clone(),
            seed: config.seed,
            jobs: config.jobs,
            embedder,
            generator,
            gen_opts,
            gcache,
            vcache,
            config,
            registry,
        })
    }
}

fn build_embedder(config: &ProjectConfig) -> Result<Box<dyn Embedder + Send>> {
    let spec = config.embedder_spec.as_str();
    if let Some(parsed) = PseudoEmbedder::from_spec(spec) {
        return Ok(Box::new(parsed?));
    }
    if let Some(model) = spec.strip_prefix("http:") {
        let embedding = config.embedding.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "embedder {spec} needs an [embedding] endpoint in the config"
            ))
        })?;
        let mut endpoint = EndpointConfig::new(&embedding.endpoint);
        endpoint.timeout_secs = embedding.timeout_secs;
        if let Some(name) = &embedding.auth_env {
            endpoint = endpoint.with_auth_env(name);
        }
        let embedder = HttpEmbedder::new(&endpoint, model)?
            .with_retry(embedding.retries, embedding.backoff_ms);
        return Ok(Box::new(embedder));
    }
    Err(Error::InvalidArgument(format!("unknown embedder family: {spec}")))
}

/// Resolve --scenario/--persona/--topic/--context down to target cells.
#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub scenarios: Vec<String>,
    pub persona: Option<String>,
    pub topic: Option<String>,
    pub context: Option<String>,
}

pub fn select_targets<'r>(
    registry: &'r ScenarioRegistry,
    filter: &Filter,
) -> Result<Vec<&'r ScenarioSpec>> {
    let mut selected: Vec<&ScenarioSpec> = if filter.scenarios.is_empty() {
        registry.targets().collect()
    } else {
        let mut picked = Vec::new();
        for id in &filter.scenarios {
            let spec = registry
                .get(id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario id: {id}")))?;
            if !spec.is_target() {
                return Err(Error::InvalidArgument(format!(
                    "scenario {id} is a default cell, not a scoring target"
                )));
            }
            picked.push(spec);
        }
        picked
    };
    if let Some(persona) = &filter.persona {
        selected.retain(|s| s.persona.label() == Some(persona.as_str()));
    }
    if let Some(topic) = &filter.topic {
        selected.retain(|s| s.topic.label() == Some(topic.as_str()));
    }
    if let Some(context) = &filter.context {
        selected.retain(|s| s.context_id == *context);
    }
    if selected.is_empty() {
        return Err(Error::InvalidArgument("no scenarios match the given filter".into()));
    }
    Ok(selected)
}

/// One materialized corpus: its JSONL on disk plus, once embedded, the
/// saved vector artifact. Holds no vectors in memory; the analysis phase
/// reloads what it needs.
#[derive(Debug, Clone)]
pub struct CellHandle {
    pub spec: ScenarioSpec,
    pub corpus_path: PathBuf,
    pub corpus_sha: String,
    pub n_records: usize,
    pub vec_path: Option<PathBuf>,
    pub vec_fp: Option<String>,
    pub dim: usize,
    pub n_sentences: usize,
}

#[derive(Debug, Clone)]
pub struct Trio {
    pub target: CellHandle,
    pub default_persona: CellHandle,
    pub default_topic: CellHandle,
}

fn corpus_path(ctx: &RunCtx, scenario_id: &str) -> PathBuf {
    ctx.config.corpora_dir().join(format!("{scenario_id}.jsonl"))
}

/// Load the corpus from disk, or generate and persist it when an
/// endpoint is configured.
fn ensure_corpus(ctx: &RunCtx, spec: &ScenarioSpec) -> Result<(OutputCorpus, PathBuf, String)> {
    let path = corpus_path(ctx, &spec.scenario_id);
    let corpus = if path.exists() {
        ingest_corpus(&path, spec)?
    } else {
        let template = ctx.registry.template(&spec.context_id).ok_or_else(|| {
            Error::UnknownContext {
                scenario_id: spec.scenario_id.clone(),
                context_id: spec.context_id.clone(),
            }
        })?;
        match &ctx.generator {
            Some(generator) => {
                let corpus = generate_corpus(spec, template, generator, &ctx.gen_opts, &ctx.gcache)?;
                write_corpus_jsonl(&corpus, &path)?;
                corpus
            }
            None => {
                return Err(Error::Generation {
                    message: format!(
                        "scenario {}: no generation endpoint configured and {} is missing",
                        spec.scenario_id,
                        path.display()
                    ),
                    progress: 0,
                })
            }
        }
    };
    let sha = file_sha12(&path)?;
    Ok((corpus, path, sha))
}

fn materialize_cell(ctx: &RunCtx, spec: &ScenarioSpec, embed: bool) -> Result<CellHandle> {
    let (corpus, path, sha) = ensure_corpus(ctx, spec)?;
    let mut handle = CellHandle {
        spec: corpus.scenario.clone(),
        corpus_path: path,
        corpus_sha: sha,
        n_records: corpus.records.len(),
        vec_path: None,
        vec_fp: None,
        dim: 0,
        n_sentences: 0,
    };
    if !embed {
        return Ok(handle);
    }
    let fp = sha12(&["embed", ctx.embedder.embedder_id(), &handle.corpus_sha]);
    let vec_path = ctx
        .config
        .vectors_dir()
        .join(format!("{}__{}.json", handle.spec.scenario_id, fp));
    let embedded = match EmbeddedCorpus::load(&vec_path) {
        Ok(loaded) => loaded,
        Err(_) => {
            let fresh = embed_corpus(&corpus, ctx.embedder.as_ref(), Some(&ctx.vcache))?;
            fresh.save(&vec_path)?;
            fresh
        }
    };
    handle.dim = embedded.dim;
    handle.n_sentences = embedded.sentences.len();
    handle.vec_path = Some(vec_path);
    handle.vec_fp = Some(fp);
    Ok(handle)
}

fn materialize_trio(ctx: &RunCtx, target: &ScenarioSpec, embed: bool) -> Result<Trio> {
    let dp_spec = target.derive_default_persona()?;
    let dt_spec = target.derive_default_topic()?;
    Ok(Trio {
        target: materialize_cell(ctx, target, embed)?,
        default_persona: materialize_cell(ctx, &dp_spec, embed)?,
        default_topic: materialize_cell(ctx, &dt_spec, embed)?,
    })
}

// ---------------------------------------------------------------------------
// Persisted stage artifacts.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedWordsArtifact {
    pub scenario_id: String,
    pub seed_sets: SeedWordSets,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisArtifact {
    pub scenario_id: String,
    pub axis: SemanticAxis,
    pub loo: ValidationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndividuationArtifact {
    pub scenario_id: String,
    pub score: IndividuationScore,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// True when the Wilson 95% interval on test accuracy excludes 0.5.
    pub individuated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VmeasureArtifact {
    pub scenario_id: String,
    pub k: usize,
    pub score: ClusterScore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExaggerationArtifact {
    pub scenario_id: String,
    pub score: ExaggerationScore,
    /// False when the individuation gate failed; the score is still
    /// recorded but reported as not-applicable.
    pub applicable: bool,
}

fn save_artifact<T: Serialize>(path: &Path, artifact: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(artifact)
        .map_err(|e| Error::Internal(format!("artifact serialization failed: {e}")))?;
    bytes.push(b'\n');
    fsutil::write_atomic(path, &bytes)
}

fn load_artifact<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let bytes = fs::read(path).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Everything computed for one target, as far as the goal asked.
#[derive(Debug, Clone)]
pub struct TargetOutcome {
    pub trio: Trio,
    pub seed_sets: Option<SeedWordSets>,
    pub axis: Option<AxisArtifact>,
    pub individuation: Option<IndividuationArtifact>,
    pub vmeasure: Option<VmeasureArtifact>,
    pub exaggeration: Option<ExaggerationArtifact>,
    pub doc_cosines: Option<Vec<f64>>,
}

fn load_embedded(handle: &CellHandle) -> Result<EmbeddedCorpus> {
    let path = handle.vec_path.as_ref().ok_or_else(|| {
        Error::Internal(format!("{}: analysis before embedding", handle.spec.scenario_id))
    })?;
    EmbeddedCorpus::load(path)
}

fn token_counts_for(handle: &CellHandle) -> Result<TokenCounts> {
    let corpus = ingest_corpus(&handle.corpus_path, &handle.spec)?;
    Ok(TokenCounts::from_texts(handle.spec.scenario_id.clone(), &corpus.texts()))
}

/// Corpora feeding the Dirichlet prior beyond the compared pair: all
/// registered cells (targets plus their derivable defaults) in the same
/// context whose persona or topic matches the pair or is the default,
/// and whose corpus file already exists.
fn prior_pool(ctx: &RunCtx, target: &ScenarioSpec) -> Vec<(ScenarioSpec, PathBuf)> {
    let mut cells: BTreeMap<String, ScenarioSpec> = BTreeMap::new();
    for spec in &ctx.registry.scenarios {
        cells.insert(spec.scenario_id.clone(), spec.clone());
        if spec.is_target() {
            if let Ok(dp) = spec.derive_default_persona() {
                cells.insert(dp.scenario_id.clone(), dp);
            }
            if let Ok(dt) = spec.derive_default_topic() {
                cells.insert(dt.scenario_id.clone(), dt);
            }
        }
    }
    let persona = target.persona.label();
    let topic = target.topic.label();
    cells
        .into_values()
        .filter(|spec| spec.context_id == target.context_id)
        .filter(|spec| {
            let persona_matches = spec.persona.is_default() || spec.persona.label() == persona;
            let topic_matches = spec.topic.is_default() || spec.topic.label() == topic;
            persona_matches || topic_matches
        })
        .map(|spec| {
            let path = corpus_path(ctx, &spec.scenario_id);
            (spec, path)
        })
        .filter(|(_, path)| path.exists())
        .collect()
}

fn seed_words_stage(ctx: &RunCtx, trio: &Trio) -> Result<(SeedWordSets, String)> {
    let dt = &trio.default_topic;
    let dp = &trio.default_persona;
    let counts_dt = token_counts_for(dt)?;
    let counts_dp = token_counts_for(dp)?;

    let mut prior_ids: Vec<String> = Vec::new();
    let mut extra_counts: Vec<TokenCounts> = Vec::new();
    if ctx.config.prior_scope == PriorScope::Matching {
        for (spec, path) in prior_pool(ctx, &trio.target.spec) {
            if spec.scenario_id == dt.spec.scenario_id || spec.scenario_id == dp.spec.scenario_id {
                continue;
            }
            prior_ids.push(format!("{}:{}", spec.scenario_id, file_sha12(&path)?));
            extra_counts.push(token_counts_for(&CellHandle {
                spec: spec.clone(),
                corpus_path: path,
                corpus_sha: String::new(),
                n_records: 0,
                vec_path: None,
                vec_fp: None,
                dim: 0,
                n_sentences: 0,
            })?);
        }
    }

    let fp = {
        let mut parts: Vec<String> = vec![
            "seedwords".into(),
            format!("z={SEED_Z_THRESHOLD}"),
            format!("scope={}", ctx.config.prior_scope.as_str()),
            format!("compare={},{}", dt.corpus_sha, dp.corpus_sha),
        ];
        parts.extend(prior_ids.iter().cloned());
        let refs: Vec<&str> = parts.iter().map(|s| s.as_str()).collect();
        sha12(&refs)
    };
    let path = ctx
        .config
        .scores_dir()
        .join(format!("{}__seedwords__{}.json", trio.target.spec.scenario_id, fp));
    if let Some(artifact) = load_artifact::<SeedWordsArtifact>(&path) {
        return Ok((artifact.seed_sets, fp));
    }

    let mut prior_refs: Vec<&TokenCounts> = vec![&counts_dt, &counts_dp];
    prior_refs.extend(extra_counts.iter());
    let prior = build_prior(&prior_refs, PRIOR_FLOOR)?;
    let result = weighted_log_odds(&counts_dt, &counts_dp, &prior)?;
    let seed_sets = select_seed_words(&result, SEED_Z_THRESHOLD)?;
    save_artifact(
        &path,
        &SeedWordsArtifact {
            scenario_id: trio.target.spec.scenario_id.clone(),
            seed_sets: seed_sets.clone(),
        },
    )?;
    Ok((seed_sets, fp))
}

fn axis_stage(
    ctx: &RunCtx,
    trio: &Trio,
    seed_sets: &SeedWordSets,
    seeds_fp: &str,
) -> Result<(AxisArtifact, String)> {
    let dt_fp = trio.default_topic.vec_fp.as_deref().unwrap_or_default();
    let dp_fp = trio.default_persona.vec_fp.as_deref().unwrap_or_default();
    let fp = sha12(&["axis", dt_fp, dp_fp, seeds_fp]);
    let path = ctx
        .config
        .axes_dir()
        .join(format!("{}__axis__{}.json", trio.target.spec.scenario_id, fp));
    if let Some(artifact) = load_artifact::<AxisArtifact>(&path) {
        return Ok((artifact, fp));
    }
    let emb_dt = load_embedded(&trio.default_topic)?;
    let emb_dp = load_embedded(&trio.default_persona)?;
    let axis = build_axis(seed_sets, &emb_dt, &emb_dp)?;
    let loo = validate_axis_loo(&axis);
    let artifact = AxisArtifact {
        scenario_id: trio.target.spec.scenario_id.clone(),
        axis,
        loo,
    };
    save_artifact(&path, &artifact)?;
    Ok((artifact, fp))
}

fn individuation_stage(ctx: &RunCtx, trio: &Trio) -> Result<(IndividuationArtifact, String)> {
    let t_fp = trio.target.vec_fp.as_deref().unwrap_or_default();
    let dp_fp = trio.default_persona.vec_fp.as_deref().unwrap_or_default();
    let classifier_id = ctx.classifier.classifier_id();
    let fp = sha12(&[
        "individuation",
        t_fp,
        dp_fp,
        &classifier_id,
        &format!("seed={}", ctx.seed),
    ]);
    let path = ctx
        .config
        .scores_dir()
        .join(format!("{}__individuation__{}.json", trio.target.spec.scenario_id, fp));
    if let Some(artifact) = load_artifact::<IndividuationArtifact>(&path) {
        return Ok((artifact, fp));
    }
    let emb_t = load_embedded(&trio.target)?;
    let emb_dp = load_embedded(&trio.default_persona)?;
    let score = individuation_score(&emb_t, &emb_dp, &ctx.classifier, ctx.seed)?;
    let correct = (score.accuracy * score.n_test as f64).round() as u64;
    let (wilson_low, wilson_high) = wilson_interval(correct, score.n_test as u64, GATE_Z);
    let individuated = !(wilson_low <= 0.5 && 0.5 <= wilson_high);
    let artifact = IndividuationArtifact {
        scenario_id: trio.target.spec.scenario_id.clone(),
        score,
        wilson_low,
        wilson_high,
        individuated,
    };
    save_artifact(&path, &artifact)?;
    Ok((artifact, fp))
}

fn vmeasure_stage(ctx: &RunCtx, trio: &Trio) -> Result<VmeasureArtifact> {
    let t_fp = trio.target.vec_fp.as_deref().unwrap_or_default();
    let dp_fp = trio.default_persona.vec_fp.as_deref().unwrap_or_default();
    let fp = sha12(&[
        "vmeasure",
        t_fp,
        dp_fp,
        &format!("k={VMEASURE_K}"),
        &format!("seed={}", ctx.seed),
    ]);
    let path = ctx
        .config
        .scores_dir()
        .join(format!("{}__vmeasure__{}.json", trio.target.spec.scenario_id, fp));
    if let Some(artifact) = load_artifact::<VmeasureArtifact>(&path) {
        return Ok(artifact);
    }
    let emb_t = load_embedded(&trio.target)?;
    let emb_dp = load_embedded(&trio.default_persona)?;
    let score = vmeasure_score(&emb_t, &emb_dp, VMEASURE_K, ctx.seed)?;
    let artifact = VmeasureArtifact {
        scenario_id: trio.target.spec.scenario_id.clone(),
        k: VMEASURE_K,
        score,
    };
    save_artifact(&path, &artifact)?;
    Ok(artifact)
}

fn exaggeration_stage(
    ctx: &RunCtx,
    trio: &Trio,
    axis: &AxisArtifact,
    axis_fp: &str,
    indiv: &IndividuationArtifact,
    indiv_fp: &str,
) -> Result<ExaggerationArtifact> {
    let t_fp = trio.target.vec_fp.as_deref().unwrap_or_default();
    let dt_fp = trio.default_topic.vec_fp.as_deref().unwrap_or_default();
    let dp_fp = trio.default_persona.vec_fp.as_deref().unwrap_or_default();
    let fp = sha12(&["exaggeration", t_fp, dt_fp, dp_fp, axis_fp, indiv_fp]);
    let path = ctx
        .config
        .scores_dir()
        .join(format!("{}__exaggeration__{}.json", trio.target.spec.scenario_id, fp));
    if let Some(artifact) = load_artifact::<ExaggerationArtifact>(&path) {
        return Ok(artifact);
    }
    let emb_t = load_embedded(&trio.target)?;
    let emb_dp = load_embedded(&trio.default_persona)?;
    let emb_dt = load_embedded(&trio.default_topic)?;
    let score = exaggeration_score(&emb_t, &emb_dp, &emb_dt, &axis.axis)?;
    let artifact = ExaggerationArtifact {
        scenario_id: trio.target.spec.scenario_id.clone(),
        score,
        applicable: indiv.individuated,
    };
    save_artifact(&path, &artifact)?;
    Ok(artifact)
}

fn analyze_target(
    ctx: &RunCtx,
    trio: Trio,
    goal: StageGoal,
    flags: &RunFlags,
) -> Result<TargetOutcome> {
    let mut outcome = TargetOutcome {
        trio,
        seed_sets: None,
        axis: None,
        individuation: None,
        vmeasure: None,
        exaggeration: None,
        doc_cosines: None,
    };
    if goal < StageGoal::SeedWords {
        return Ok(outcome);
    }
    let (seed_sets, seeds_fp) = seed_words_stage(ctx, &outcome.trio)?;
    outcome.seed_sets = Some(seed_sets);
    if goal < StageGoal::Axis {
        return Ok(outcome);
    }
    let (axis, axis_fp) =
        axis_stage(ctx, &outcome.trio, outcome.seed_sets.as_ref().unwrap(), &seeds_fp)?;
    outcome.axis = Some(axis);
    if goal < StageGoal::Individuate {
        return Ok(outcome);
    }
    let (indiv, indiv_fp) = individuation_stage(ctx, &outcome.trio)?;
    outcome.individuation = Some(indiv);
    if flags.vmeasure {
        outcome.vmeasure = Some(vmeasure_stage(ctx, &outcome.trio)?);
    }
    if goal < StageGoal::Exaggerate {
        return Ok(outcome);
    }
    let exaggeration = exaggeration_stage(
        ctx,
        &outcome.trio,
        outcome.axis.as_ref().unwrap(),
        &axis_fp,
        outcome.individuation.as_ref().unwrap(),
        &indiv_fp,
    )?;
    outcome.exaggeration = Some(exaggeration);
    if flags.per_doc {
        let emb_t = load_embedded(&outcome.trio.target)?;
        outcome.doc_cosines =
            Some(per_doc_cosines(&emb_t, &outcome.axis.as_ref().unwrap().axis)?);
    }
    Ok(outcome)
}

/// Run `f` over the items with at most `jobs` threads, preserving order.
fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let slots: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<R>>> = slots.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..jobs.min(slots.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= slots.len() {
                    break;
                }
                let item = slots[i].lock().unwrap().take().expect("slot taken once");
                *results[i].lock().unwrap() = Some(f(item));
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.into_inner().unwrap().expect("worker filled slot"))
        .collect()
}

/// Materialize corpora (and vectors) for every selected target, then run
/// the analysis stages. The two phases are separated so the prior corpus
/// pool is stable before any seed-word computation reads it.
pub fn execute(
    ctx: &RunCtx,
    targets: &[&ScenarioSpec],
    goal: StageGoal,
    flags: &RunFlags,
) -> Vec<(ScenarioSpec, Result<TargetOutcome>)> {
    let embed = goal >= StageGoal::Embed;
    let specs: Vec<ScenarioSpec> = targets.iter().map(|s| (*s).clone()).collect();
    let trios = parallel_map(specs.clone(), ctx.jobs, |spec| {
        materialize_trio(ctx, &spec, embed)
    });
    if goal <= StageGoal::Embed {
        return specs
            .into_iter()
            .zip(trios)
            .map(|(spec, trio)| {
                (
                    spec,
                    trio.map(|trio| TargetOutcome {
                        trio,
                        seed_sets: None,
                        axis: None,
                        individuation: None,
                        vmeasure: None,
                        exaggeration: None,
                        doc_cosines: None,
                    }),
                )
            })
            .collect();
    }
    let analyzed = parallel_map(trios, ctx.jobs, |trio| match trio {
        Ok(trio) => analyze_target(ctx, trio, goal, flags),
        Err(err) => Err(err),
    });
    specs.into_iter().zip(analyzed).collect()
}

// ---------------------------------------------------------------------------
// Reports.

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario_id: String,
    pub persona: String,
    pub topic: String,
    pub context: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub individuation: Option<IndividuationArtifact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vmeasure: Option<VmeasureArtifact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exaggeration: Option<ExaggerationArtifact>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub embedder: String,
    pub classifier: String,
    pub seed: u64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub scenarios: Vec<ScenarioReport>,
    pub reports: Vec<String>,
}

pub fn scenario_report(
    spec: &ScenarioSpec,
    outcome: &Result<TargetOutcome>,
) -> ScenarioReport {
    let (status, error) = match outcome {
        Ok(_) => ("ok".to_string(), None),
        Err(err) => ("failed".to_string(), Some(err.to_string())),
    };
    let ok = outcome.as_ref().ok();
    ScenarioReport {
        scenario_id: spec.scenario_id.clone(),
        persona: spec.persona.label().unwrap_or("_").to_string(),
        topic: spec.topic.label().unwrap_or("_").to_string(),
        context: spec.context_id.clone(),
        status,
        error,
        individuation: ok.and_then(|o| o.individuation.clone()),
        vmeasure: ok.and_then(|o| o.vmeasure.clone()),
        exaggeration: ok.and_then(|o| o.exaggeration.clone()),
    }
}

/// Rows feeding one aggregate report: (scenario, score) pairs.
fn metric_rows<'a>(
    outcomes: &'a [(ScenarioSpec, Result<TargetOutcome>)],
    metric: &str,
) -> Vec<(&'a ScenarioSpec, f64)> {
    let mut rows = Vec::new();
    for (spec, outcome) in outcomes {
        let Ok(outcome) = outcome else { continue };
        match metric {
            "individuation" => {
                if let Some(indiv) = &outcome.individuation {
                    rows.push((spec, indiv.score.accuracy));
                }
            }
            "exaggeration" => {
                if let Some(ex) = &outcome.exaggeration {
                    if ex.applicable {
                        if let Some(normalized) = ex.score.normalized {
                            rows.push((spec, normalized));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    rows
}

pub const METRICS: [&str; 2] = ["individuation", "exaggeration"];
pub const DIMENSIONS: [Dimension; 4] =
    [Dimension::Persona, Dimension::Topic, Dimension::PersonaTopic, Dimension::Context];

/// Write one aggregate report (CSV + JSON); returns the file stems
/// written, empty when there is nothing to aggregate.
pub fn write_metric_report(
    ctx: &RunCtx,
    outcomes: &[(ScenarioSpec, Result<TargetOutcome>)],
    metric: &str,
    dimension: Dimension,
) -> Result<Vec<String>> {
    let rows = metric_rows(outcomes, metric);
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let aggregated: Vec<AggregateRow> = aggregate(&rows, dimension)?;
    let stem = format!("report_{metric}_{}", dimension.as_str());
    let dir = ctx.config.reports_dir();
    write_csv(&dir.join(format!("{stem}.csv")), &aggregated)?;
    write_json(&dir.join(format!("{stem}.json")), &aggregated)?;
    Ok(vec![format!("{stem}.csv"), format!("{stem}.json")])
}

fn scatter_points(outcomes: &[(ScenarioSpec, Result<TargetOutcome>)]) -> Vec<SvgPoint> {
    let mut points = Vec::new();
    for (spec, outcome) in outcomes {
        let Ok(outcome) = outcome else { continue };
        let Some(ex) = &outcome.exaggeration else { continue };
        if !ex.applicable {
            continue;
        }
        let Some(score) = ex.score.normalized else { continue };
        points.push(SvgPoint {
            persona: spec.persona.label().unwrap_or("_").to_string(),
            topic_category: spec
                .topic
                .category()
                .or(spec.topic.label())
                .unwrap_or("_")
                .to_string(),
            score,
        });
    }
    points
}

fn round_json_floats(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(rounded) =
                        serde_json::Number::from_f64(caricheck_core::analysis::report::round_sig(f))
                    {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json_floats),
        _ => {}
    }
}

/// Write every aggregate report, the scatter data, and run_summary.json.
pub fn write_reports(
    ctx: &RunCtx,
    outcomes: &[(ScenarioSpec, Result<TargetOutcome>)],
) -> Result<RunSummary> {
    let mut written = Vec::new();
    for metric in METRICS {
        for dimension in DIMENSIONS {
            written.extend(write_metric_report(ctx, outcomes, metric, dimension)?);
        }
    }
    let points = scatter_points(outcomes);
    if !points.is_empty() {
        write_svg_data(&ctx.config.reports_dir().join("scatter_exaggeration.csv"), &points)?;
        written.push("scatter_exaggeration.csv".to_string());
    }

    let scenarios: Vec<ScenarioReport> = outcomes
        .iter()
        .map(|(spec, outcome)| scenario_report(spec, outcome))
        .collect();
    let n_failed = scenarios.iter().filter(|s| s.status == "failed").count();
    let summary = RunSummary {
        embedder: ctx.embedder.embedder_id().to_string(),
        classifier: ctx.classifier.classifier_id(),
        seed: ctx.seed,
        n_ok: scenarios.len() - n_failed,
        n_failed,
        scenarios,
        reports: written,
    };
    let mut value = serde_json::to_value(&summary)
        .map_err(|e| Error::Internal(format!("summary serialization failed: {e}")))?;
    round_json_floats(&mut value);
    let mut bytes = serde_json::to_vec_pretty(&value)
        .map_err(|e| Error::Internal(format!("summary serialization failed: {e}")))?;
    bytes.push(b'\n');
    fsutil::write_atomic(&ctx.config.reports_dir().join("run_summary.json"), &bytes)?;
    Ok(summary)
}
