//! Completion collection against a pluggable text generator, backed by a
//! content-addressed cache so that a fully populated cache makes
//! generation a pure function of the request.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use chrono::Utc;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::harness::{render_prompt, OutputCorpus, OutputRecord, PromptTemplate};
use crate::scenario::ScenarioSpec;

/// Decoding parameters. Recorded in every request fingerprint so cached
/// corpora are auditable.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 1.0, max_tokens: 512 }
    }
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub sampling: SamplingParams,
    /// Attempts per record, counting the first.
    pub retries: u32,
    /// Backoff before the second attempt; doubles per further attempt.
    pub backoff_ms: u64,
    /// In-flight request limit.
    pub concurrency: usize,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            sampling: SamplingParams::default(),
            retries: 3,
            backoff_ms: 1000,
            concurrency: 4,
        }
    }
}

/// Source of completions. Implementations must be callable from several
/// worker threads at once.
pub trait TextGenerator: Sync {
    fn complete(&self, prompt: &str, model_id: &str, sampling: &SamplingParams) -> Result<String>;
}

/// Hash identifying one record request: prompt, model, sampling params,
/// and the record's index (so n samples of one prompt stay distinct).
pub fn request_fingerprint(
    prompt: &str,
    model_id: &str,
    sampling: &SamplingParams,
    index: u32,
) -> String {
    let canonical = format!(
        "model={}\ntemperature={}\nmax_tokens={}\nindex={}\nprompt={}",
        model_id, sampling.temperature, sampling.max_tokens, index, prompt
    );
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// On-disk store of OutputRecords keyed by request fingerprint. Entries
/// are immutable once written; concurrent writers of the same key agree
/// via the first-writer-wins publish in fsutil.
pub struct GenerationCache {
    root: PathBuf,
}

impl GenerationCache {
    pub fn new(root: impl Into<PathBuf>) -> GenerationCache {
        GenerationCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, fingerprint: &str) -> PathBuf {
        let shard = if fingerprint.len() >= 2 { &fingerprint[..2] } else { "xx" };
        self.root.join(shard).join(format!("{fingerprint}.json"))
    }

    pub fn get(&self, fingerprint: &str) -> Option<OutputRecord> {
        let bytes = fs::read(self.entry_path(fingerprint)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put(&self, record: &OutputRecord) -> Result<()> {
        let bytes = serde_json::to_vec(record)
            .map_err(|e| Error::Internal(format!("cache serialization failed: {e}")))?;
        fsutil::publish_atomic(&self.entry_path(&record.request_fingerprint), &bytes)?;
        Ok(())
    }
}

fn fetch_one(
    generator: &dyn TextGenerator,
    prompt: &str,
    spec: &ScenarioSpec,
    opts: &GenOptions,
    index: u32,
    fingerprint: &str,
    cache: &GenerationCache,
) -> Result<()> {
    let attempts = opts.retries.max(1);
    let mut last: Option<Error> = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            thread::sleep(Duration::from_millis(opts.backoff_ms << (attempt - 1)));
        }
        match generator.complete(prompt, &spec.model_id, &opts.sampling) {
            Ok(text) if text.trim().is_empty() => {
                last = Some(Error::Record {
                    detail: format!("empty completion for index {index}"),
                    line: None,
                });
            }
            Ok(text) => {
                let record = OutputRecord {
                    scenario_id: spec.scenario_id.clone(),
                    index,
                    text,
                    model_id: spec.model_id.clone(),
                    created_at: Utc::now(),
                    request_fingerprint: fingerprint.to_string(),
                };
                cache.put(&record)?;
                return Ok(());
            }
            Err(err) => last = Some(err),
        }
    }
    Err(last.unwrap_or_else(|| Error::Internal("retry loop exited without outcome".into())))
}

/// Collect n_samples records for one scenario, serving from the cache
/// wherever possible and persisting every fresh completion before return.
pub fn generate_corpus(
    spec: &ScenarioSpec,
    template: &PromptTemplate,
    generator: &dyn TextGenerator,
    opts: &GenOptions,
    cache: &GenerationCache,
) -> Result<OutputCorpus> {
    spec.validate()?;
    let prompt = render_prompt(template, spec)?;
    let fingerprints: Vec<String> = (0..spec.n_samples)
        .map(|i| request_fingerprint(&prompt, &spec.model_id, &opts.sampling, i))
        .collect();
    let missing: Vec<u32> = (0..spec.n_samples)
        .filter(|i| cache.get(&fingerprints[*i as usize]).is_none())
        .collect();

    if !missing.is_empty() {
        let next = AtomicUsize::new(0);
        let workers = opts.concurrency.max(1).min(missing.len());
        let failures: Mutex<Vec<Error>> = Mutex::new(Vec::new());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let slot = next.fetch_add(1, Ordering::Relaxed);
                    if slot >= missing.len() {
                        break;
                    }
                    if !failures.lock().unwrap().is_empty() {
                        break;
                    }
                    let index = missing[slot];
                    let fp = &fingerprints[index as usize];
                    if let Err(err) = fetch_one(generator, &prompt, spec, opts, index, fp, cache) {
                        failures.lock().unwrap().push(err);
                    }
                });
            }
        });
        let failures = failures.into_inner().unwrap_or_else(|e| e.into_inner());
        if let Some(first) = failures.into_iter().next() {
            let progress = (0..spec.n_samples)
                .filter(|i| cache.get(&fingerprints[*i as usize]).is_some())
                .count();
            return Err(Error::Generation { message: first.to_string(), progress });
        }
    }

    let mut records = Vec::with_capacity(spec.n_samples as usize);
    for i in 0..spec.n_samples as usize {
        let mut record = cache.get(&fingerprints[i]).ok_or_else(|| {
            Error::Internal(format!("cache entry for index {i} vanished after generation"))
        })?;
        // Entries are shared by request content: derived cells with the same
        // prompt replay records first written under another scenario id.
        record.scenario_id = spec.scenario_id.clone();
        records.push(record);
    }
    let corpus = OutputCorpus { scenario: spec.clone(), records };
    corpus.validate()?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{PersonaGroup, PersonaRef, TopicRef};
    use std::collections::BTreeMap;
    use std::sync::atomic::AtomicU32;

    struct CountingGenerator {
        calls: AtomicU32,
        fail_first: u32,
    }

    impl CountingGenerator {
        fn new(fail_first: u32) -> Self {
            CountingGenerator { calls: AtomicU32::new(0), fail_first }
        }
    }

    impl TextGenerator for CountingGenerator {
        fn complete(&self, prompt: &str, _model: &str, _s: &SamplingParams) -> Result<String> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            if call < self.fail_first {
                return Err(Error::Transport("synthetic outage".into()));
            }
            Ok(format!("reply {} to: {}", call, prompt.len()))
        }
    }

    struct DeadGenerator;

    impl TextGenerator for DeadGenerator {
        fn complete(&self, _p: &str, _m: &str, _s: &SamplingParams) -> Result<String> {
            Err(Error::Transport("unreachable".into()))
        }
    }

    fn test_spec(n: u32) -> ScenarioSpec {
        ScenarioSpec {
            scenario_id: "gen-test".into(),
            context_id: "onlineforum".into(),
            model_id: "mock".into(),
            persona: PersonaRef::Named {
                label: "Asian person".into(),
                group: PersonaGroup::RaceEthnicity,
            },
            topic: TopicRef::Named {
                label: "health".into(),
                category: "Health".into(),
                specificity_level: None,
                controversy: None,
            },
            n_samples: n,
        }
    }

    fn test_template() -> PromptTemplate {
        PromptTemplate {
            context_id: "onlineforum".into(),
            pattern: "A(n) {persona} posted the following comment on {topic} to an online forum:"
                .into(),
            default_persona_pattern: "A person posted on {topic}.".into(),
            default_topic_pattern: "A(n) {persona} posted.".into(),
            description: None,
            description_overrides: BTreeMap::new(),
        }
    }

    fn fast_opts() -> GenOptions {
        GenOptions { backoff_ms: 1, concurrency: 2, ..GenOptions::default() }
    }

    #[test]
    fn cold_cache_generates_then_replays_without_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GenerationCache::new(dir.path());
        let generator = CountingGenerator::new(0);
        let spec = test_spec(3);
        let first =
            generate_corpus(&spec, &test_template(), &generator, &fast_opts(), &cache).unwrap();
        assert_eq!(first.records.len(), 3);
        assert_eq!(generator.calls.load(Ordering::SeqCst), 3);

        let second =
            generate_corpus(&spec, &test_template(), &generator, &fast_opts(), &cache).unwrap();
        assert_eq!(generator.calls.load(Ordering::SeqCst), 3, "cache hit must not call");
        assert_eq!(first, second);
    }

    #[test]
    fn same_prompt_under_new_scenario_id_replays_restamped() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GenerationCache::new(dir.path());
        let generator = CountingGenerator::new(0);
        let spec = test_spec(3);
        generate_corpus(&spec, &test_template(), &generator, &fast_opts(), &cache).unwrap();

        // Same persona/topic/model, different cell id: identical prompts
        // replay from the cache, relabeled for the requesting cell.
        let mut renamed = test_spec(3);
        renamed.scenario_id = "gen-test-renamed".into();
        let replayed =
            generate_corpus(&renamed, &test_template(), &generator, &fast_opts(), &cache).unwrap();
        assert_eq!(generator.calls.load(Ordering::SeqCst), 3);
        assert!(replayed.records.iter().all(|r| r.scenario_id == "gen-test-renamed"));
        replayed.validate().unwrap();
    }

    #[test]
    fn transient_failures_are_retried() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GenerationCache::new(dir.path());
        // Two failures, then success; retries=3 absorbs them.
        let generator = CountingGenerator::new(2);
        let spec = test_spec(2);
        let corpus =
            generate_corpus(&spec, &test_template(), &generator, &fast_opts(), &cache).unwrap();
        assert_eq!(corpus.records.len(), 2);
    }

    #[test]
    fn dead_endpoint_reports_zero_progress() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GenerationCache::new(dir.path());
        let spec = test_spec(2);
        match generate_corpus(&spec, &test_template(), &DeadGenerator, &fast_opts(), &cache) {
            Err(Error::Generation { progress: 0, .. }) => {}
            other => panic!("expected Generation(progress=0), got {other:?}"),
        }
    }

    #[test]
    fn distinct_indices_have_distinct_fingerprints() {
        let s = SamplingParams::default();
        let a = request_fingerprint("p", "m", &s, 0);
        let b = request_fingerprint("p", "m", &s, 1);
        assert_ne!(a, b);
        let c = request_fingerprint("p", "m", &SamplingParams { temperature: 0.7, ..s }, 0);
        assert_ne!(a, c);
        assert_eq!(a, request_fingerprint("p", "m", &SamplingParams::default(), 0));
    }
}
