//! One pass of the full analysis flow over scripted generations: registry
//! parse, prompt rendering, cached generation, JSONL round trip, cached
//! embedding, seed words, axis + LOO, individuation, exaggeration, and an
//! aggregate CSV. Everything is seeded, so each stage is asserted against
//! a rerun of itself.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use caricheck_core::scenario::ScenarioSpec;
use caricheck_core::{
    aggregate, build_axis, build_prior, embed_corpus, exaggeration_score, generate_corpus,
    individuation_score, ingest_corpus, parse_registry, render_prompt, select_seed_words,
    validate_axis_loo, weighted_log_odds, write_corpus_jsonl, ClassifierSpec, Dimension,
    GenOptions, GenerationCache, PromptTemplate, PseudoEmbedder, SamplingParams, TextGenerator,
    TokenCounts, VectorCache,
};

const REGISTRY: &str = r#"
expand = true
model_id = "scripted"
n_samples = 24

[context.forum]
pattern = "A(n) {persona} posted the following comment on {topic} to an online forum:"
default_persona_pattern = "A person posted the following comment on {topic} to an online forum."
default_topic_pattern = "A(n) {persona} posted the following comment to an online forum."

[[persona]]
label = "non-binary person"
group = "gender"

[[persona]]
label = "conservative person"
group = "political"

[[topic]]
label = "funeral attire"
category = "style"
controversy = "uncontroversial"

[[topic]]
label = "health"
category = "wikihow"
controversy = "uncontroversial"
"#;

const P_NB: [&str; 8] =
    ["nonbinary", "queer", "identity", "pronouns", "community", "visibility", "affirming", "gender"];
const P_CON: [&str; 8] =
    ["conservative", "tradition", "values", "faith", "liberty", "heritage", "duty", "order"];
const T_FUN: [&str; 8] =
    ["funeral", "attire", "mourning", "dress", "respect", "formal", "black", "service"];
const T_HEA: [&str; 8] =
    ["health", "wellness", "exercise", "sleep", "nutrition", "doctor", "habits", "balance"];
const FILLER: [&str; 8] =
    ["the", "and", "people", "think", "really", "today", "about", "share"];

/// Deterministic stand-in for a model API: each prompt gets its own seeded
/// stream of documents drawn from persona/topic word pools named in the
/// prompt text, so regenerating a prompt yields the same sequence.
struct ScriptedGenerator {
    streams: Mutex<BTreeMap<String, ChaCha8Rng>>,
    calls: AtomicUsize,
}

fn pool_for(prompt: &str) -> (Option<[&'static str; 8]>, Option<[&'static str; 8]>) {
    let persona = if prompt.contains("non-binary") {
        Some(P_NB)
    } else if prompt.contains("conservative") {
        Some(P_CON)
    } else {
        None
    };
    let topic = if prompt.contains("funeral") {
        Some(T_FUN)
    } else if prompt.contains("health") {
        Some(T_HEA)
    } else {
        None
    };
    (persona, topic)
}

fn prompt_seed(prompt: &str) -> u64 {
    prompt
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl ScriptedGenerator {
    fn new() -> ScriptedGenerator {
        ScriptedGenerator { streams: Mutex::new(BTreeMap::new()), calls: AtomicUsize::new(0) }
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextGenerator for ScriptedGenerator {
    fn complete(&self, prompt: &str, _model: &str, _s: &SamplingParams) -> caricheck_core::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut streams = self.streams.lock().unwrap();
        let rng = streams
            .entry(prompt.to_string())
            .or_insert_with(|| ChaCha8Rng::seed_from_u64(prompt_seed(prompt)));
        let (persona, topic) = pool_for(prompt);
        let mut sentences = Vec::new();
        for _ in 0..4 {
            let mut words = Vec::new();
            for _ in 0..8 {
                let roll: f64 = rng.random();
                let pool = match (persona, topic) {
                    (Some(p), Some(t)) => {
                        if roll < 0.45 {
                            p
                        } else if roll < 0.9 {
                            t
                        } else {
                            FILLER
                        }
                    }
                    (Some(p), None) => if roll < 0.85 { p } else { FILLER },
                    (None, Some(t)) => if roll < 0.85 { t } else { FILLER },
                    (None, None) => FILLER,
                };
                words.push(pool[rng.random_range(0..pool.len())]);
            }
            sentences.push(words.join(" "));
        }
        Ok(format!("{}.", sentences.join(". ")))
    }
}

struct Cell {
    spec: ScenarioSpec,
    normalized: f64,
}

fn run_cell(
    registry_spec: &ScenarioSpec,
    template: &PromptTemplate,
    generator: &ScriptedGenerator,
    opts: &GenOptions,
    gen_cache: &GenerationCache,
    vec_cache: &VectorCache,
) -> Cell {
    let dp_spec = registry_spec.derive_default_persona().unwrap();
    let dt_spec = registry_spec.derive_default_topic().unwrap();
    let target = generate_corpus(registry_spec, template, generator, opts, gen_cache).unwrap();
    let dp = generate_corpus(&dp_spec, template, generator, opts, gen_cache).unwrap();
    let dt = generate_corpus(&dt_spec, template, generator, opts, gen_cache).unwrap();

    let embedder = PseudoEmbedder::new(64, 7);
    let emb_t = embed_corpus(&target, &embedder, Some(vec_cache)).unwrap();
    let emb_dp = embed_corpus(&dp, &embedder, Some(vec_cache)).unwrap();
    let emb_dt = embed_corpus(&dt, &embedder, Some(vec_cache)).unwrap();

    let counts_t = TokenCounts::from_texts(registry_spec.scenario_id.as_str(), &target.texts());
    let counts_dp = TokenCounts::from_texts(dp_spec.scenario_id.as_str(), &dp.texts());
    let prior = build_prior(&[&counts_t, &counts_dp], 0.01).unwrap();
    let odds = weighted_log_odds(&counts_t, &counts_dp, &prior).unwrap();
    let seeds = select_seed_words(&odds, 1.96).unwrap();
    assert!(!seeds.fallback_used, "{}: fell back", registry_spec.scenario_id);

    let axis = build_axis(&seeds, &emb_dt, &emb_dp).unwrap();
    let loo = validate_axis_loo(&axis);
    assert_eq!(loo.pass_rate, Some(1.0), "{}: LOO", registry_spec.scenario_id);

    let score = exaggeration_score(&emb_t, &emb_dp, &emb_dt, &axis).unwrap();
    assert!(score.denominator.abs() > 1e-6, "{}: denominator", registry_spec.scenario_id);
    Cell {
        spec: registry_spec.clone(),
        normalized: score.normalized.expect("normalized score"),
    }
}

#[test]
fn full_flow_from_registry_to_report() {
    let registry = parse_registry(REGISTRY, "inline").unwrap();
    assert_eq!(registry.scenarios.len(), 4);
    let template = registry.template("forum").unwrap();
    let spec = registry.get("forum__non-binary-person__funeral-attire").unwrap();
    assert_eq!(
        render_prompt(template, spec).unwrap(),
        "A non-binary person posted the following comment on funeral attire to an online forum:"
    );

    let dir = tempfile::tempdir().unwrap();
    let gen_cache = GenerationCache::new(dir.path().join("gen"));
    let vec_cache = VectorCache::new(dir.path().join("vec"));
    let generator = ScriptedGenerator::new();
    let opts = GenOptions { concurrency: 1, ..GenOptions::default() };

    // 4 targets + 2 distinct default-persona prompts + 2 distinct
    // default-topic prompts; everything else must come from the cache.
    let cells: Vec<Cell> = registry
        .targets()
        .map(|s| run_cell(s, template, &generator, &opts, &gen_cache, &vec_cache))
        .collect();
    assert_eq!(generator.calls(), 8 * 24);

    // Reruns are pure cache reads and reproduce identical scores.
    let again: Vec<Cell> = registry
        .targets()
        .map(|s| run_cell(s, template, &generator, &opts, &gen_cache, &vec_cache))
        .collect();
    assert_eq!(generator.calls(), 8 * 24);
    for (a, b) in cells.iter().zip(&again) {
        assert_eq!(a.normalized.to_bits(), b.normalized.to_bits(), "{}", a.spec.scenario_id);
    }

    let scores: Vec<(&ScenarioSpec, f64)> =
        cells.iter().map(|c| (&c.spec, c.normalized)).collect();
    let by_persona = aggregate(&scores, Dimension::Persona).unwrap();
    assert_eq!(by_persona.len(), 2);
    assert!(by_persona.iter().all(|r| r.n_cells == 2));
    assert!(by_persona[0].mean >= by_persona[1].mean);

    let by_cell = aggregate(&scores, Dimension::PersonaTopic).unwrap();
    assert_eq!(by_cell.len(), 4);
    assert!(by_cell.iter().all(|r| r.n_cells == 1 && r.std_error == 0.0));

    let csv_path = dir.path().join("by_persona.csv");
    caricheck_core::analysis::report::write_csv(&csv_path, &by_persona).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("group_dimension,group_value,mean,std_error,ci_low,ci_high,n")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn generation_survives_jsonl_round_trip_and_cache_rebuild() {
    let registry = parse_registry(REGISTRY, "inline").unwrap();
    let template = registry.template("forum").unwrap();
    let spec = registry.get("forum__conservative-person__health").unwrap();

    let dir = tempfile::tempdir().unwrap();
    let gen_cache = GenerationCache::new(dir.path().join("gen"));
    let generator = ScriptedGenerator::new();
    let opts = GenOptions { concurrency: 1, ..GenOptions::default() };

    let corpus = generate_corpus(spec, template, &generator, &opts, &gen_cache).unwrap();
    assert_eq!(generator.calls(), 24);

    let path = dir.path().join("corpus.jsonl");
    write_corpus_jsonl(&corpus, &path).unwrap();
    let loaded = ingest_corpus(&path, spec).unwrap();
    assert_eq!(loaded, corpus);

    // A cold cache regenerates the same texts from the scripted streams;
    // only timestamps may differ.
    let cold = GenerationCache::new(dir.path().join("gen2"));
    let generator2 = ScriptedGenerator::new();
    let regen = generate_corpus(spec, template, &generator2, &opts, &cold).unwrap();
    assert_eq!(regen.texts(), corpus.texts());
    assert_eq!(
        regen.records.iter().map(|r| &r.request_fingerprint).collect::<Vec<_>>(),
        corpus.records.iter().map(|r| &r.request_fingerprint).collect::<Vec<_>>()
    );
}

#[test]
fn separable_cells_pass_the_individuation_gate() {
    let registry = parse_registry(REGISTRY, "inline").unwrap();
    let template = registry.template("forum").unwrap();
    let spec = registry.get("forum__non-binary-person__funeral-attire").unwrap();
    let dp_spec = spec.derive_default_persona().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let gen_cache = GenerationCache::new(dir.path().join("gen"));
    let generator = ScriptedGenerator::new();
    let opts = GenOptions { concurrency: 1, ..GenOptions::default() };
    let target = generate_corpus(spec, template, &generator, &opts, &gen_cache).unwrap();
    let dp = generate_corpus(&dp_spec, template, &generator, &opts, &gen_cache).unwrap();

    let embedder = PseudoEmbedder::new(64, 7);
    let emb_t = embed_corpus(&target, &embedder, None).unwrap();
    let emb_dp = embed_corpus(&dp, &embedder, None).unwrap();

    for spec_kind in [ClassifierSpec::default(), ClassifierSpec::logistic_default()] {
        let score = individuation_score(&emb_t, &emb_dp, &spec_kind, 17).unwrap();
        assert_eq!(score.n_test, 10);
        assert!(
            score.accuracy >= 0.9,
            "{}: accuracy {}",
            score.classifier_id,
            score.accuracy
        );
        let rerun = individuation_score(&emb_t, &emb_dp, &spec_kind, 17).unwrap();
        assert_eq!(rerun, score);
    }
}
