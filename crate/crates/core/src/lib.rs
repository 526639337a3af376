//! Scoring library for auditing caricature in LLM persona simulations.
//!
//! The pipeline: define scenario cells over (context, persona, topic),
//! generate or ingest simulation corpora, embed them, find the seed
//! words separating persona talk from topic talk, build a semantic axis
//! between the two, then score each target cell for individuation (is it
//! distinguishable from the default persona?) and exaggeration (how far
//! toward pure persona talk has it drifted?), aggregating across
//! personas, topics, and contexts.

pub mod analysis;
pub mod axis;
pub mod embed;
pub mod error;
pub mod exaggeration;
pub mod fsutil;
pub mod harness;
pub mod individuation;
pub mod lexstats;
pub mod scenario;
pub mod vecmath;

pub use analysis::{aggregate, required_sample_size, AggregateRow, Dimension, PowerRequest, Sides};
pub use axis::{build_axis, embed_seed_word, validate_axis_loo, SemanticAxis, ValidationReport};
pub use embed::{embed_corpus, embed_texts, EmbeddedCorpus, Embedder, PseudoEmbedder, VectorCache};
pub use error::{Error, Result};
pub use exaggeration::{exaggeration_score, mean_axis_cosine, per_doc_cosines, ExFlag, ExaggerationScore};
pub use harness::{
    generate_corpus, ingest_corpus, render_prompt, write_corpus_jsonl, GenOptions,
    GenerationCache, OutputCorpus, OutputRecord, PromptTemplate, SamplingParams, TextGenerator,
};
pub use individuation::{
    individuation_score, stratified_split, train_classifier, v_measure, vmeasure_score,
    wilson_interval, ClassifierSpec, ClusterScore, IndividuationScore, SplitPlan,
};
pub use lexstats::{
    build_prior, select_seed_words, tokenize, weighted_log_odds, DirichletPrior, LogOddsResult,
    SeedWordSets, TokenCounts,
};
pub use scenario::{
    load_registry, parse_registry, save_registry, PersonaGroup, PersonaRef, ScenarioRegistry,
    ScenarioSpec, TopicRef,
};
