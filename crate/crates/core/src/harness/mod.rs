//! Prompt rendering and corpus plumbing: context templates, the JSONL
//! corpus format, and ingestion of corpora generated elsewhere.

pub mod generate;

pub use generate::{
    generate_corpus, request_fingerprint, GenOptions, GenerationCache, SamplingParams,
    TextGenerator,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::scenario::{PersonaRef, ScenarioSpec, TopicRef};

/// Context prompt template. Placeholders: {persona}, {topic},
/// {persona_base} (persona label minus a trailing " person"), and
/// {persona_description} which expands to the group-specific description
/// pattern (interview-style contexts).
///
/// The literal markers "A(n)"/"a(n)" and "is/are" are resolved after
/// substitution: the article by the first word of the inserted label, the
/// verb by the plurality of the word preceding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub context_id: String,
    pub pattern: String,
    pub default_persona_pattern: String,
    pub default_topic_pattern: String,
    /// Fallback persona description for groups without an override.
    pub description: Option<String>,
    pub description_overrides: BTreeMap<crate::scenario::PersonaGroup, String>,
}

const PATTERN_PLACEHOLDERS: [&str; 4] = ["persona", "topic", "persona_base", "persona_description"];
const DESCRIPTION_PLACEHOLDERS: [&str; 2] = ["persona", "persona_base"];

fn check_placeholders(text: &str, allowed: &[&str], site: &str) -> Result<()> {
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let end = after
            .find('}')
            .ok_or_else(|| Error::Template(format!("{site}: unclosed placeholder")))?;
        let name = &after[..end];
        if !allowed.contains(&name) {
            return Err(Error::Template(format!("{site}: unknown placeholder {{{name}}}")));
        }
        rest = &after[end + 1..];
    }
    Ok(())
}

fn has_persona_placeholder(text: &str) -> bool {
    text.contains("{persona}")
        || text.contains("{persona_base}")
        || text.contains("{persona_description}")
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        let id = &self.context_id;
        check_placeholders(&self.pattern, &PATTERN_PLACEHOLDERS, &format!("{id}.pattern"))?;
        check_placeholders(
            &self.default_persona_pattern,
            &PATTERN_PLACEHOLDERS,
            &format!("{id}.default_persona_pattern"),
        )?;
        check_placeholders(
            &self.default_topic_pattern,
            &PATTERN_PLACEHOLDERS,
            &format!("{id}.default_topic_pattern"),
        )?;
        if !self.pattern.contains("{topic}") || !has_persona_placeholder(&self.pattern) {
            return Err(Error::Template(format!(
                "{id}.pattern must contain a persona placeholder and {{topic}}"
            )));
        }
        if !self.default_persona_pattern.contains("{topic}")
            || has_persona_placeholder(&self.default_persona_pattern)
        {
            return Err(Error::Template(format!(
                "{id}.default_persona_pattern must contain {{topic}} and no persona placeholder"
            )));
        }
        if !has_persona_placeholder(&self.default_topic_pattern)
            || self.default_topic_pattern.contains("{topic}")
        {
            return Err(Error::Template(format!(
                "{id}.default_topic_pattern must contain a persona placeholder and no {{topic}}"
            )));
        }
        let uses_description = self.pattern.contains("{persona_description}")
            || self.default_topic_pattern.contains("{persona_description}");
        if uses_description && self.description.is_none() && self.description_overrides.is_empty() {
            return Err(Error::Template(format!(
                "{id}: {{persona_description}} used but no description patterns given"
            )));
        }
        if let Some(desc) = &self.description {
            check_placeholders(desc, &DESCRIPTION_PLACEHOLDERS, &format!("{id}.description"))?;
        }
        for (group, desc) in &self.description_overrides {
            check_placeholders(
                desc,
                &DESCRIPTION_PLACEHOLDERS,
                &format!("{id}.description_overrides.{group}"),
            )?;
        }
        Ok(())
    }
}

/// True when a word takes "an" rather than "a". Covers the bundled labels:
/// initial vowels, and numerals read as "eight…", "eleven", "eighteen".
fn starts_with_vowel_sound(word: &str) -> bool {
    let w = word.trim_start_matches(|c: char| !c.is_ascii_alphanumeric());
    match w.chars().next() {
        Some(c) if "aeiouAEIOU".contains(c) => true,
        Some(c) if c.is_ascii_digit() => {
            let digits: String = w.chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.starts_with('8') || digits == "11" || digits == "18"
        }
        _ => false,
    }
}

fn resolve_article_marker(text: &str, marker: &str, upper: bool) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(marker) {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + marker.len()..];
        let word: String = after.chars().take_while(|c| !c.is_whitespace()).collect();
        let article = match (upper, starts_with_vowel_sound(&word)) {
            (true, true) => "An ",
            (true, false) => "A ",
            (false, true) => "an ",
            (false, false) => "a ",
        };
        out.push_str(article);
        rest = after;
    }
    out.push_str(rest);
    out
}

fn resolve_articles(text: &str) -> String {
    let text = resolve_article_marker(text, "A(n) ", true);
    resolve_article_marker(&text, "a(n) ", false)
}

fn word_is_plural(word: &str) -> bool {
    let w = word.trim_matches(|c: char| !c.is_ascii_alphanumeric());
    if w.is_empty() {
        return false;
    }
    let lower = w.to_ascii_lowercase();
    if matches!(lower.as_str(), "people" | "men" | "women" | "children") {
        return true;
    }
    // Mid-sentence capitalization marks a proper noun (a singular subject).
    if w.chars().next().unwrap().is_uppercase() {
        return false;
    }
    lower.ends_with('s') && !lower.ends_with("ss")
}

fn resolve_is_are(text: &str) -> String {
    let marker = "is/are";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(marker) {
        let before = &rest[..pos];
        let prev_word = before
            .trim_end()
            .rsplit(|c: char| c.is_whitespace())
            .next()
            .unwrap_or("");
        out.push_str(before);
        out.push_str(if word_is_plural(prev_word) { "are" } else { "is" });
        rest = &rest[pos + marker.len()..];
    }
    out.push_str(rest);
    out
}

/// Render the prompt for one scenario cell. Default persona/topic route to
/// the corresponding default pattern.
pub fn render_prompt(template: &PromptTemplate, spec: &ScenarioSpec) -> Result<String> {
    if template.context_id != spec.context_id {
        return Err(Error::Template(format!(
            "template {} cannot render scenario {} (context {})",
            template.context_id, spec.scenario_id, spec.context_id
        )));
    }
    let pattern = match (&spec.persona, &spec.topic) {
        (PersonaRef::Default, TopicRef::Default) => {
            return Err(Error::InvalidScenario(format!(
                "{}: persona and topic cannot both be default",
                spec.scenario_id
            )))
        }
        (PersonaRef::Default, _) => &template.default_persona_pattern,
        (_, TopicRef::Default) => &template.default_topic_pattern,
        _ => &template.pattern,
    };
    let mut text = pattern.clone();
    if text.contains("{persona_description}") {
        let group = spec.persona.group().ok_or_else(|| {
            Error::Template(format!(
                "{}: description pattern reached with default persona",
                template.context_id
            ))
        })?;
        let desc = template
            .description_overrides
            .get(&group)
            .or(template.description.as_ref())
            .ok_or_else(|| {
                Error::Template(format!(
                    "context {}: no persona description for group {group}",
                    template.context_id
                ))
            })?;
        text = text.replace("{persona_description}", desc);
    }
    if spec.persona.is_default() && has_persona_placeholder(&text) {
        return Err(Error::Template(format!(
            "{}: persona placeholder with default persona",
            template.context_id
        )));
    }
    if spec.topic.is_default() && text.contains("{topic}") {
        return Err(Error::Template(format!(
            "{}: topic placeholder with default topic",
            template.context_id
        )));
    }
    if let Some(label) = spec.persona.label() {
        text = text.replace("{persona}", label);
        let base = spec.persona.base_label().unwrap_or(label).to_string();
        text = text.replace("{persona_base}", &base);
    }
    if let Some(label) = spec.topic.label() {
        text = text.replace("{topic}", label);
    }
    let text = resolve_articles(&text);
    Ok(resolve_is_are(&text))
}

/// One generated output. Field order matches the JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub scenario_id: String,
    pub index: u32,
    pub text: String,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
    pub request_fingerprint: String,
}

/// The collected outputs for one scenario cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputCorpus {
    pub scenario: ScenarioSpec,
    pub records: Vec<OutputRecord>,
}

impl OutputCorpus {
    pub fn texts(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.text.as_str()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.len() != self.scenario.n_samples as usize {
            return Err(Error::Record {
                detail: format!(
                    "{}: corpus has {} records for n_samples {}",
                    self.scenario.scenario_id,
                    self.records.len(),
                    self.scenario.n_samples
                ),
                line: None,
            });
        }
        for (i, record) in self.records.iter().enumerate() {
            if record.scenario_id != self.scenario.scenario_id {
                return Err(Error::Record {
                    detail: format!(
                        "record {} carries scenario_id {}, expected {}",
                        i, record.scenario_id, self.scenario.scenario_id
                    ),
                    line: None,
                });
            }
            if record.index as usize != i {
                return Err(Error::Record {
                    detail: format!("record {} has index {}", i, record.index),
                    line: None,
                });
            }
            if record.text.trim().is_empty() {
                return Err(Error::Record {
                    detail: format!("record {i} has empty text"),
                    line: None,
                });
            }
        }
        Ok(())
    }
}

/// Write a corpus as JSONL, one record per line.
pub fn write_corpus_jsonl(corpus: &OutputCorpus, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for record in &corpus.records {
        serde_json::to_writer(&mut buf, record)
            .map_err(|e| Error::Internal(format!("record serialization failed: {e}")))?;
        buf.push(b'\n');
    }
    fsutil::write_atomic(path, &buf)
}

#[derive(Deserialize)]
struct RawRecord {
    scenario_id: Option<String>,
    index: Option<u32>,
    text: String,
    model_id: Option<String>,
    created_at: Option<DateTime<Utc>>,
    request_fingerprint: Option<String>,
}

/// Load a JSONL corpus produced by this tool or elsewhere. Absent metadata
/// fields are filled in from `spec`; if any index is absent or the present
/// indices are not exactly 0..n-1, records are renumbered in file order.
/// The returned corpus carries n_samples equal to the actual record count.
pub fn ingest_corpus(path: &Path, spec: &ScenarioSpec) -> Result<OutputCorpus> {
    let text = fs::read_to_string(path)?;
    let mut raws = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Record {
            detail: e.to_string(),
            line: Some(lineno + 1),
        })?;
        if let Some(id) = &raw.scenario_id {
            if *id != spec.scenario_id {
                return Err(Error::Record {
                    detail: format!("scenario_id {} does not match {}", id, spec.scenario_id),
                    line: Some(lineno + 1),
                });
            }
        }
        if raw.text.trim().is_empty() {
            return Err(Error::Record {
                detail: "empty text".into(),
                line: Some(lineno + 1),
            });
        }
        raws.push(raw);
    }
    if raws.len() < 2 {
        return Err(Error::TooFewSamples { found: raws.len(), need: 2 });
    }

    let n = raws.len();
    let indices: Vec<Option<u32>> = raws.iter().map(|r| r.index).collect();
    let dense = indices.iter().all(|i| i.is_some()) && {
        let mut seen = vec![false; n];
        indices.iter().all(|i| {
            let i = i.unwrap() as usize;
            i < n && !std::mem::replace(&mut seen[i], true)
        })
    };
    if dense {
        raws.sort_by_key(|r| r.index.unwrap());
    }

    let epoch = DateTime::<Utc>::from_timestamp(0, 0)
        .ok_or_else(|| Error::Internal("epoch timestamp".into()))?;
    let records: Vec<OutputRecord> = raws
        .into_iter()
        .enumerate()
        .map(|(i, raw)| {
            let fingerprint = raw
                .request_fingerprint
                .unwrap_or_else(|| hex::encode(Sha256::digest(raw.text.as_bytes())));
            OutputRecord {
                scenario_id: spec.scenario_id.clone(),
                index: i as u32,
                text: raw.text,
                model_id: raw.model_id.unwrap_or_else(|| spec.model_id.clone()),
                created_at: raw.created_at.unwrap_or(epoch),
                request_fingerprint: fingerprint,
            }
        })
        .collect();

    let mut scenario = spec.clone();
    scenario.n_samples = records.len() as u32;
    let corpus = OutputCorpus { scenario, records };
    corpus.validate()?;
    Ok(corpus)
}
