//! Scenario data model: personas, topics, contexts, and the registry of
//! simulation cells. A cell pairs a persona and a topic inside a context;
//! the default-persona and default-topic variants are derived from it,
//! never stored as all-default specs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::PromptTemplate;

pub const DEFAULT_PERSONA_SUFFIX: &str = "__default_persona";
pub const DEFAULT_TOPIC_SUFFIX: &str = "__default_topic";

/// Demographic family a persona belongs to. Drives description overrides
/// in the interview-style templates and aggregation slicing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaGroup {
    Age,
    Political,
    RaceEthnicity,
    Gender,
    Custom,
}

impl PersonaGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            PersonaGroup::Age => "age",
            PersonaGroup::Political => "political",
            PersonaGroup::RaceEthnicity => "race_ethnicity",
            PersonaGroup::Gender => "gender",
            PersonaGroup::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<PersonaGroup> {
        match s {
            "age" => Some(PersonaGroup::Age),
            "political" => Some(PersonaGroup::Political),
            "race_ethnicity" => Some(PersonaGroup::RaceEthnicity),
            "gender" => Some(PersonaGroup::Gender),
            "custom" => Some(PersonaGroup::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for PersonaGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A persona, or the unmarked default. The default is a distinguished
/// variant rather than the string "person" because contexts render it
/// differently ("person" in forum/interview prompts, "user" on Twitter).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PersonaRef {
    Named { label: String, group: PersonaGroup },
    Default,
}

impl PersonaRef {
    pub fn is_default(&self) -> bool {
        matches!(self, PersonaRef::Default)
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            PersonaRef::Named { label, .. } => Some(label),
            PersonaRef::Default => None,
        }
    }

    pub fn group(&self) -> Option<PersonaGroup> {
        match self {
            PersonaRef::Named { group, .. } => Some(*group),
            PersonaRef::Default => None,
        }
    }

    /// Label with a trailing " person" stripped: "liberal person" becomes
    /// "liberal". Labels without the suffix are returned unchanged.
    pub fn base_label(&self) -> Option<&str> {
        self.label().map(|l| l.strip_suffix(" person").unwrap_or(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controversy {
    Controversial,
    Uncontroversial,
}

impl Controversy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Controversy::Controversial => "controversial",
            Controversy::Uncontroversial => "uncontroversial",
        }
    }

    pub fn parse(s: &str) -> Option<Controversy> {
        match s {
            "controversial" => Some(Controversy::Controversial),
            "uncontroversial" => Some(Controversy::Uncontroversial),
            _ => None,
        }
    }
}

/// A topic, or the default (absence of a topic). specificity_level and
/// controversy are aggregation metadata only; scoring never reads them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopicRef {
    Named {
        label: String,
        category: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        specificity_level: Option<u8>,
        #[serde(skip_serializing_if = "Option::is_none")]
        controversy: Option<Controversy>,
    },
    Default,
}

impl TopicRef {
    pub fn is_default(&self) -> bool {
        matches!(self, TopicRef::Default)
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            TopicRef::Named { label, .. } => Some(label),
            TopicRef::Default => None,
        }
    }

    pub fn category(&self) -> Option<&str> {
        match self {
            TopicRef::Named { category, .. } => Some(category),
            TopicRef::Default => None,
        }
    }
}

/// One simulation cell: a (context, model, persona, topic) tuple plus the
/// number of outputs to collect for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: String,
    pub context_id: String,
    pub model_id: String,
    pub persona: PersonaRef,
    pub topic: TopicRef,
    pub n_samples: u32,
}

impl ScenarioSpec {
    /// True when both persona and topic are named; only such cells are
    /// scoring targets.
    pub fn is_target(&self) -> bool {
        !self.persona.is_default() && !self.topic.is_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario_id.is_empty() {
            return Err(Error::InvalidScenario("empty scenario_id".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidScenario(format!(
                "{}: n_samples must be at least 1",
                self.scenario_id
            )));
        }
        if self.persona.is_default() && self.topic.is_default() {
            return Err(Error::InvalidScenario(format!(
                "{}: persona and topic cannot both be default",
                self.scenario_id
            )));
        }
        if let Some(label) = self.persona.label() {
            if label.trim().is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "{}: persona label is empty",
                    self.scenario_id
                )));
            }
        }
        if let TopicRef::Named { label, specificity_level, .. } = &self.topic {
            if label.trim().is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "{}: topic label is empty",
                    self.scenario_id
                )));
            }
            if let Some(level) = specificity_level {
                if !(1..=5).contains(level) {
                    return Err(Error::InvalidScenario(format!(
                        "{}: specificity_level {level} outside 1..=5",
                        self.scenario_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// The same cell with the persona replaced by the default: S_{_,t,c}.
    pub fn derive_default_persona(&self) -> Result<ScenarioSpec> {
        if self.persona.is_default() {
            return Err(Error::InvalidScenario(format!(
                "{}: persona is already default",
                self.scenario_id
            )));
        }
        if self.topic.is_default() {
            return Err(Error::InvalidScenario(format!(
                "{}: cannot default the persona of a default-topic cell",
                self.scenario_id
            )));
        }
        let mut spec = self.clone();
        spec.scenario_id.push_str(DEFAULT_PERSONA_SUFFIX);
        spec.persona = PersonaRef::Default;
        Ok(spec)
    }

    /// The same cell with the topic removed: S_{p,_,c}.
    pub fn derive_default_topic(&self) -> Result<ScenarioSpec> {
        if self.topic.is_default() {
            return Err(Error::InvalidScenario(format!(
                "{}: topic is already default",
                self.scenario_id
            )));
        }
        if self.persona.is_default() {
            return Err(Error::InvalidScenario(format!(
                "{}: cannot default the topic of a default-persona cell",
                self.scenario_id
            )));
        }
        let mut spec = self.clone();
        spec.scenario_id.push_str(DEFAULT_TOPIC_SUFFIX);
        spec.topic = TopicRef::Default;
        Ok(spec)
    }
}

/// Lowercase a label and collapse every non-alphanumeric run to a single
/// hyphen: "Universal Basic Income (UBI)" -> "universal-basic-income-ubi".
pub fn slugify(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    let mut pending_dash = false;
    for ch in label.chars() {
        let c = ch.to_ascii_lowercase();
        if c.is_ascii_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.push(c);
        } else {
            pending_dash = true;
        }
    }
    out
}

/// Validated collection of contexts, personas, topics, and scenario cells.
/// Immutable after load; shared read-only across pipeline workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRegistry {
    pub contexts: BTreeMap<String, PromptTemplate>,
    pub personas: Vec<PersonaRef>,
    pub topics: Vec<TopicRef>,
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioRegistry {
    pub fn empty() -> ScenarioRegistry {
        ScenarioRegistry {
            contexts: BTreeMap::new(),
            personas: Vec::new(),
            topics: Vec::new(),
            scenarios: Vec::new(),
        }
    }

    pub fn get(&self, scenario_id: &str) -> Option<&ScenarioSpec> {
        self.scenarios.iter().find(|s| s.scenario_id == scenario_id)
    }

    pub fn template(&self, context_id: &str) -> Option<&PromptTemplate> {
        self.contexts.get(context_id)
    }

    pub fn targets(&self) -> impl Iterator<Item = &ScenarioSpec> {
        self.scenarios.iter().filter(|s| s.is_target())
    }

    pub fn validate(&self) -> Result<()> {
        for (id, template) in &self.contexts {
            if *id != template.context_id {
                return Err(Error::Internal(format!(
                    "context key {id} disagrees with template id {}",
                    template.context_id
                )));
            }
            template.validate()?;
        }
        let mut persona_labels = BTreeSet::new();
        let mut default_personas = 0usize;
        for persona in &self.personas {
            match persona {
                PersonaRef::Named { label, .. } => {
                    if !persona_labels.insert(label.clone()) {
                        return Err(Error::InvalidScenario(format!(
                            "duplicate persona label: {label}"
                        )));
                    }
                }
                PersonaRef::Default => default_personas += 1,
            }
        }
        if default_personas > 1 {
            return Err(Error::InvalidScenario("more than one default persona entry".into()));
        }
        let mut topic_labels = BTreeSet::new();
        for topic in &self.topics {
            if let Some(label) = topic.label() {
                if !topic_labels.insert(label.to_string()) {
                    return Err(Error::InvalidScenario(format!("duplicate topic label: {label}")));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for spec in &self.scenarios {
            spec.validate()?;
            if !self.contexts.contains_key(&spec.context_id) {
                return Err(Error::UnknownContext {
                    scenario_id: spec.scenario_id.clone(),
                    context_id: spec.context_id.clone(),
                });
            }
            if !ids.insert(spec.scenario_id.clone()) {
                return Err(Error::DuplicateId(spec.scenario_id.clone()));
            }
        }
        // Derived ids must stay claimable: a stored id may not collide with
        // the default-persona/default-topic id of any target cell.
        for spec in self.scenarios.iter().filter(|s| s.is_target()) {
            for suffix in [DEFAULT_PERSONA_SUFFIX, DEFAULT_TOPIC_SUFFIX] {
                let derived = format!("{}{}", spec.scenario_id, suffix);
                if ids.contains(&derived) {
                    return Err(Error::DuplicateId(derived));
                }
            }
        }
        Ok(())
    }
}

// Raw on-disk shape of a registry file. Kept separate from the typed
// registry so scenario entries can reference personas/topics by label.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateFile {
    pattern: String,
    default_persona_pattern: String,
    default_topic_pattern: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    description_overrides: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PersonaEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    default: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopicEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    specificity_level: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    controversy: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    default: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario_id: Option<String>,
    context_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_id: Option<String>,
    persona: String,
    topic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RegistryFile {
    #[serde(default, skip_serializing_if = "is_false")]
    expand: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<u32>,
    #[serde(default)]
    context: BTreeMap<String, TemplateFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    persona: Vec<PersonaEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    topic: Vec<TopicEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scenario: Vec<ScenarioEntry>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn parse_error(origin: &str, message: impl fmt::Display) -> Error {
    Error::Parse { context: origin.to_string(), message: message.to_string() }
}

/// Parse registry TOML. `origin` names the source in error messages.
pub fn parse_registry(text: &str, origin: &str) -> Result<ScenarioRegistry> {
    let file: RegistryFile =
        toml::from_str(text).map_err(|e| parse_error(origin, e.message()))?;

    let mut contexts = BTreeMap::new();
    for (id, raw) in &file.context {
        let mut overrides = BTreeMap::new();
        for (key, value) in &raw.description_overrides {
            let group = PersonaGroup::parse(key)
                .ok_or_else(|| parse_error(origin, format!("unknown persona group: {key}")))?;
            overrides.insert(group, value.clone());
        }
        contexts.insert(
            id.clone(),
            PromptTemplate {
                context_id: id.clone(),
                pattern: raw.pattern.clone(),
                default_persona_pattern: raw.default_persona_pattern.clone(),
                default_topic_pattern: raw.default_topic_pattern.clone(),
                description: raw.description.clone(),
                description_overrides: overrides,
            },
        );
    }

    let mut personas = Vec::new();
    for entry in &file.persona {
        if entry.default {
            personas.push(PersonaRef::Default);
            continue;
        }
        let label = entry
            .label
            .clone()
            .ok_or_else(|| parse_error(origin, "persona entry needs label or default=true"))?;
        let group_name = entry
            .group
            .clone()
            .ok_or_else(|| parse_error(origin, format!("persona {label} missing group")))?;
        let group = PersonaGroup::parse(&group_name)
            .ok_or_else(|| parse_error(origin, format!("unknown persona group: {group_name}")))?;
        personas.push(PersonaRef::Named { label, group });
    }

    let mut topics = Vec::new();
    for entry in &file.topic {
        if entry.default {
            topics.push(TopicRef::Default);
            continue;
        }
        let label = entry
            .label
            .clone()
            .ok_or_else(|| parse_error(origin, "topic entry needs label or default=true"))?;
        let category = entry
            .category
            .clone()
            .ok_or_else(|| parse_error(origin, format!("topic {label} missing category")))?;
        let controversy = match &entry.controversy {
            Some(name) => Some(
                Controversy::parse(name)
                    .ok_or_else(|| parse_error(origin, format!("unknown controversy: {name}")))?,
            ),
            None => None,
        };
        topics.push(TopicRef::Named {
            label,
            category,
            specificity_level: entry.specificity_level,
            controversy,
        });
    }

    let find_persona = |key: &str| -> Result<PersonaRef> {
        if key == "_" {
            return Ok(PersonaRef::Default);
        }
        personas
            .iter()
            .find(|p| p.label() == Some(key))
            .cloned()
            .ok_or_else(|| parse_error(origin, format!("scenario references unknown persona: {key}")))
    };
    let find_topic = |key: &str| -> Result<TopicRef> {
        if key == "_" {
            return Ok(TopicRef::Default);
        }
        topics
            .iter()
            .find(|t| t.label() == Some(key))
            .cloned()
            .ok_or_else(|| parse_error(origin, format!("scenario references unknown topic: {key}")))
    };

    let mut scenarios = Vec::new();
    if file.expand {
        let model_id = file
            .model_id
            .clone()
            .ok_or_else(|| parse_error(origin, "expand = true requires a top-level model_id"))?;
        let n_samples = file.n_samples.unwrap_or(100);
        for context_id in contexts.keys() {
            for persona in personas.iter().filter(|p| !p.is_default()) {
                for topic in topics.iter().filter(|t| !t.is_default()) {
                    let scenario_id = format!(
                        "{}__{}__{}",
                        context_id,
                        slugify(persona.label().unwrap_or_default()),
                        slugify(topic.label().unwrap_or_default()),
                    );
                    scenarios.push(ScenarioSpec {
                        scenario_id,
                        context_id: context_id.clone(),
                        model_id: model_id.clone(),
                        persona: persona.clone(),
                        topic: topic.clone(),
                        n_samples,
                    });
                }
            }
        }
    }
    for entry in &file.scenario {
        let persona = find_persona(&entry.persona)?;
        let topic = find_topic(&entry.topic)?;
        let scenario_id = entry.scenario_id.clone().unwrap_or_else(|| {
            format!(
                "{}__{}__{}",
                entry.context_id,
                persona.label().map(slugify).unwrap_or_else(|| "default".into()),
                topic.label().map(slugify).unwrap_or_else(|| "default".into()),
            )
        });
        let model_id = entry
            .model_id
            .clone()
            .or_else(|| file.model_id.clone())
            .ok_or_else(|| {
                parse_error(origin, format!("scenario {scenario_id} missing model_id"))
            })?;
        scenarios.push(ScenarioSpec {
            scenario_id,
            context_id: entry.context_id.clone(),
            model_id,
            persona,
            topic,
            n_samples: entry.n_samples.or(file.n_samples).unwrap_or(100),
        });
    }

    let registry = ScenarioRegistry { contexts, personas, topics, scenarios };
    registry.validate()?;
    Ok(registry)
}

pub fn load_registry(path: &Path) -> Result<ScenarioRegistry> {
    let text = fs::read_to_string(path)?;
    parse_registry(&text, &path.display().to_string())
}

/// Serialize a registry to TOML. Scenario cells are written explicitly,
/// so an expanded registry round-trips to the same value.
pub fn registry_to_string(registry: &ScenarioRegistry) -> Result<String> {
    let mut file = RegistryFile::default();
    for (id, template) in &registry.contexts {
        let mut overrides = BTreeMap::new();
        for (group, value) in &template.description_overrides {
            overrides.insert(group.as_str().to_string(), value.clone());
        }
        file.context.insert(
            id.clone(),
            TemplateFile {
                pattern: template.pattern.clone(),
                default_persona_pattern: template.default_persona_pattern.clone(),
                default_topic_pattern: template.default_topic_pattern.clone(),
                description: template.description.clone(),
                description_overrides: overrides,
            },
        );
    }
    for persona in &registry.personas {
        file.persona.push(match persona {
            PersonaRef::Named { label, group } => PersonaEntry {
                label: Some(label.clone()),
                group: Some(group.as_str().to_string()),
                default: false,
            },
            PersonaRef::Default => PersonaEntry { label: None, group: None, default: true },
        });
    }
    for topic in &registry.topics {
        file.topic.push(match topic {
            TopicRef::Named { label, category, specificity_level, controversy } => TopicEntry {
                label: Some(label.clone()),
                category: Some(category.clone()),
                specificity_level: *specificity_level,
                controversy: controversy.map(|c| c.as_str().to_string()),
                default: false,
            },
            TopicRef::Default => TopicEntry {
                label: None,
                category: None,
                specificity_level: None,
                controversy: None,
                default: true,
            },
        });
    }
    for spec in &registry.scenarios {
        file.scenario.push(ScenarioEntry {
            scenario_id: Some(spec.scenario_id.clone()),
            context_id: spec.context_id.clone(),
            model_id: Some(spec.model_id.clone()),
            persona: spec.persona.label().unwrap_or("_").to_string(),
            topic: spec.topic.label().unwrap_or("_").to_string(),
            n_samples: Some(spec.n_samples),
        });
    }
    toml::to_string_pretty(&file)
        .map_err(|e| Error::Internal(format!("registry serialization failed: {e}")))
}

pub fn save_registry(registry: &ScenarioRegistry, path: &Path) -> Result<()> {
    let text = registry_to_string(registry)?;
    crate::fsutil::write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forum_spec() -> ScenarioSpec {
        ScenarioSpec {
            scenario_id: "forum__nonbinary-person__health".into(),
            context_id: "forum".into(),
            model_id: "m".into(),
            persona: PersonaRef::Named {
                label: "non-binary person".into(),
                group: PersonaGroup::Gender,
            },
            topic: TopicRef::Named {
                label: "health".into(),
                category: "Health".into(),
                specificity_level: Some(1),
                controversy: Some(Controversy::Uncontroversial),
            },
            n_samples: 100,
        }
    }

    #[test]
    fn derive_default_persona_replaces_field() {
        let spec = forum_spec();
        let derived = spec.derive_default_persona().unwrap();
        assert_eq!(derived.persona, PersonaRef::Default);
        assert_eq!(derived.topic, spec.topic);
        assert_eq!(derived.scenario_id, "forum__nonbinary-person__health__default_persona");
        assert!(derived.derive_default_persona().is_err());
    }

    #[test]
    fn derive_default_topic_replaces_field() {
        let spec = forum_spec();
        let derived = spec.derive_default_topic().unwrap();
        assert_eq!(derived.topic, TopicRef::Default);
        assert_eq!(derived.persona, spec.persona);
        assert_eq!(derived.scenario_id, "forum__nonbinary-person__health__default_topic");
        assert!(derived.derive_default_topic().is_err());
    }

    #[test]
    fn derive_rejects_default_input() {
        let dp = forum_spec().derive_default_persona().unwrap();
        assert!(matches!(dp.derive_default_persona(), Err(Error::InvalidScenario(_))));
        let dt = forum_spec().derive_default_topic().unwrap();
        assert!(matches!(dt.derive_default_topic(), Err(Error::InvalidScenario(_))));
        // Defaulting the other field of an already-derived cell is also an
        // error: that would produce the rejected all-default cell.
        assert!(dp.derive_default_topic().is_err());
        assert!(dt.derive_default_persona().is_err());
    }

    #[test]
    fn validate_rejects_all_default_and_zero_samples() {
        let mut spec = forum_spec();
        spec.persona = PersonaRef::Default;
        spec.topic = TopicRef::Default;
        assert!(spec.validate().is_err());

        let mut spec = forum_spec();
        spec.n_samples = 0;
        assert!(spec.validate().is_err());

        let mut spec = forum_spec();
        spec.topic = TopicRef::Named {
            label: "health".into(),
            category: "Health".into(),
            specificity_level: Some(6),
            controversy: None,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn base_label_strips_person_suffix() {
        let p = PersonaRef::Named { label: "liberal person".into(), group: PersonaGroup::Political };
        assert_eq!(p.base_label(), Some("liberal"));
        let p = PersonaRef::Named { label: "man".into(), group: PersonaGroup::Gender };
        assert_eq!(p.base_label(), Some("man"));
    }

    #[test]
    fn slugify_examples() {
        assert_eq!(slugify("Asian person"), "asian-person");
        assert_eq!(slugify("80-year-old person"), "80-year-old-person");
        assert_eq!(slugify("Universal Basic Income (UBI)"), "universal-basic-income-ubi");
        assert_eq!(slugify("the #MeToo movement"), "the-metoo-movement");
        assert_eq!(slugify("  spaced  "), "spaced");
        assert_eq!(slugify(""), "");
    }

    const SMALL_REGISTRY: &str = r#"
expand = true
model_id = "test-model"
n_samples = 4

[context.forum]
pattern = "A(n) {persona} posted the following comment on {topic} to an online forum:"
default_persona_pattern = "A person posted the following comment on {topic} to an online forum."
default_topic_pattern = "A(n) {persona} posted the following comment to an online forum."

[[persona]]
label = "Asian person"
group = "race_ethnicity"

[[persona]]
default = true

[[topic]]
label = "health"
category = "Health"
specificity_level = 1
controversy = "uncontroversial"

[[topic]]
label = "abortion"
category = "ProCon"
controversy = "controversial"
"#;

    #[test]
    fn expand_builds_cross_product() {
        let registry = parse_registry(SMALL_REGISTRY, "inline").unwrap();
        assert_eq!(registry.personas.len(), 2);
        assert_eq!(registry.topics.len(), 2);
        // one named persona x two topics
        assert_eq!(registry.scenarios.len(), 2);
        assert!(registry.get("forum__asian-person__health").is_some());
        assert!(registry.get("forum__asian-person__abortion").is_some());
        assert_eq!(registry.scenarios[0].n_samples, 4);
    }

    #[test]
    fn empty_scenario_list_is_valid() {
        let registry = parse_registry("", "inline").unwrap();
        assert!(registry.scenarios.is_empty());
    }

    #[test]
    fn duplicate_scenario_ids_rejected() {
        let text = r#"
model_id = "m"

[context.forum]
pattern = "A(n) {persona} on {topic}:"
default_persona_pattern = "A person on {topic}:"
default_topic_pattern = "A(n) {persona}:"

[[persona]]
label = "Asian person"
group = "race_ethnicity"

[[topic]]
label = "health"
category = "Health"

[[scenario]]
scenario_id = "dup"
context_id = "forum"
persona = "Asian person"
topic = "health"

[[scenario]]
scenario_id = "dup"
context_id = "forum"
persona = "Asian person"
topic = "health"
"#;
        match parse_registry(text, "inline") {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "dup"),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn unknown_context_rejected() {
        let text = r#"
model_id = "m"

[context.forum]
pattern = "A(n) {persona} on {topic}:"
default_persona_pattern = "A person on {topic}:"
default_topic_pattern = "A(n) {persona}:"

[[persona]]
label = "Asian person"
group = "race_ethnicity"

[[topic]]
label = "health"
category = "Health"

[[scenario]]
context_id = "nosuch"
persona = "Asian person"
topic = "health"
"#;
        assert!(matches!(parse_registry(text, "inline"), Err(Error::UnknownContext { .. })));
    }

    #[test]
    fn underscore_references_default() {
        let text = r#"
model_id = "m"

[context.forum]
pattern = "A(n) {persona} on {topic}:"
default_persona_pattern = "A person on {topic}:"
default_topic_pattern = "A(n) {persona}:"

[[persona]]
label = "Asian person"
group = "race_ethnicity"

[[topic]]
label = "health"
category = "Health"

[[scenario]]
scenario_id = "just-default-persona"
context_id = "forum"
persona = "_"
topic = "health"
"#;
        let registry = parse_registry(text, "inline").unwrap();
        assert!(registry.get("just-default-persona").unwrap().persona.is_default());
    }

    #[test]
    fn round_trip_preserves_registry() {
        let registry = parse_registry(SMALL_REGISTRY, "inline").unwrap();
        let text = registry_to_string(&registry).unwrap();
        let reloaded = parse_registry(&text, "round-trip").unwrap();
        assert_eq!(registry, reloaded);
    }
}
