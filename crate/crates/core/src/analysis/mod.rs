//! Aggregation of per-scenario scores across the scenario dimensions,
//! with standard errors and 95% confidence intervals.

pub mod power;
pub mod report;

pub use power::{required_sample_size, PowerRequest, Sides};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioSpec;
use crate::vecmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Persona,
    Topic,
    PersonaTopic,
    Context,
}

impl Dimension {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::Persona => "persona",
            Dimension::Topic => "topic",
            Dimension::PersonaTopic => "persona_topic",
            Dimension::Context => "context",
        }
    }

    pub fn parse(s: &str) -> Option<Dimension> {
        match s {
            "persona" => Some(Dimension::Persona),
            "topic" => Some(Dimension::Topic),
            "persona_topic" => Some(Dimension::PersonaTopic),
            "context" => Some(Dimension::Context),
            _ => None,
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dimension: Dimension,
    pub value: String,
    pub mean: f64,
    pub std_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n_cells: usize,
}

fn group_value(scenario: &ScenarioSpec, dimension: Dimension) -> Result<String> {
    let missing = |what: &str| {
        Error::InvalidArgument(format!(
            "scenario {} has no {what} label for dimension {dimension}",
            scenario.scenario_id
        ))
    };
    match dimension {
        Dimension::Persona => {
            Ok(scenario.persona.label().ok_or_else(|| missing("persona"))?.to_string())
        }
        Dimension::Topic => {
            Ok(scenario.topic.label().ok_or_else(|| missing("topic"))?.to_string())
        }
        Dimension::PersonaTopic => {
            let p = scenario.persona.label().ok_or_else(|| missing("persona"))?;
            let t = scenario.topic.label().ok_or_else(|| missing("topic"))?;
            Ok(format!("{p}|{t}"))
        }
        Dimension::Context => Ok(scenario.context_id.clone()),
    }
}

/// Group scores by the scenario's value on one dimension, then report
/// mean, SE (n-1 sample std over sqrt n; 0 for singletons), and the
/// normal 95% CI. Rows come back mean-descending, ties value-ascending.
pub fn aggregate(scores: &[(&ScenarioSpec, f64)], dimension: Dimension) -> Result<Vec<AggregateRow>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("score list for aggregation".into()));
    }
    let mut groups: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for (scenario, score) in scores {
        groups.entry(group_value(scenario, dimension)?).or_default().push(*score);
    }
    let mut rows: Vec<AggregateRow> = groups
        .into_iter()
        .map(|(value, values)| {
            let (mean, se) = vecmath::mean_and_se(&values);
            let std_error = se.unwrap_or(0.0);
            AggregateRow {
                dimension,
                value,
                mean,
                std_error,
                ci95_low: mean - 1.96 * std_error,
                ci95_high: mean + 1.96 * std_error,
                n_cells: values.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean
            .partial_cmp(&a.mean)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.value.cmp(&b.value))
    });
    Ok(rows)
}
