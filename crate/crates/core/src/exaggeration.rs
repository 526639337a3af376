//! Exaggeration scoring: how far along the persona-topic axis a target
//! corpus sits, normalized so the default-persona corpus anchors 0 and
//! the default-topic corpus anchors 1.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::axis::{SemanticAxis, AXIS_NORM_FLOOR};
use crate::embed::EmbeddedCorpus;
use crate::error::{Error, Result};
use crate::vecmath;

/// Denominators smaller than this in magnitude are degenerate.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExFlag {
    DegenerateDenominator,
    OutOfUnitRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaggerationScore {
    /// Mean cosine of the target corpus against the axis.
    pub raw: f64,
    /// (raw - raw_default_persona) / denominator; unset when degenerate.
    /// Not clipped: values outside [0,1] are reported and flagged.
    pub normalized: Option<f64>,
    /// raw_default_topic - raw_default_persona; its sign is meaningful
    /// (negative means the axis failed to order the anchors).
    pub denominator: f64,
    pub raw_default_persona: f64,
    pub raw_default_topic: f64,
    pub flags: BTreeSet<ExFlag>,
}

fn check_against_axis(corpus: &EmbeddedCorpus, axis: &SemanticAxis) -> Result<()> {
    if corpus.embedder_id != axis.embedder_id {
        return Err(Error::IncomparableCorpora {
            left: corpus.embedder_id.clone(),
            right: axis.embedder_id.clone(),
        });
    }
    if corpus.dim != axis.dim {
        return Err(Error::DimensionMismatch { expected: axis.dim, found: corpus.dim });
    }
    Ok(())
}

/// Cosine of each document vector against the axis.
pub fn per_doc_cosines(corpus: &EmbeddedCorpus, axis: &SemanticAxis) -> Result<Vec<f64>> {
    check_against_axis(corpus, axis)?;
    if corpus.n_docs() == 0 {
        return Err(Error::EmptyInput(format!("corpus {} has no documents", corpus.scenario_id)));
    }
    let norm = axis.axis_norm();
    if norm < AXIS_NORM_FLOOR {
        return Err(Error::AxisDegenerate { norm });
    }
    Ok(corpus
        .doc_vectors
        .iter()
        .map(|doc| vecmath::cosine_mixed(doc, &axis.axis))
        .collect())
}

/// Arithmetic mean over documents of cos(doc, axis).
pub fn mean_axis_cosine(corpus: &EmbeddedCorpus, axis: &SemanticAxis) -> Result<f64> {
    let cosines = per_doc_cosines(corpus, axis)?;
    Ok(cosines.iter().sum::<f64>() / cosines.len() as f64)
}

/// Normalized exaggeration of the target corpus between the
/// default-persona anchor (0) and default-topic anchor (1). Anchors fed
/// back in as the target reproduce the endpoints exactly because the
/// floating-point path is identical.
pub fn exaggeration_score(
    target: &EmbeddedCorpus,
    default_persona: &EmbeddedCorpus,
    default_topic: &EmbeddedCorpus,
    axis: &SemanticAxis,
) -> Result<ExaggerationScore> {
    let raw = mean_axis_cosine(target, axis)?;
    let raw_default_persona = mean_axis_cosine(default_persona, axis)?;
    let raw_default_topic = mean_axis_cosine(default_topic, axis)?;
    let denominator = raw_default_topic - raw_default_persona;

    let mut flags = BTreeSet::new();
    let normalized = if denominator.abs() < DENOMINATOR_FLOOR {
        flags.insert(ExFlag::DegenerateDenominator);
        None
    } else {
        let value = (raw - raw_default_persona) / denominator;
        if !(0.0..=1.0).contains(&value) {
            flags.insert(ExFlag::OutOfUnitRange);
        }
        Some(value)
    };
    Ok(ExaggerationScore {
        raw,
        normalized,
        denominator,
        raw_default_persona,
        raw_default_topic,
        flags,
    })
}
