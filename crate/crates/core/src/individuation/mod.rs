//! Individuation: can a classifier tell the target simulation corpus
//! apart from the default-persona corpus? Accuracy near 0.5 means the
//! persona did not individuate; the K-means/V-measure variant is the
//! unsupervised robustness check.

mod forest;
mod kmeans;
mod logistic;

pub use kmeans::{kmeans, v_measure, ClusterScore, KMeansResult};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddedCorpus;
use crate::error::{Error, Result};

/// Test share of each class in the stratified split.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Minimum documents per class for a meaningful split.
pub const MIN_DOCS_PER_CLASS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_a: Vec<usize>,
    pub test_a: Vec<usize>,
    pub train_b: Vec<usize>,
    pub test_b: Vec<usize>,
    pub seed: u64,
    pub fraction: f64,
}

/// Per class, a seeded shuffle sends the first ceil(fraction * n)
/// indices to test and the rest to train.
pub fn stratified_split(n_a: usize, n_b: usize, fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split_class = |n: usize, name: &str| -> Result<(Vec<usize>, Vec<usize>)> {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        let n_test = (fraction * n as f64).ceil() as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::Split(format!(
                "class {name} with {n} items cannot give both partitions at fraction {fraction}"
            )));
        }
        let train = indices.split_off(n_test);
        Ok((train, indices))
    };
    let (train_a, test_a) = split_class(n_a, "a")?;
    let (train_b, test_b) = split_class(n_b, "b")?;
    Ok(SplitPlan { train_a, test_a, train_b, test_b, seed, fraction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    RandomForest { n_trees: usize },
    Logistic { l2: f64, max_iters: usize, tol: f64 },
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::RandomForest { n_trees: 100 }
    }
}

impl ClassifierSpec {
    pub fn logistic_default() -> Self {
        ClassifierSpec::Logistic { l2: 1e-3, max_iters: 5000, tol: 1e-6 }
    }

    pub fn classifier_id(&self) -> String {
        match self {
            ClassifierSpec::RandomForest { n_trees } => format!("forest(n_trees={n_trees})"),
            ClassifierSpec::Logistic { l2, .. } => format!("logistic(l2={l2})"),
        }
    }
}

#[derive(Debug)]
pub struct ClassifierModel(ModelKind);

#[derive(Debug)]
enum ModelKind {
    Forest(forest::Forest),
    Logistic(logistic::Logistic),
}

impl ClassifierModel {
    pub fn predict(&self, x: &[f32]) -> u8 {
        match &self.0 {
            ModelKind::Forest(f) => f.predict(x),
            ModelKind::Logistic(m) => m.predict(x),
        }
    }
}

/// Fit a binary classifier on labeled vectors (labels 0/1).
pub fn train_classifier(
    x: &[&[f32]],
    y: &[u8],
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<ClassifierModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} vectors vs {} labels",
            x.len(),
            y.len()
        )));
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(ClassifierModel(match spec {
        ClassifierSpec::RandomForest { n_trees } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ModelKind::Forest(forest::train_forest(x, y, *n_trees, &mut rng))
        }
        ClassifierSpec::Logistic { l2, max_iters, tol } => {
            ModelKind::Logistic(logistic::train_logistic(x, y, *l2, *max_iters, *tol))
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividuationScore {
    pub accuracy: f64,
    pub classifier_id: String,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

fn check_comparable(a: &EmbeddedCorpus, b: &EmbeddedCorpus) -> Result<()> {
    if a.embedder_id != b.embedder_id {
        return Err(Error::IncomparableCorpora {
            left: a.embedder_id.clone(),
            right: b.embedder_id.clone(),
        });
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    Ok(())
}

/// Train/test accuracy of separating the target corpus (class 0) from
/// the default-persona corpus (class 1) on document vectors, using a
/// stratified 80/20 split.
pub fn individuation_score(
    target: &EmbeddedCorpus,
    default_persona: &EmbeddedCorpus,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<IndividuationScore> {
    check_comparable(target, default_persona)?;
    for corpus in [target, default_persona] {
        if corpus.n_docs() < MIN_DOCS_PER_CLASS {
            return Err(Error::TooFewSamples {
                found: corpus.n_docs(),
                need: MIN_DOCS_PER_CLASS,
            });
        }
    }
    let plan = stratified_split(
        target.n_docs(),
        default_persona.n_docs(),
        DEFAULT_TEST_FRACTION,
        seed,
    )?;

    let mut train_x: Vec<&[f32]> = Vec::with_capacity(plan.train_a.len() + plan.train_b.len());
    let mut train_y: Vec<u8> = Vec::with_capacity(train_x.capacity());
    for &i in &plan.train_a {
        train_x.push(&target.doc_vectors[i]);
        train_y.push(0);
    }
    for &i in &plan.train_b {
        train_x.push(&default_persona.doc_vectors[i]);
        train_y.push(1);
    }
    let model = train_classifier(&train_x, &train_y, spec, seed)?;

    let mut correct = 0usize;
    for &i in &plan.test_a {
        if model.predict(&target.doc_vectors[i]) == 0 {
            correct += 1;
        }
    }
    for &i in &plan.test_b {
        if model.predict(&default_persona.doc_vectors[i]) == 1 {
            correct += 1;
        }
    }
    let n_test = plan.test_a.len() + plan.test_b.len();
    Ok(IndividuationScore {
        accuracy: correct as f64 / n_test as f64,
        classifier_id: spec.classifier_id(),
        n_train: train_y.len(),
        n_test,
        seed,
    })
}

/// Unsupervised variant: K-means over the pooled document vectors,
/// V-measure against the true corpus labels.
pub fn vmeasure_score(
    target: &EmbeddedCorpus,
    default_persona: &EmbeddedCorpus,
    k: usize,
    seed: u64,
) -> Result<ClusterScore> {
    check_comparable(target, default_persona)?;
    let mut data: Vec<&[f32]> = Vec::with_capacity(target.n_docs() + default_persona.n_docs());
    let mut labels: Vec<usize> = Vec::with_capacity(data.capacity());
    for v in &target.doc_vectors {
        data.push(v);
        labels.push(0);
    }
    for v in &default_persona.doc_vectors {
        data.push(v);
        labels.push(1);
    }
    let result = kmeans(&data, k, 10, seed)?;
    v_measure(&labels, &result.assignments)
}

/// Wilson score interval for a binomial proportion, clamped to [0, 1].
pub fn wilson_interval(correct: u64, total: u64, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = correct as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}
