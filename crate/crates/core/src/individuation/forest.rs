//! Random forest for binary labels: bagged CART trees with Gini
//! impurity, a per-node feature subsample of ceil(sqrt(d)), and
//! unlimited depth. All ties break toward class 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
enum Node {
    Leaf(u8),
    Split { feature: usize, threshold: f32, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn predict(&self, x: &[f32]) -> u8 {
        match self {
            Node::Leaf(class) => *class,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug)]
pub(crate) struct Forest {
    trees: Vec<Node>,
}

impl Forest {
    pub(crate) fn predict(&self, x: &[f32]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict(x) == 1).count();
        // Strict majority for class 1; ties go to class 0.
        u8::from(2 * ones > self.trees.len())
    }
}

fn majority(y: &[u8], indices: &[usize]) -> u8 {
    let ones = indices.iter().filter(|&&i| y[i] == 1).count();
    u8::from(2 * ones > indices.len())
}

fn gini(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = n0 as f64 / n;
    let p1 = n1 as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct BestSplit {
    feature: usize,
    threshold: f32,
    weighted_gini: f64,
}

/// Best (feature, threshold) over a random feature subsample; thresholds
/// sit on the left value of each adjacent distinct pair, so both children
/// are guaranteed non-empty.
fn find_split(
    x: &[&[f32]],
    y: &[u8],
    indices: &[usize],
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> Option<BestSplit> {
    let d = x[0].len();
    let features = rand::seq::index::sample(rng, d, max_features.min(d));
    let total1 = indices.iter().filter(|&&i| y[i] == 1).count();
    let n = indices.len();
    let parent = gini(n - total1, total1);
    let mut best: Option<BestSplit> = None;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    for feature in features {
        order.clear();
        order.extend_from_slice(indices);
        order.sort_by(|&a, &b| {
            x[a][feature].partial_cmp(&x[b][feature]).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut left1 = 0usize;
        for (pos, &i) in order.iter().enumerate() {
            if y[i] == 1 {
                left1 += 1;
            }
            let next = match order.get(pos + 1) {
                Some(&j) => j,
                None => break,
            };
            if x[i][feature] >= x[next][feature] {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            let right1 = total1 - left1;
            let weighted = (nl as f64 / n as f64) * gini(nl - left1, left1)
                + (nr as f64 / n as f64) * gini(nr - right1, right1);
            if weighted < parent
                && best.as_ref().map_or(true, |b| weighted < b.weighted_gini)
            {
                best = Some(BestSplit {
                    feature,
                    threshold: x[i][feature],
                    weighted_gini: weighted,
                });
            }
        }
    }
    best
}

fn grow(
    x: &[&[f32]],
    y: &[u8],
    indices: &[usize],
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    let ones = indices.iter().filter(|&&i| y[i] == 1).count();
    if ones == 0 || ones == indices.len() {
        return Node::Leaf(if ones == 0 { 0 } else { 1 });
    }
    match find_split(x, y, indices, max_features, rng) {
        None => Node::Leaf(majority(y, indices)),
        Some(split) => {
            let (left, right): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| x[i][split.feature] <= split.threshold);
            let left = grow(x, y, &left, max_features, rng);
            let right = grow(x, y, &right, max_features, rng);
            Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

pub(crate) fn train_forest(
    x: &[&[f32]],
    y: &[u8],
    n_trees: usize,
    rng: &mut ChaCha8Rng,
) -> Forest {
    let d = x[0].len();
    let max_features = (d as f64).sqrt().ceil() as usize;
    let n = x.len();
    let trees = (0..n_trees)
        .map(|_| {
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow(x, y, &sample, max_features, rng)
        })
        .collect();
    Forest { trees }
}
