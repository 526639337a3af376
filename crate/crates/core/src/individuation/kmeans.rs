//! Seeded Lloyd's K-means with k-means++ initialization, plus the
//! V-measure family of clustering-vs-label agreement scores.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath;

const MAX_LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn nearest(point: &[f32], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = vecmath::sq_dist_mixed(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn plus_plus_init(data: &[&[f32]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let as_f64 = |p: &[f32]| p.iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let mut centroids = vec![as_f64(data[rng.random_range(0..n)])];
    let mut d2: Vec<f64> = data.iter().map(|p| vecmath::sq_dist_mixed(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = as_f64(data[next]);
        for (i, p) in data.iter().enumerate() {
            let d = vecmath::sq_dist_mixed(p, &c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(data: &[&[f32]], k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = data.len();
    let dim = data[0].len();
    let mut centroids = plus_plus_init(data, k, rng);
    let mut assignments = vec![usize::MAX; n];

    for _ in 0..MAX_LLOYD_ITERS {
        let mut next: Vec<usize> = Vec::with_capacity(n);
        let mut dists: Vec<f64> = Vec::with_capacity(n);
        for p in data {
            let (c, d) = nearest(p, &centroids);
            next.push(c);
            dists.push(d);
        }
        // Re-home one farthest point per empty cluster.
        let mut counts = vec![0usize; k];
        for &c in &next {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| counts[next[i]] > 1)
                .max_by(|&a, &b| {
                    dists[a].partial_cmp(&dists[b]).unwrap_or(std::cmp::Ordering::Equal)
                });
            if let Some(i) = donor {
                counts[next[i]] -= 1;
                next[i] = empty;
                counts[empty] = 1;
                dists[i] = 0.0;
            }
        }
        let converged = next == assignments;
        assignments = next;
        if converged {
            break;
        }
        centroids = vec![vec![0.0; dim]; k];
        for (p, &c) in data.iter().zip(&assignments) {
            for (m, &v) in centroids[c].iter_mut().zip(*p) {
                *m += v as f64;
            }
        }
        for (c, count) in counts.iter().enumerate() {
            if *count > 0 {
                for m in &mut centroids[c] {
                    *m /= *count as f64;
                }
            }
        }
    }

    let inertia = data
        .iter()
        .zip(&assignments)
        .map(|(p, &c)| vecmath::sq_dist_mixed(p, &centroids[c]))
        .sum();
    KMeansResult { assignments, centroids, inertia }
}

/// K-means with `restarts` independent k-means++ initializations,
/// keeping the run with the lowest inertia. Deterministic per seed.
pub fn kmeans(data: &[&[f32]], k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot fill {k} clusters",
            data.len()
        )));
    }
    let dim = data[0].len();
    for p in data {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(data, k, &mut rng);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub v_measure: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

/// H(target | given) in nats, iterating the joint table in sorted key
/// order. H(target) is this with a constant `given`, so ratios of the
/// two entropies hit exact 0/1 in the degenerate cases.
fn conditional_entropy(target: &[usize], given: &[usize]) -> f64 {
    let n = target.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut marginal: BTreeMap<usize, f64> = BTreeMap::new();
    for (&t, &g) in target.iter().zip(given) {
        *joint.entry((g, t)).or_insert(0.0) += 1.0;
        *marginal.entry(g).or_insert(0.0) += 1.0;
    }
    let mut h = 0.0;
    for ((g, _), &count) in &joint {
        h -= (count / n) * (count / marginal[g]).ln();
    }
    h
}

/// V-measure of a clustering against reference labels, natural log.
/// homogeneity = 1 - H(C|K)/H(C); completeness = 1 - H(K|C)/H(K); either
/// is 1 when its denominator entropy is 0; v = harmonic mean (0 when
/// h + c = 0).
pub fn v_measure(labels: &[usize], clusters: &[usize]) -> Result<ClusterScore> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("label sequence".into()));
    }
    if labels.len() != clusters.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels vs {} cluster assignments",
            labels.len(),
            clusters.len()
        )));
    }
    let constant = vec![0usize; labels.len()];
    let h_c_given_k = conditional_entropy(labels, clusters);
    let h_c = conditional_entropy(labels, &constant);
    let homogeneity = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let h_k_given_c = conditional_entropy(clusters, labels);
    let h_k = conditional_entropy(clusters, &constant);
    let completeness = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    Ok(ClusterScore { v_measure, homogeneity, completeness })
}
