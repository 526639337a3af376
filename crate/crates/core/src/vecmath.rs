//! Small dense-vector helpers shared by the embedding, axis, and
//! classification modules. Accumulation happens in f64 even when the
//! stored vectors are f32 so that results do not depend on summation
//! order at f32 precision.

use crate::error::{Error, Result};

/// Dot product with f64 accumulation.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_f32(a: &[f32]) -> f64 {
    dot_f32(a, a).sqrt()
}

pub fn norm_f64(a: &[f64]) -> f64 {
    dot_f64(a, a).sqrt()
}

/// Cosine similarity between an f32 vector and an f64 axis.
/// Returns 0.0 when either side has zero norm.
pub fn cosine_mixed(doc: &[f32], axis: &[f64]) -> f64 {
    debug_assert_eq!(doc.len(), axis.len());
    let mut dot = 0.0f64;
    let mut nd = 0.0f64;
    let mut na = 0.0f64;
    for (x, y) in doc.iter().zip(axis) {
        let x = *x as f64;
        dot += x * y;
        nd += x * x;
        na += y * y;
    }
    if nd == 0.0 || na == 0.0 {
        0.0
    } else {
        dot / (nd.sqrt() * na.sqrt())
    }
}

/// Cosine similarity between two f32 vectors; 0.0 for zero-norm input.
pub fn cosine_f32(a: &[f32], b: &[f32]) -> f64 {
    let na = norm_f32(a);
    let nb = norm_f32(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot_f32(a, b) / (na * nb)
    }
}

/// Normalize in f64, then quantize each component back to f32.
/// A zero vector is returned unchanged.
pub fn normalize_to_f32(v: &[f32]) -> Vec<f32> {
    let n = norm_f32(v);
    if n == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| ((*x as f64) / n) as f32).collect()
}

/// Component-wise mean of f32 vectors, accumulated in f64.
pub fn mean_f32(vectors: &[&[f32]]) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("mean of zero vectors".into()));
    }
    let dim = vectors[0].len();
    let mut acc = vec![0.0f64; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += *x as f64;
        }
    }
    let n = vectors.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(acc)
}

/// Squared euclidean distance between f64 vectors.
pub fn sq_dist_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared euclidean distance of an f32 point from an f64 centroid.
pub fn sq_dist_mixed(point: &[f32], centroid: &[f64]) -> f64 {
    debug_assert_eq!(point.len(), centroid.len());
    point
        .iter()
        .zip(centroid)
        .map(|(x, y)| {
            let d = *x as f64 - y;
            d * d
        })
        .sum()
}

/// Sample mean and unbiased standard error of a slice of scores.
/// Standard error is None when fewer than two values are present.
pub fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some((var / n as f64).sqrt()))
}
