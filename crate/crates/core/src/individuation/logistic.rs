//! L2-regularized logistic regression trained by full-batch gradient
//! descent from a zero initialization. Fully deterministic: the step
//! size comes from the Lipschitz bound of the loss, not a line search.

#[derive(Debug, Clone)]
pub(crate) struct Logistic {
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Logistic {
    fn margin(&self, x: &[f32]) -> f64 {
        let mut z = self.bias;
        for (w, &v) in self.weights.iter().zip(x) {
            z += w * v as f64;
        }
        z
    }

    pub(crate) fn predict_proba(&self, x: &[f32]) -> f64 {
        sigmoid(self.margin(x))
    }

    /// Class 1 only on strict p > 0.5; the 0.5 boundary goes to class 0.
    pub(crate) fn predict(&self, x: &[f32]) -> u8 {
        u8::from(self.predict_proba(x) > 0.5)
    }
}

pub(crate) fn train_logistic(
    x: &[&[f32]],
    y: &[u8],
    l2: f64,
    max_iters: usize,
    tol: f64,
) -> Logistic {
    let n = x.len();
    let d = x[0].len();
    let mut model = Logistic { weights: vec![0.0; d], bias: 0.0 };

    // Step = 1/L with L an upper bound on the Hessian norm of the mean
    // cross-entropy (0.25 * mean augmented squared norm) plus the ridge.
    let mean_sq: f64 = x
        .iter()
        .map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() + 1.0)
        .sum::<f64>()
        / n as f64;
    let step = 1.0 / (0.25 * mean_sq + l2);

    let mut grad_w = vec![0.0f64; d];
    for _ in 0..max_iters {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0f64;
        for (row, &label) in x.iter().zip(y) {
            let err = model.predict_proba(row) - label as f64;
            for (g, &v) in grad_w.iter_mut().zip(*row) {
                *g += err * v as f64;
            }
            grad_b += err;
        }
        let inv_n = 1.0 / n as f64;
        for (g, w) in grad_w.iter_mut().zip(&model.weights) {
            *g = *g * inv_n + l2 * w;
        }
        grad_b *= inv_n;

        let grad_norm =
            (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if grad_norm < tol {
            break;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= step * g;
        }
        model.bias -= step * grad_b;
    }
    model
}
