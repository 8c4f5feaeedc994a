use crate::error::{Error, Result};

/// Squared L2 distance `sum (u_hat - u)^2` and its gradient `2 (u_hat - u)`
/// with respect to `u_hat`.
pub fn mse_loss(u: &[f64], u_hat: &[f64]) -> Result<(f64, Vec<f64>)> {
    if u.len() != u_hat.len() {
        return Err(Error::Shape {
            expected: u.len(),
            actual: u_hat.len(),
        });
    }
    let mut loss = 0.0;
    let grad = u
        .iter()
        .zip(u_hat)
        .map(|(&a, &b)| {
            let e = b - a;
            loss += e * e;
            2.0 * e
        })
        .collect();
    Ok((loss, grad))
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot`.
pub fn ce_loss(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::domain(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_norm = max + sum.ln();
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - log_norm).exp()).collect();
    grad[label] -= 1.0;
    Ok((log_norm - logits[label], grad))
}

/// The weighted objective `lambda * mse + ce` for one example.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedLoss {
    pub mse: f64,
    pub ce: f64,
    pub total: f64,
    /// Gradient of the total w.r.t. the reconstruction through the MSE
    /// term only; the classifier's share arrives by backpropagation.
    pub grad_reconstruction: Vec<f64>,
    pub grad_logits: Vec<f64>,
}

pub fn combined_loss(u: &[f64], u_hat: &[f64], logits: &[f64], label: usize, lambda: f64) -> Result<CombinedLoss> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("loss weight lambda = {lambda} must be >= 0")));
    }
    let (mse, mut grad_reconstruction) = mse_loss(u, u_hat)?;
    let (ce, grad_logits) = ce_loss(logits, label)?;
    grad_reconstruction.iter_mut().for_each(|g| *g *= lambda);
    Ok(CombinedLoss {
        mse,
        ce,
        total: lambda * mse + ce,
        grad_reconstruction,
        grad_logits,
    })
}

/// Index of the largest logit (first one on ties).
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
