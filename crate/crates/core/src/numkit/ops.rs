use crate::error::{ensure, Result};

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f32 = 1e-12;

/// Numerically stable softmax (max-shifted, normalizer summed in `f64`).
pub fn softmax(logits: &[f32]) -> Result<Vec<f32>> {
    ensure!(!logits.is_empty(), "softmax of an empty vector");
    ensure!(
        logits.iter().all(|v| v.is_finite()),
        "softmax input contains non-finite values"
    );
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (f64::from(v) - f64::from(max)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| (e / sum) as f32).collect())
}

/// `log(softmax(logits))` without forming the probabilities first.
pub fn log_softmax(logits: &[f32]) -> Result<Vec<f32>> {
    ensure!(!logits.is_empty(), "log_softmax of an empty vector");
    let max = f64::from(logits.iter().copied().fold(f32::NEG_INFINITY, f32::max));
    let lse = max
        + logits
            .iter()
            .map(|&v| (f64::from(v) - max).exp())
            .sum::<f64>()
            .ln();
    Ok(logits.iter().map(|&v| (f64::from(v) - lse) as f32).collect())
}

/// `-ln probs[target]`, with the probability clamped below at [`LOG_FLOOR`].
pub fn cross_entropy(probs: &[f32], target: usize) -> Result<f32> {
    ensure!(
        target < probs.len(),
        "cross_entropy target {target} out of range for {} classes",
        probs.len()
    );
    Ok(-(f64::from(probs[target].max(LOG_FLOOR)).ln()) as f32)
}

/// `logsumexp(logits) - logits[target]` evaluated in `f64`, so a loss
/// summed over many steps keeps more precision than the `f32` inputs.
pub fn cross_entropy_logits(logits: &[f32], target: usize) -> Result<f64> {
    ensure!(
        target < logits.len(),
        "cross_entropy target {target} out of range for {} classes",
        logits.len()
    );
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(f64::from(z)));
    ensure!(max.is_finite(), "cross_entropy_logits: non-finite logits");
    let lse = max + logits.iter().map(|&z| (f64::from(z) - max).exp()).sum::<f64>().ln();
    Ok(lse - f64::from(logits[target]))
}

/// Gradient of `cross_entropy_logits` with respect to the logits:
/// `softmax(logits) - onehot(target)`.
pub fn cross_entropy_logits_grad(logits: &[f32], target: usize) -> Result<Vec<f32>> {
    ensure!(
        target < logits.len(),
        "cross_entropy target {target} out of range for {} classes",
        logits.len()
    );
    let mut d = softmax(logits)?;
    d[target] -= 1.0;
    Ok(d)
}

/// Elementwise binary cross-entropy, averaged over components.
pub fn binary_cross_entropy(probs: &[f32], labels: &[f32]) -> Result<f32> {
    ensure!(
        probs.len() == labels.len() && !probs.is_empty(),
        "binary_cross_entropy: {} probabilities vs {} labels",
        probs.len(),
        labels.len()
    );
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = f64::from(p.clamp(LOG_FLOOR, 1.0 - f32::EPSILON / 2.0));
            let y = f64::from(y);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok((total / probs.len() as f64) as f32)
}

pub fn sigmoid(x: f32) -> f32 {
    (1.0 / (1.0 + (-f64::from(x)).exp())) as f32
}

pub fn tanh(x: f32) -> f32 {
    f64::from(x).tanh() as f32
}

pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    let na: f64 = a.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)) as f32
}
