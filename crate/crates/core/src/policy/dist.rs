//! Categorical distribution helpers over action logits.

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Shannon entropy (nats) of the softmax of `logits`.
pub fn entropy(logits: &[f64]) -> f64 {
    log_softmax(logits)
        .iter()
        .map(|lp| if lp.is_finite() { -lp.exp() * lp } else { 0.0 })
        .sum()
}

/// Index of the largest logit; ties go to the lower index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF sample for one uniform draw `u` in [0, 1). Returns the index
/// and its log-probability.
pub fn sample_with(logits: &[f64], u: f64) -> (usize, f64) {
    let logp = log_softmax(logits);
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            chosen = Some(i);
            break;
        }
    }
    // rounding can leave acc slightly below 1; fall back to the last
    // action with nonzero mass
    let i = chosen.unwrap_or_else(|| {
        logp.iter()
            .rposition(|lp| lp.exp() > 0.0)
            .unwrap_or(logits.len() - 1)
    });
    (i, logp[i])
}

/// Draws one action from `rng`.
pub fn sample_action<R: rand::Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    sample_with(logits, rng.random::<f64>())
}
