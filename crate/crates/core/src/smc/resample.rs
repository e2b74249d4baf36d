//! Weight normalisation, effective sample size and systematic resampling.

use rand::Rng;

/// `log(sum(exp(xs)))`, stable for large magnitudes. `-inf` for empty input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Turns log-weights into normalised weights; returns the log of their sum.
pub fn normalize_log_weights(log_w: &[f64], out: &mut Vec<f64>) -> f64 {
    let lse = log_sum_exp(log_w);
    out.clear();
    out.extend(log_w.iter().map(|&l| (l - lse).exp()));
    // Renormalise once more so the sum is 1 to machine precision.
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|w| *w /= s);
    lse
}

/// Effective sample size `1 / sum(w^2)` of normalised weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: `n` ancestor indices from normalised `weights`
/// using a single uniform offset.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let last = weights.len() - 1;
    let mut i = 0;
    for _ in 0..n {
        while i < last && cum + weights[i] <= u {
            cum += weights[i];
            i += 1;
        }
        out.push(i);
        u += step;
    }
    out
}

/// Weighted quantile of `values` (linear scan over the sorted sample).
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let target = q.clamp(0.0, 1.0) * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= target {
            return values[i];
        }
    }
    values[*order.last().expect("non-empty sample")]
}
