//! Entropy, summary statistics and the percentile bootstrap.

use rand::Rng;
use serde::Serialize;

use super::AnalysisError;
use crate::seed::stream_rng;

/// Shannon entropy in bits. Zero-probability entries contribute nothing.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| x * (1.0 / x).log2()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation over √n; zero when `n == 1`.
    pub stderr: f64,
    pub max: f64,
    pub n: usize,
}

pub fn metric_summary(values: &[f64]) -> Result<MetricSummary, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MetricSummary { mean, stderr, max, n })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(values: &[f64], resamples: usize, alpha: f64, seed: u64) -> Result<(f64, f64), AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if resamples == 0 {
        return Err(AnalysisError::Contract("resamples must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::Contract("alpha must lie in (0, 1)".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok((quantile(&means, alpha / 2.0), quantile(&means, 1.0 - alpha / 2.0)))
}

/// Bin of `turn` when turns `0..=max_turn` are split into `bins` equal parts.
pub fn bin_index(turn: u32, max_turn: u32, bins: u32) -> u32 {
    assert!(bins >= 1, "bins must be positive");
    ((turn as u64 * bins as u64) / (max_turn as u64 + 1)) as u32
}

/// Groups `turns` (one game's moves) into `bins` equal-width bins over
/// `[0, max turn]`. Returns an index list per bin.
pub fn bin_by_turn(turns: &[u32], bins: u32) -> Result<Vec<Vec<usize>>, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::Contract("bins must be at least 1".into()));
    }
    let max_turn = turns.iter().copied().max().unwrap_or(0);
    let mut out = vec![Vec::new(); bins as usize];
    for (i, &t) in turns.iter().enumerate() {
        out[bin_index(t, max_turn, bins) as usize].push(i);
    }
    Ok(out)
}
