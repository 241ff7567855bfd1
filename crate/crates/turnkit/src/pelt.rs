//! Penalized change-point detection with pruned exact search.
//!
//! The optimizer minimizes the sum over segments of an L2 deviation-from-mean
//! cost plus a per-segment penalty. Candidate last-change-points are pruned
//! with the standard dominance inequality, which preserves exactness for this
//! cost family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Method, TurnEvent};

/// Segment cost family. Only the L2 deviation-from-segment-mean cost is
/// implemented; it matches mean-shift changes and admits zero-margin pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    #[default]
    L2Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeltConfig {
    /// Per-segment penalty. `None` selects `2 * sigma^2 * ln n` with a
    /// robust noise estimate from first differences.
    pub beta: Option<f64>,
    /// Minimum number of points per segment.
    pub min_segment: usize,
    pub cost: CostKind,
}

impl Default for PeltConfig {
    fn default() -> Self {
        PeltConfig {
            beta: None,
            min_segment: 2,
            cost: CostKind::L2Mean,
        }
    }
}

/// Prefix-sum backed L2 segment cost, O(1) per query after O(n) setup.
#[derive(Debug, Clone)]
pub struct SegmentCost {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl SegmentCost {
    pub fn new(series: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(series.len() + 1);
        let mut sum_sq = Vec::with_capacity(series.len() + 1);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &x in series {
            sum.push(sum.last().unwrap() + x);
            sum_sq.push(sum_sq.last().unwrap() + x * x);
        }
        SegmentCost { sum, sum_sq }
    }

    /// Sum of squared deviations from the mean over the inclusive range `[a, b]`.
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a <= b && b + 1 < self.sum.len());
        let n = (b - a + 1) as f64;
        let s = self.sum[b + 1] - self.sum[a];
        let sq = self.sum_sq[b + 1] - self.sum_sq[a];
        (sq - s * s / n).max(0.0)
    }
}

/// Convenience wrapper for one-off cost queries.
pub fn segment_cost(series: &[f64], a: usize, b: usize) -> f64 {
    SegmentCost::new(series).cost(a, b)
}

/// Robust noise scale from first differences.
///
/// Mean shifts contaminate only a handful of differences, so the median
/// absolute deviation of the differenced series estimates the noise level
/// regardless of segment structure. Falls back to the standard deviation of
/// differences when the MAD collapses to zero.
pub fn noise_sigma(series: &[f64]) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let mut diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(f64::total_cmp);
    let med = median_of_sorted(&diffs);
    let mut abs_dev: Vec<f64> = diffs.iter().map(|d| (d - med).abs()).collect();
    abs_dev.sort_by(f64::total_cmp);
    let mad = median_of_sorted(&abs_dev);
    if mad > 0.0 {
        return mad * 1.4826 / std::f64::consts::SQRT_2;
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
    (var / 2.0).sqrt()
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Effective penalty for a series under a config.
pub fn effective_beta(series: &[f64], cfg: &PeltConfig) -> f64 {
    match cfg.beta {
        Some(b) => b,
        None => {
            let sigma = noise_sigma(series);
            if sigma > 0.0 {
                2.0 * sigma * sigma * (series.len() as f64).ln()
            } else {
                // noiseless series: any positive penalty suppresses
                // zero-gain splits
                1.0
            }
        }
    }
}

/// Exact penalized change-point search with candidate pruning.
///
/// Returns the 0-based indices of the first element of each new segment,
/// in increasing order.
pub fn pelt(series: &[f64], cfg: &PeltConfig) -> Result<Vec<usize>> {
    Ok(pelt_impl(series, cfg, true)?.0)
}

/// Same optimizer with pruning disabled; used to validate the pruned path.
pub fn pelt_unpruned(series: &[f64], cfg: &PeltConfig) -> Result<Vec<usize>> {
    Ok(pelt_impl(series, cfg, false)?.0)
}

/// Change points together with the minimized total penalized cost
/// (sum over segments of cost plus penalty).
pub fn pelt_with_cost(series: &[f64], cfg: &PeltConfig) -> Result<(Vec<usize>, f64)> {
    pelt_impl(series, cfg, true)
}

fn pelt_impl(series: &[f64], cfg: &PeltConfig, prune: bool) -> Result<(Vec<usize>, f64)> {
    let n = series.len();
    let min_seg = cfg.min_segment.max(1);
    if n < 2 * min_seg {
        return Err(Error::InsufficientData(format!(
            "series of length {n} cannot hold two segments of {min_seg}"
        )));
    }
    let beta = effective_beta(series, cfg);
    if beta < 0.0 {
        return Err(Error::Config(format!("penalty must be nonnegative, got {beta}")));
    }
    let cost = SegmentCost::new(series);

    // f[t] = optimal penalized cost of the prefix of length t, with the
    // first segment's penalty netted out by f[0] = -beta.
    let mut f = vec![f64::INFINITY; n + 1];
    f[0] = -beta;
    let mut last_cp = vec![0usize; n + 1];

    // Candidate last-change-points, each with the time from which it may be
    // dropped. A candidate dominated at time t is only provably useless once
    // the dominating point t itself becomes admissible, i.e. from
    // t + min_seg on; removing it earlier would break exactness.
    let mut candidates: Vec<(usize, usize)> = vec![(0, usize::MAX)];

    for t in 1..=n {
        if t >= 2 * min_seg {
            candidates.push((t - min_seg, usize::MAX));
        }
        if prune {
            candidates.retain(|&(_, deadline)| deadline > t);
        }
        let mut best = f64::INFINITY;
        let mut best_s = 0usize;
        for &(s, _) in &candidates {
            if t - s < min_seg {
                continue;
            }
            let total = f[s] + cost.cost(s, t - 1) + beta;
            if total < best {
                best = total;
                best_s = s;
            }
        }
        f[t] = best;
        last_cp[t] = best_s;
        if prune && best.is_finite() {
            for (s, deadline) in &mut candidates {
                if *deadline == usize::MAX
                    && t - *s >= min_seg
                    && f[*s] + cost.cost(*s, t - 1) >= best
                {
                    *deadline = t + min_seg;
                }
            }
        }
    }

    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last_cp[t];
        if s == 0 {
            break;
        }
        cps.push(s);
        t = s;
    }
    cps.reverse();
    Ok((cps, f[n] + beta))
}

/// Turn events from PELT change points: each change point spans
/// `min_segment - 1` steps to either side, clipped to the series.
pub fn pelt_events(series: &[f64], cfg: &PeltConfig) -> Result<Vec<TurnEvent>> {
    let n = series.len();
    let halo = cfg.min_segment.saturating_sub(1);
    Ok(pelt(series, cfg)?
        .into_iter()
        .map(|cp| {
            TurnEvent::new(
                cp.saturating_sub(halo),
                (cp + halo).min(n - 1),
                Method::Pelt,
                1.0,
            )
        })
        .collect())
}
