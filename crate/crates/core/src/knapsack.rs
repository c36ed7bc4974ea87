//! Minimum-cost cover knapsack with real weights.
//!
//! Picks `J` minimising `Σ_J values` subject to `Σ_J weights ≥ threshold`.
//! Solved through the complement: exclude a maximum-value set whose weight
//! fits in the slack `Σ weights − threshold`, using a 0/1 knapsack DP on
//! weights quantised to `resolution` units of the slack.

use crate::error::{Error, Result};

/// Upper bound on the DP choice table, in bits. Larger instances run at a
/// coarser effective resolution.
pub const MAX_DP_BITS: usize = 1 << 28;

pub fn knapsack_min_cover(
    values: &[f64],
    weights: &[f64],
    threshold: f64,
    resolution: usize,
) -> Result<Vec<usize>> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} weights", values.len()),
            got: format!("{}", weights.len()),
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidConfig("knapsack resolution must be at least 1".into()));
    }
    for (k, (&v, &w)) in values.iter().zip(weights).enumerate() {
        if !(v >= 0.0 && v.is_finite() && w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "item {k}: values and weights must be finite and non-negative"
            )));
        }
    }
    let total: f64 = weights.iter().sum();
    if threshold <= 0.0 {
        return Ok(Vec::new());
    }
    if total < threshold {
        return Err(Error::KnapsackInfeasible { total, threshold });
    }
    // Zero-weight items never help a cover.
    let items: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    let slack = total - threshold;
    if slack <= 0.0 {
        return Ok(items);
    }

    let res = resolution.min(MAX_DP_BITS / items.len().max(1)).max(1);
    let unit = slack / res as f64;
    let cap = res;
    let qw: Vec<usize> = items
        .iter()
        .map(|&k| {
            let q = (weights[k] / unit).round();
            if q > cap as f64 {
                cap + 1
            } else {
                q as usize
            }
        })
        .collect();

    let words = (cap + 1).div_ceil(64);
    let mut take = vec![0u64; items.len() * words];
    let mut best = vec![0.0f64; cap + 1];
    for (t, &k) in items.iter().enumerate() {
        let w = qw[t];
        if w > cap {
            continue;
        }
        let row = &mut take[t * words..(t + 1) * words];
        for c in (w..=cap).rev() {
            let cand = best[c - w] + values[k];
            if cand > best[c] {
                best[c] = cand;
                row[c / 64] |= 1 << (c % 64);
            }
        }
    }

    let mut excluded = vec![false; items.len()];
    let mut c = cap;
    for t in (0..items.len()).rev() {
        if take[t * words + c / 64] >> (c % 64) & 1 == 1 {
            excluded[t] = true;
            c -= qw[t];
        }
    }

    let mut chosen: Vec<usize> = Vec::new();
    let mut left_out: Vec<usize> = Vec::new();
    for (t, &k) in items.iter().enumerate() {
        if excluded[t] {
            left_out.push(k);
        } else {
            chosen.push(k);
        }
    }
    // Quantisation may leave the cover marginally short.
    let mut covered: f64 = chosen.iter().map(|&k| weights[k]).sum();
    if covered < threshold {
        left_out.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        for k in left_out {
            if covered >= threshold {
                break;
            }
            covered += weights[k];
            chosen.push(k);
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_example() {
        assert_eq!(
            knapsack_min_cover(&[5.0, 1.0, 1.0], &[10.0, 6.0, 6.0], 10.0, 1_000_000).unwrap(),
            vec![1, 2]
        );
    }

    #[test]
    fn trivial_thresholds() {
        let v = [1.0, 2.0, 3.0];
        let w = [1.0, 1.0, 1.0];
        assert!(knapsack_min_cover(&v, &w, 0.0, 100).unwrap().is_empty());
        assert_eq!(knapsack_min_cover(&v, &w, 3.0, 100).unwrap(), vec![0, 1, 2]);
        assert!(matches!(
            knapsack_min_cover(&v, &w, 3.5, 100),
            Err(Error::KnapsackInfeasible { .. })
        ));
    }

    #[test]
    fn single_item() {
        assert_eq!(knapsack_min_cover(&[9.0], &[2.0], 1.0, 10).unwrap(), vec![0]);
    }

    #[test]
    fn coarse_resolution_still_covers() {
        let w = [0.31, 0.33, 0.35, 0.29];
        let v = [1.0, 1.1, 0.9, 1.3];
        let j = knapsack_min_cover(&v, &w, 0.95, 1).unwrap();
        let s: f64 = j.iter().map(|&k| w[k]).sum();
        assert!(s >= 0.95);
    }
}
