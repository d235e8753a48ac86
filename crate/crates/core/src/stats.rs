//! Nearest-rank percentiles and simple moments.

use serde::{Deserialize, Serialize};

/// Nearest-rank percentile: the value at rank `ceil(p/100 * n)` of the sorted
/// sample. Sorts `values` in place. `None` for an empty sample.
pub fn nearest_rank(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(nearest_rank_sorted(values, p))
}

/// Same as [`nearest_rank`] on an already sorted, non-empty slice.
pub fn nearest_rank_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

impl Percentiles {
    pub fn of(values: &mut [f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Self {
            p50: nearest_rank_sorted(values, 50.0),
            p95: nearest_rank_sorted(values, 95.0),
            p99: nearest_rank_sorted(values, 99.0),
        })
    }
}

/// Relative change `(new - base) / base`.
pub fn relative_change(base: f64, new: f64) -> f64 {
    (new - base) / base
}
