//! Order statistics used by the box-plot screens and the dossiers.

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;

/// Percentile of already-sorted data, linear interpolation between order
/// statistics (rank `p/100 · (n - 1)`). `p` is in percent.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn percentile(values: &[f64], p: f64) -> f64 {
    percentile_sorted(&sorted(values), p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<FiveNumber> {
        if values.is_empty() {
            return None;
        }
        let s = sorted(values);
        Some(FiveNumber {
            min: s[0],
            q1: percentile_sorted(&s, 25.0),
            median: percentile_sorted(&s, 50.0),
            q3: percentile_sorted(&s, 75.0),
            max: s[s.len() - 1],
        })
    }
}

/// Tukey whiskers: the most extreme data points within
/// `[Q1 - 1.5·IQR, Q3 + 1.5·IQR]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Whiskers {
    pub lower: f64,
    pub upper: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Whiskers {
    pub fn of_sorted(s: &[f64]) -> Whiskers {
        let q1 = percentile_sorted(s, 25.0);
        let q3 = percentile_sorted(s, 75.0);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let lower = s.iter().copied().find(|&x| x >= lo_fence).unwrap_or(s[0]);
        let upper = s.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(s[s.len() - 1]);
        Whiskers { lower, upper, q1, q3 }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divide by n).
pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}
