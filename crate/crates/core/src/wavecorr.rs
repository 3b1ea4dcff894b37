//! Mexican-hat wavelet energy of speed profiles and lagged peak matching
//! between a leader and its follower.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Kernel taps extend to `KERNEL_RADIUS · scale` on each side.
const KERNEL_RADIUS: f64 = 8.0;
/// Energies below this never count as peaks, so flat profiles have none.
pub const ENERGY_FLOOR: f64 = 1e-9;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("series of {len} samples is shorter than the {required} required by the largest scale")]
    TooShort { len: usize, required: usize },
    #[error("invalid wavelet config: {0}")]
    Config(String),
}

/// `2 / (√3 · π^¼)`, the L2-normalizing constant.
pub fn mexican_hat_norm() -> f64 {
    2.0 / (3.0f64.sqrt() * std::f64::consts::PI.powf(0.25))
}

/// Normalized second derivative of a Gaussian, `(1 - u²)·exp(-u²/2)` scaled.
pub fn mexican_hat(u: f64) -> f64 {
    let u2 = u * u;
    mexican_hat_norm() * (1.0 - u2) * (-u2 / 2.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LagDirection {
    /// SV peak at or after the LV peak.
    Causal,
    /// SV peak within `max_lag` on either side.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletConfig {
    /// seconds
    pub scales: Vec<f64>,
    /// seconds
    pub max_lag: f64,
    pub min_matches: usize,
    /// Minimum peak prominence as a fraction of the profile maximum.
    pub prominence_frac: f64,
    pub lag_direction: LagDirection,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        WaveletConfig {
            scales: vec![1.0, 2.0, 4.0],
            max_lag: 2.0,
            min_matches: 1,
            prominence_frac: 0.1,
            lag_direction: LagDirection::Causal,
        }
    }
}

impl WaveletConfig {
    pub fn validate(&self) -> Result<(), WaveletError> {
        let bad = |m: &str| Err(WaveletError::Config(m.to_string()));
        if self.scales.is_empty() || self.scales.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("scales must be a non-empty list of positive values");
        }
        if !(self.max_lag >= 0.0) {
            return bad("max_lag must be >= 0");
        }
        if self.min_matches < 1 {
            return bad("min_matches must be >= 1");
        }
        if !(self.prominence_frac > 0.0 && self.prominence_frac <= 1.0) {
            return bad("prominence_frac must be in (0, 1]");
        }
        Ok(())
    }

    fn max_scale(&self) -> f64 {
        self.scales.iter().copied().fold(0.0, f64::max)
    }

    /// Minimum series length for `dt`.
    pub fn required_len(&self, dt: f64) -> usize {
        (2.0 * self.max_scale() / dt - TIME_EPS).ceil() as usize
    }

    /// Samples excluded from peak detection at each end.
    pub fn edge_len(&self, dt: f64) -> usize {
        (self.max_scale() / dt - TIME_EPS).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EnergyProfile {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    /// Indices into `t` / `energy`.
    pub peaks: Vec<usize>,
}

impl EnergyProfile {
    pub fn peak_times(&self) -> Vec<f64> {
        self.peaks.iter().map(|&i| self.t[i]).collect()
    }
}

/// Wavelet coefficients at one scale.
///
/// The kernel is truncated at the series ends and its in-range taps are
/// re-centered to zero mean, so constants map to zero everywhere.
pub fn cwt_coefficients(series: &[f64], dt: f64, scale: f64) -> Vec<f64> {
    let n = series.len();
    let radius = (KERNEL_RADIUS * scale / dt).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| mexican_hat(k as f64 * dt / scale))
        .collect();
    let norm = dt / scale.sqrt();
    (0..n as isize)
        .map(|j| {
            let lo = (j - radius).max(0);
            let hi = (j + radius).min(n as isize - 1);
            let window = &taps[(lo - j + radius) as usize..=(hi - j + radius) as usize];
            let tap_mean = window.iter().sum::<f64>() / window.len() as f64;
            let acc: f64 = window
                .iter()
                .zip(&series[lo as usize..=hi as usize])
                .map(|(w, x)| (w - tap_mean) * x)
                .sum();
            acc * norm
        })
        .collect()
}

/// Energy summed over scales, with prominent interior local maxima as peaks.
pub fn cwt_energy(
    series: &[f64],
    t0: f64,
    dt: f64,
    cfg: &WaveletConfig,
) -> Result<EnergyProfile, WaveletError> {
    cfg.validate()?;
    let required = cfg.required_len(dt);
    if series.len() < required.max(1) {
        return Err(WaveletError::TooShort {
            len: series.len(),
            required,
        });
    }
    let mut energy = vec![0.0; series.len()];
    for &a in &cfg.scales {
        for (e, w) in energy.iter_mut().zip(cwt_coefficients(series, dt, a)) {
            *e += w * w;
        }
    }
    let peaks = find_peaks(&energy, cfg.edge_len(dt), cfg.prominence_frac);
    Ok(EnergyProfile {
        t: (0..series.len()).map(|i| t0 + i as f64 * dt).collect(),
        energy,
        peaks,
    })
}

/// Local maxima in `[edge, n - edge)` whose topographic prominence is at least
/// `frac` of the maximum energy in that range.
pub fn find_peaks(energy: &[f64], edge: usize, frac: f64) -> Vec<usize> {
    let n = energy.len();
    if n < 3 || 2 * edge >= n {
        return vec![];
    }
    let (lo, hi) = (edge.max(1), (n - edge).min(n - 1));
    if lo >= hi {
        return vec![];
    }
    let region_max = energy[edge..n - edge].iter().copied().fold(0.0, f64::max);
    let threshold = frac * region_max;
    let mut peaks = Vec::new();
    let mut i = lo;
    while i < hi {
        let e = energy[i];
        if e > energy[i - 1] {
            // Walk across a plateau; the peak is its first sample.
            let mut j = i;
            while j + 1 < n && energy[j + 1] == e {
                j += 1;
            }
            if j + 1 < n && energy[j + 1] < e && e >= ENERGY_FLOOR {
                if prominence(energy, i, edge) >= threshold {
                    peaks.push(i);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(energy: &[f64], peak: usize, edge: usize) -> f64 {
    let n = energy.len();
    let e = energy[peak];
    let (lo, hi) = (edge, n - edge);
    let mut left_min = e;
    for k in (lo..peak).rev() {
        if energy[k] > e {
            break;
        }
        left_min = left_min.min(energy[k]);
    }
    let mut right_min = e;
    for &x in &energy[peak + 1..hi] {
        if x > e {
            break;
        }
        right_min = right_min.min(x);
    }
    e - left_min.max(right_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PeakMatch {
    pub matched: bool,
    pub count: usize,
    /// (LV peak time, SV peak time)
    pub pairs: Vec<(f64, f64)>,
}

/// Greedy chronological matching: each LV peak takes the earliest unmatched
/// SV peak within the allowed lag.
pub fn peak_match(lv: &EnergyProfile, sv: &EnergyProfile, cfg: &WaveletConfig) -> PeakMatch {
    let lv_t = lv.peak_times();
    let sv_t = sv.peak_times();
    let lo = match cfg.lag_direction {
        LagDirection::Causal => 0.0,
        LagDirection::Symmetric => -cfg.max_lag,
    };
    let mut used = vec![false; sv_t.len()];
    let mut pairs = Vec::new();
    for &tl in &lv_t {
        let hit = sv_t.iter().enumerate().find(|&(k, &ts)| {
            let lag = ts - tl;
            !used[k] && lag >= lo - TIME_EPS && lag <= cfg.max_lag + TIME_EPS
        });
        if let Some((k, &ts)) = hit {
            used[k] = true;
            pairs.push((tl, ts));
        }
    }
    PeakMatch {
        matched: pairs.len() >= cfg.min_matches,
        count: pairs.len(),
        pairs,
    }
}
