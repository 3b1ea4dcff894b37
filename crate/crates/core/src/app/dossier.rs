//! Per-pair review bundle consumed by the review UI.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::filters::{PairLedger, Reason, SampleFlags, StageEvent, Verdict};
use crate::pairing::CandidatePair;
use crate::stats::{mean, FiveNumber};
use crate::trajmodel::{Vehicle, VehicleClass, VehicleId};
use crate::wavecorr::{cwt_energy, peak_match, EnergyProfile, PeakMatch, WaveletConfig};

/// Time series over the full candidate window. Speeds in m/s, positions and
/// gaps in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DossierSeries {
    pub t: Vec<f64>,
    pub lv_x: Vec<f64>,
    pub lv_y: Vec<f64>,
    pub sv_x: Vec<f64>,
    pub sv_y: Vec<f64>,
    pub lv_speed: Vec<f64>,
    pub sv_speed: Vec<f64>,
    pub lv_lat_speed: Vec<f64>,
    pub sv_lat_speed: Vec<f64>,
    pub gap_long: Vec<f64>,
    pub gap_lat: Vec<f64>,
    pub rel_vel: Vec<f64>,
    pub sv_accel: Vec<f64>,
}

/// Positions in a frame moving at `v0`: `x - v0 * (t - t[0])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ObliqueSeries {
    /// Mean SV speed, m/s.
    pub v0: f64,
    pub lv: Vec<f64>,
    pub sv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WaveletView {
    pub lv: EnergyProfile,
    pub sv: EnergyProfile,
    pub matches: PeakMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FlaggedSample {
    pub t: f64,
    pub reasons: Vec<Reason>,
    /// Whether the reasons made the sample an outlier under the stage rule.
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PairDossier {
    pub pair_id: String,
    pub lv_id: VehicleId,
    pub sv_id: VehicleId,
    pub lv_class: VehicleClass,
    pub sv_class: VehicleClass,
    pub category: String,
    pub asymmetry: String,
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
    pub series: DossierSeries,
    pub oblique: ObliqueSeries,
    /// `None` when the window is too short for the largest scale.
    pub wavelet: Option<WaveletView>,
    /// Keys: `rel_vel`, `gap_long`, `sv_speed`, `gap_lat`, `sv_lat_speed`.
    pub summaries: BTreeMap<String, FiveNumber>,
    /// Samples with at least one stage-1 reason, from the first stage-1 pass.
    pub flags: Vec<FlaggedSample>,
    pub verdict: Verdict,
    pub trail: Vec<StageEvent>,
}

pub fn oblique_series(t: &[f64], x: &[f64], v0: f64) -> Vec<f64> {
    let t0 = t.first().copied().unwrap_or(0.0);
    t.iter().zip(x).map(|(&ti, &xi)| xi - v0 * (ti - t0)).collect()
}

/// Dossier file name for a pair id; `:` is not portable in file names.
pub fn file_name(pair_id: &str) -> String {
    format!("{}.json", pair_id.replace(':', "_"))
}

/// Builds the dossier of `pair` (unfiltered window). Panics if the vehicles
/// do not cover the window.
pub fn build_dossier(
    pair: &CandidatePair,
    lv: &Vehicle,
    sv: &Vehicle,
    ledger: &PairLedger,
    flags: Option<&SampleFlags>,
    wavelet: &WaveletConfig,
) -> PairDossier {
    let frames: Vec<i64> = pair.window.frames().collect();
    let pts = |v: &Vehicle| -> Vec<_> {
        frames
            .iter()
            .map(|&f| *v.point_at(f).expect("vehicle covers pair window"))
            .collect()
    };
    let (lp, sp) = (pts(lv), pts(sv));
    let col = |f: &dyn Fn(&crate::trajmodel::InteractionSample) -> f64| pair.samples.iter().map(f).collect::<Vec<_>>();
    let series = DossierSeries {
        t: col(&|s| s.t),
        lv_x: lp.iter().map(|p| p.x_long).collect(),
        lv_y: lp.iter().map(|p| p.y_lat).collect(),
        sv_x: sp.iter().map(|p| p.x_long).collect(),
        sv_y: sp.iter().map(|p| p.y_lat).collect(),
        lv_speed: col(&|s| s.lv_speed),
        sv_speed: col(&|s| s.sv_speed),
        lv_lat_speed: lp.iter().map(|p| p.v_lat).collect(),
        sv_lat_speed: sp.iter().map(|p| p.v_lat).collect(),
        gap_long: col(&|s| s.gap_long),
        gap_lat: col(&|s| s.gap_lat),
        rel_vel: col(&|s| s.rel_vel),
        sv_accel: col(&|s| s.sv_accel),
    };
    let v0 = mean(&series.sv_speed);
    let oblique = ObliqueSeries {
        v0,
        lv: oblique_series(&series.t, &series.lv_x, v0),
        sv: oblique_series(&series.t, &series.sv_x, v0),
    };
    let t0 = pair.window.t0(pair.dt);
    let wavelet = match (
        cwt_energy(&series.lv_speed, t0, pair.dt, wavelet),
        cwt_energy(&series.sv_speed, t0, pair.dt, wavelet),
    ) {
        (Ok(a), Ok(b)) => Some(WaveletView {
            matches: peak_match(&a, &b, wavelet),
            lv: a,
            sv: b,
        }),
        _ => None,
    };
    let mut summaries = BTreeMap::new();
    for (key, values) in [
        ("rel_vel", &series.rel_vel),
        ("gap_long", &series.gap_long),
        ("sv_speed", &series.sv_speed),
        ("gap_lat", &series.gap_lat),
        ("sv_lat_speed", &series.sv_lat_speed),
    ] {
        if let Some(f) = FiveNumber::of(values) {
            summaries.insert(key.to_string(), f);
        }
    }
    let flags = flags
        .map(|f| {
            f.reasons
                .iter()
                .zip(&f.outlier)
                .zip(&series.t)
                .filter(|((r, _), _)| !r.is_empty())
                .map(|((r, &outlier), &t)| FlaggedSample {
                    t,
                    reasons: r.iter().collect(),
                    outlier,
                })
                .collect()
        })
        .unwrap_or_default();
    PairDossier {
        pair_id: pair.id.clone(),
        lv_id: pair.lv.clone(),
        sv_id: pair.sv.clone(),
        lv_class: pair.category.lv,
        sv_class: pair.category.sv,
        category: pair.category.to_string(),
        asymmetry: pair.category.asymmetry().to_string(),
        dt: pair.dt,
        t0,
        t1: pair.window.t1(pair.dt),
        series,
        oblique,
        wavelet,
        summaries,
        flags,
        verdict: ledger.verdict.clone(),
        trail: ledger.events.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oblique_of_constant_speed_is_flat() {
        let t: Vec<f64> = (0..20).map(|k| 10.0 + k as f64 * 0.5).collect();
        let x: Vec<f64> = t.iter().map(|&ti| 3.0 + 12.0 * ti).collect();
        let o = oblique_series(&t, &x, 12.0);
        assert!(o.iter().all(|&v| (v - o[0]).abs() < 1e-9));
        assert!((o[0] - 123.0).abs() < 1e-12);
    }

    #[test]
    fn file_names_avoid_colons() {
        assert_eq!(file_name("12-7:340"), "12-7_340.json");
    }
}
