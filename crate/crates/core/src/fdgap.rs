//! Class-specific fundamental-diagram parameters and the speed-dependent
//! desirable (equilibrium) longitudinal gap.
//!
//! On the congested branch the density at speed `v` is `k = w·k_j / (w + v)`,
//! so the equilibrium spacing `s = 1000 / k` is affine in `v` with intercept
//! `1000 / k_j` and slope `1000 / (w·k_j)`. Speeds are km/h, densities veh/km,
//! gaps meters.

use std::collections::BTreeMap;
use std::io::Write;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::sig6;
use crate::trajmodel::VehicleClass;

#[derive(Debug, Error, PartialEq)]
pub enum FdError {
    #[error("speed must be non-negative, got {0} km/h")]
    NegativeSpeed(f64),
    #[error("need at least two distinct speeds to fit, got {0}")]
    TooFewSpeeds(usize),
    #[error("non-physical FD fit: intercept {intercept} m, slope {slope} m per km/h")]
    NonPhysical { intercept: f64, slope: f64 },
    #[error("invalid FD parameters: w = {w}, k_j = {k_j}")]
    InvalidParams { w: f64, k_j: f64 },
    #[error("no FD parameters for class {0}")]
    MissingClass(VehicleClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FdParams {
    pub class: VehicleClass,
    /// Backward wave speed, km/h.
    pub w: f64,
    /// Jam density, veh/km.
    pub k_j: f64,
}

impl FdParams {
    pub fn new(class: VehicleClass, w: f64, k_j: f64) -> Result<Self, FdError> {
        let p = FdParams { class, w, k_j };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FdError> {
        if self.w > 0.0 && self.w.is_finite() && self.k_j > 0.0 && self.k_j.is_finite() {
            Ok(())
        } else {
            Err(FdError::InvalidParams {
                w: self.w,
                k_j: self.k_j,
            })
        }
    }

    /// Gap at standstill, meters.
    pub fn intercept(&self) -> f64 {
        1000.0 / self.k_j
    }

    /// Gap increase per km/h, meters.
    pub fn slope(&self) -> f64 {
        1000.0 / (self.w * self.k_j)
    }

    /// Back-fitted defaults that reproduce the published class-wise gap table.
    pub fn default_for(class: VehicleClass) -> FdParams {
        let (w, k_j) = match class {
            VehicleClass::Tw => (3.996_655_518_394_662, 1_208.740_120_874_007_7),
            VehicleClass::Car => (9.009_216_589_861_767, 255.754_475_703_324_3),
            VehicleClass::Hv => (14.001_260_021_323_452, 89.993_423_557_509_16),
            VehicleClass::Lcv => (8.001_309_205_688_784, 203.969_561_465_442_38),
            VehicleClass::Auto => (5.001_938_454_082_892, 440.827_399_118_343_07),
        };
        FdParams { class, w, k_j }
    }
}

/// Parameters for every class, keyed by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct FdTable(pub BTreeMap<VehicleClass, FdParams>);

impl Default for FdTable {
    fn default() -> Self {
        FdTable(
            VehicleClass::ALL
                .iter()
                .map(|&c| (c, FdParams::default_for(c)))
                .collect(),
        )
    }
}

impl FdTable {
    pub fn get(&self, class: VehicleClass) -> Result<&FdParams, FdError> {
        self.0.get(&class).ok_or(FdError::MissingClass(class))
    }
}

/// `k = w·k_j / (w + v)`, veh/km.
pub fn density_at_speed(p: &FdParams, v_kmh: f64) -> Result<f64, FdError> {
    if v_kmh < 0.0 || v_kmh.is_nan() {
        return Err(FdError::NegativeSpeed(v_kmh));
    }
    Ok(p.w * p.k_j / (p.w + v_kmh))
}

/// `s = (w + v) / (w·k_j) · 1000`, meters. No clamping above the tabulated range.
pub fn desirable_gap(p: &FdParams, v_kmh: f64) -> Result<f64, FdError> {
    if v_kmh < 0.0 || v_kmh.is_nan() {
        return Err(FdError::NegativeSpeed(v_kmh));
    }
    Ok((p.w + v_kmh) / (p.w * p.k_j) * 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdFit {
    pub params: FdParams,
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual of the affine fit, meters.
    pub residual_rms: f64,
}

/// Least-squares affine fit `s = b + m·v` over `(speed km/h, gap m)` samples,
/// inverted to `k_j = 1000 / b`, `w = b / m`.
pub fn fit_fd_params(class: VehicleClass, samples: &[(f64, f64)]) -> Result<FdFit, FdError> {
    let mut speeds: Vec<f64> = samples.iter().map(|s| s.0).collect();
    speeds.sort_by(f64::total_cmp);
    speeds.dedup();
    if speeds.len() < 2 {
        return Err(FdError::TooFewSpeeds(speeds.len()));
    }
    let n = samples.len() as f64;
    let mean_v = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_s = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (sxy, sxx) = samples.iter().fold((0.0, 0.0), |(sxy, sxx), &(v, s)| {
        (sxy + (v - mean_v) * (s - mean_s), sxx + (v - mean_v).powi(2))
    });
    let slope = sxy / sxx;
    let intercept = mean_s - slope * mean_v;
    if !(intercept > 0.0 && slope > 0.0) {
        return Err(FdError::NonPhysical { intercept, slope });
    }
    let residual_rms = (samples
        .iter()
        .map(|&(v, s)| (s - intercept - slope * v).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FdFit {
        params: FdParams {
            class,
            w: intercept / slope,
            k_j: 1000.0 / intercept,
        },
        intercept,
        slope,
        residual_rms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub speed: f64,
    pub gaps: Vec<f64>,
}

/// Desirable gap per (speed, class).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapTable {
    pub classes: Vec<VehicleClass>,
    pub rows: Vec<GapRow>,
}

impl GapTable {
    pub fn gap(&self, row: usize, class: VehicleClass) -> Option<f64> {
        let col = self.classes.iter().position(|&c| c == class)?;
        self.rows.get(row).map(|r| r.gaps[col])
    }

    /// One column per class, in `classes` order, preceded by `speed_kmh`.
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["speed_kmh".to_string()];
        header.extend(self.classes.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![sig6(row.speed)];
            rec.extend(row.gaps.iter().map(|&g| sig6(g)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn gap_threshold_table(params: &[FdParams], speeds: &[f64]) -> Result<GapTable, FdError> {
    let rows = speeds
        .iter()
        .map(|&v| {
            Ok(GapRow {
                speed: v,
                gaps: params
                    .iter()
                    .map(|p| desirable_gap(p, v))
                    .collect::<Result<_, _>>()?,
            })
        })
        .collect::<Result<_, FdError>>()?;
    Ok(GapTable {
        classes: params.iter().map(|p| p.class).collect(),
        rows,
    })
}

/// The layout of the published table: TW, CAR, HV, LCV, AUTO at 5..=65 km/h.
pub fn standard_speeds() -> Vec<f64> {
    (1..=13).map(|i| 5.0 * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn car() -> FdParams {
        FdParams::default_for(VehicleClass::Car)
    }

    #[test]
    fn density_at_zero_is_jam_density() {
        let p = car();
        assert!((density_at_speed(&p, 0.0).unwrap() - p.k_j).abs() < 1e-9);
    }

    #[test]
    fn density_decreases() {
        let p = car();
        let mut prev = f64::INFINITY;
        for v in [0.0, 1.0, 10.0, 100.0, 1e4] {
            let k = density_at_speed(&p, v).unwrap();
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn car_density_at_30() {
        let k = density_at_speed(&car(), 30.0).unwrap();
        assert!((k - 1000.0 / 16.93).abs() < 0.2, "{k}");
    }

    #[test]
    fn tabulated_gaps() {
        assert!((desirable_gap(&car(), 30.0).unwrap() - 16.93).abs() < 0.05);
        let tw = FdParams::default_for(VehicleClass::Tw);
        assert!((desirable_gap(&tw, 5.0).unwrap() - 1.86).abs() < 0.05);
        assert!((desirable_gap(&car(), 0.0).unwrap() - 3.91).abs() < 0.01);
    }

    #[test]
    fn negative_speed_rejected() {
        assert_eq!(
            desirable_gap(&car(), -1.0),
            Err(FdError::NegativeSpeed(-1.0))
        );
        assert!(density_at_speed(&car(), -0.1).is_err());
    }

    #[test]
    fn exact_two_point_fit() {
        let fit = fit_fd_params(VehicleClass::Car, &[(0.0, 10.0), (10.0, 20.0)]).unwrap();
        assert!((fit.params.k_j - 100.0).abs() < 1e-12);
        assert!((fit.params.w - 10.0).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_fd_params(VehicleClass::Car, &[(5.0, 1.0), (5.0, 2.0)]),
            Err(FdError::TooFewSpeeds(1))
        );
        assert!(matches!(
            fit_fd_params(VehicleClass::Car, &[(0.0, 10.0), (10.0, 5.0)]),
            Err(FdError::NonPhysical { .. })
        ));
    }

    #[test]
    fn table_shapes() {
        let t = gap_threshold_table(&[car()], &[]).unwrap();
        assert!(t.rows.is_empty());
        let t = gap_threshold_table(&[car()], &[10.0]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].gaps.len(), 1);
    }

    #[test]
    fn csv_layout() {
        let params: Vec<FdParams> = VehicleClass::ALL.iter().map(|&c| FdParams::default_for(c)).collect();
        let t = gap_threshold_table(&params, &[5.0]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "speed_kmh,TW,CAR,HV,LCV,AUTO");
        assert!(lines.next().unwrap().starts_with("5,1.86"));
    }

    fn params_strategy() -> impl Strategy<Value = FdParams> {
        (0.5f64..50.0, 10.0f64..2000.0).prop_map(|(w, k_j)| FdParams {
            class: VehicleClass::Car,
            w,
            k_j,
        })
    }

    proptest! {
        #[test]
        fn fit_round_trip(p in params_strategy(),
                          speeds in proptest::collection::btree_set(0u32..200, 2..20)) {
            let speeds: Vec<f64> = speeds.into_iter().map(|s| s as f64 * 0.5).collect();
            let table = gap_threshold_table(&[p], &speeds).unwrap();
            let samples: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.speed, r.gaps[0])).collect();
            let fit = fit_fd_params(VehicleClass::Car, &samples).unwrap();
            prop_assert!(((fit.params.w - p.w) / p.w).abs() < 1e-9);
            prop_assert!(((fit.params.k_j - p.k_j) / p.k_j).abs() < 1e-9);
        }

        #[test]
        fn affine_midpoint(p in params_strategy(), v1 in 0.0f64..100.0, dv in 0.0f64..50.0) {
            let v3 = v1 + 2.0 * dv;
            let lhs = desirable_gap(&p, v1).unwrap() + desirable_gap(&p, v3).unwrap();
            let rhs = 2.0 * desirable_gap(&p, v1 + dv).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn density_times_gap_is_1000(p in params_strategy(), v in 0.0f64..150.0) {
            let prod = density_at_speed(&p, v).unwrap() * desirable_gap(&p, v).unwrap();
            prop_assert!((prod - 1000.0).abs() < 1e-9);
        }
    }
}
