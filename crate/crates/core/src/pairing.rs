//! Base leader-follower extraction.
//!
//! At every grid instant each subject vehicle gets at most one leader: the
//! closest vehicle strictly ahead, laterally overlapping, within `max_gap`.
//! Maximal runs with a constant leader lasting at least `min_duration`
//! become candidate pairs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::fmt::sig6;
use crate::trajmodel::{
    interaction_series, lateral_overlap, longitudinal_gap, InteractionSample, Vehicle,
    VehicleClass, VehicleId, Window,
};

/// Tolerance on the duration comparison, seconds.
const DURATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DuplicateRule {
    /// Closest gap wins; equal gaps go to the smaller vehicle id.
    ClosestGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PairingCriteria {
    /// meters
    pub max_gap: f64,
    pub require_overlap: bool,
    /// seconds, `(n - 1) * dt` convention
    pub min_duration: f64,
    pub duplicate_rule: DuplicateRule,
}

impl Default for PairingCriteria {
    fn default() -> Self {
        PairingCriteria {
            max_gap: 30.0,
            require_overlap: true,
            min_duration: 5.0,
            duplicate_rule: DuplicateRule::ClosestGap,
        }
    }
}

/// (LV class, SV class). Displays as `LV-SV`, e.g. `TW-CAR`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema,
)]
pub struct Category {
    pub lv: VehicleClass,
    pub sv: VehicleClass,
}

impl Category {
    pub fn new(lv: VehicleClass, sv: VehicleClass) -> Self {
        Category { lv, sv }
    }

    pub fn asymmetry(&self) -> Asymmetry {
        use std::cmp::Ordering::*;
        match self.lv.size_rank().cmp(&self.sv.size_rank()) {
            Equal => Asymmetry::Symmetric,
            Greater => Asymmetry::Positive,
            Less => Asymmetry::Negative,
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        let (lv, sv) = s.split_once('-')?;
        Some(Category {
            lv: lv.parse().ok()?,
            sv: sv.parse().ok()?,
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lv, self.sv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Asymmetry {
    Symmetric,
    /// LV larger than SV.
    Positive,
    /// LV smaller than SV.
    Negative,
}

impl fmt::Display for Asymmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Asymmetry::Symmetric => "symmetric",
            Asymmetry::Positive => "positive",
            Asymmetry::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidatePair {
    pub id: String,
    pub lv: VehicleId,
    pub sv: VehicleId,
    pub category: Category,
    pub window: Window,
    pub dt: f64,
    #[serde(skip)]
    pub samples: Vec<InteractionSample>,
}

impl CandidatePair {
    pub fn pair_id(lv: &VehicleId, sv: &VehicleId, start_frame: i64) -> String {
        format!("{lv}-{sv}:{start_frame}")
    }

    pub fn from_vehicles(lv: &Vehicle, sv: &Vehicle, window: Window) -> Result<Self, crate::trajmodel::TrajError> {
        Ok(CandidatePair {
            id: Self::pair_id(&lv.id, &sv.id, window.start),
            lv: lv.id.clone(),
            sv: sv.id.clone(),
            category: Category::new(lv.class, sv.class),
            samples: interaction_series(lv, sv, window)?,
            window,
            dt: sv.dt,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn duration(&self) -> f64 {
        self.window.duration(self.dt)
    }

    /// Keeps samples `range` (indices into `samples`) and narrows the window.
    pub fn restricted(&self, range: std::ops::Range<usize>) -> CandidatePair {
        CandidatePair {
            window: Window::new(
                self.window.start + range.start as i64,
                self.window.start + range.end as i64 - 1,
            ),
            samples: self.samples[range].to_vec(),
            ..self.clone()
        }
    }
}

/// Position and footprint of one vehicle at one instant.
#[derive(Debug, Clone, Copy)]
pub struct VehicleState<'a> {
    pub id: &'a VehicleId,
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
}

/// Closest eligible leader of `sv` in `frame`, if any.
///
/// A laterally overlapping vehicle whose front is ahead of the SV front but
/// whose rear is behind it is bumper interpenetration; that instant resolves
/// to no leader.
pub fn resolve_leader<'a>(
    sv: &VehicleState<'_>,
    frame: &[VehicleState<'a>],
    criteria: &PairingCriteria,
) -> Option<&'a VehicleId> {
    let mut best: Option<(f64, &'a VehicleId)> = None;
    for other in frame {
        if other.id == sv.id {
            continue;
        }
        let overlap = lateral_overlap(other.y, other.width, sv.y, sv.width);
        if criteria.require_overlap && overlap <= 0.0 {
            continue;
        }
        let gap = longitudinal_gap(other.x, other.length, sv.x);
        if gap < 0.0 {
            if other.x > sv.x && overlap > 0.0 {
                log::debug!("bumper interpenetration between {} and {}", sv.id, other.id);
                return None;
            }
            continue;
        }
        if gap > criteria.max_gap {
            continue;
        }
        let better = match best {
            None => true,
            Some((g, id)) => gap < g || (gap == g && other.id < id),
        };
        if better {
            best = Some((gap, other.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Candidate pairs sorted by (SV id, window start).
pub fn extract_pairs(vehicles: &[Vehicle], criteria: &PairingCriteria, dt: f64) -> Vec<CandidatePair> {
    // Frame -> states of every vehicle present, sorted by front position.
    let mut frames: BTreeMap<i64, Vec<(usize, f64)>> = BTreeMap::new();
    for (vi, v) in vehicles.iter().enumerate() {
        for (k, p) in v.points.iter().enumerate() {
            frames
                .entry(v.first_frame + k as i64)
                .or_default()
                .push((vi, p.x_long));
        }
    }
    for states in frames.values_mut() {
        states.sort_by(|a, b| a.1.total_cmp(&b.1));
    }
    let max_len = vehicles.iter().map(|v| v.length).fold(0.0, f64::max);
    let index: HashMap<&VehicleId, usize> = vehicles.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();

    let mut order: Vec<usize> = (0..vehicles.len()).collect();
    order.sort_by(|&a, &b| vehicles[a].id.cmp(&vehicles[b].id));

    order
        .par_iter()
        .flat_map_iter(|&si| {
            let sv = &vehicles[si];
            let mut leaders: Vec<Option<&VehicleId>> = Vec::with_capacity(sv.points.len());
            for (k, p) in sv.points.iter().enumerate() {
                let frame = sv.first_frame + k as i64;
                let states = &frames[&frame];
                // Only vehicles whose front lies in (x_sv, x_sv + max_gap + longest vehicle].
                let lo = states.partition_point(|s| s.1 < p.x_long);
                let hi = states.partition_point(|s| s.1 <= p.x_long + criteria.max_gap + max_len);
                let nearby: Vec<VehicleState> = states[lo..hi]
                    .iter()
                    .map(|&(vi, x)| {
                        let v = &vehicles[vi];
                        let pt = &v.points[(frame - v.first_frame) as usize];
                        VehicleState {
                            id: &v.id,
                            x,
                            y: pt.y_lat,
                            length: v.length,
                            width: v.width,
                        }
                    })
                    .collect();
                let me = VehicleState {
                    id: &sv.id,
                    x: p.x_long,
                    y: p.y_lat,
                    length: sv.length,
                    width: sv.width,
                };
                leaders.push(resolve_leader(&me, &nearby, criteria));
            }
            runs(&leaders)
                .into_iter()
                .filter_map(|(lead, a, b)| {
                    let window = Window::new(sv.first_frame + a as i64, sv.first_frame + b as i64);
                    if window.duration(dt) + DURATION_EPS < criteria.min_duration {
                        return None;
                    }
                    let lv = &vehicles[index[lead]];
                    CandidatePair::from_vehicles(lv, sv, window).ok()
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Maximal runs of identical `Some` values: (value, first index, last index).
fn runs<'a>(leaders: &[Option<&'a VehicleId>]) -> Vec<(&'a VehicleId, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < leaders.len() {
        let Some(id) = leaders[start] else {
            start += 1;
            continue;
        };
        let mut end = start;
        while end + 1 < leaders.len() && leaders[end + 1] == Some(id) {
            end += 1;
        }
        out.push((id, start, end));
        start = end + 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    pub pairs: usize,
    pub points: usize,
    pub asymmetry: Asymmetry,
    pub modelable: bool,
}

/// Per-category pair and point counts, ordered by SV class then LV class.
pub fn summarize_pairs(pairs: &[CandidatePair], min_pairs: usize) -> Vec<CategorySummary> {
    let mut counts: BTreeMap<(VehicleClass, VehicleClass), (usize, usize)> = BTreeMap::new();
    for p in pairs {
        let e = counts.entry((p.category.sv, p.category.lv)).or_default();
        e.0 += 1;
        e.1 += p.n_samples();
    }
    counts
        .into_iter()
        .map(|((sv, lv), (n, pts))| {
            let category = Category::new(lv, sv);
            CategorySummary {
                category,
                pairs: n,
                points: pts,
                asymmetry: category.asymmetry(),
                modelable: n >= min_pairs,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(summary: &[CategorySummary], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["sv_class", "lf_pair", "n_pairs", "n_points", "asymmetry", "modelable"])?;
    for s in summary {
        w.write_record([
            s.category.sv.to_string(),
            s.category.to_string(),
            s.pairs.to_string(),
            s.points.to_string(),
            s.asymmetry.to_string(),
            s.modelable.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the pair index CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairIndexRow {
    pub pair_id: String,
    pub lv_id: VehicleId,
    pub sv_id: VehicleId,
    pub category: String,
    pub t0: String,
    pub t1: String,
    pub start_frame: i64,
    pub end_frame: i64,
    pub n_samples: usize,
}

impl PairIndexRow {
    pub fn from_pair(p: &CandidatePair) -> Self {
        PairIndexRow {
            pair_id: p.id.clone(),
            lv_id: p.lv.clone(),
            sv_id: p.sv.clone(),
            category: p.category.to_string(),
            t0: sig6(p.window.t0(p.dt)),
            t1: sig6(p.window.t1(p.dt)),
            start_frame: p.window.start,
            end_frame: p.window.end,
            n_samples: p.n_samples(),
        }
    }
}

pub fn write_pair_index<W: Write>(pairs: &[CandidatePair], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for p in pairs {
        w.serialize(PairIndexRow::from_pair(p))?;
    }
    if pairs.is_empty() {
        w.write_record([
            "pair_id",
            "lv_id",
            "sv_id",
            "category",
            "t0",
            "t1",
            "start_frame",
            "end_frame",
            "n_samples",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pair_index<R: std::io::Read>(source: R) -> csv::Result<Vec<PairIndexRow>> {
    csv::Reader::from_reader(source).deserialize().collect()
}
