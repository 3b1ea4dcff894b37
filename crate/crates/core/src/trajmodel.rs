//! Trajectory data model, CSV ingestion onto a uniform time grid, and the
//! per-instant interaction quantities between a leader (LV) and a subject
//! vehicle (SV).
//!
//! Positions use the front-bumper convention: `x_long` is the front of the
//! vehicle, increasing in the travel direction, and `y_lat` is the lateral
//! centerline, positive to the right. The longitudinal gap is the clearance
//! between the LV's rear bumper and the SV's front bumper.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid timestamps closer than this (in frames) to an integer frame are on-grid.
const GRID_SNAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("vehicle {vehicle} has no sample at t = {t} s")]
    MissingInstant { vehicle: VehicleId, t: f64 },
    #[error("invalid window: start frame {start} after end frame {end}")]
    InvalidWindow { start: i64, end: i64 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("column '{column}' (mapped from '{field}') not found in CSV header")]
    MissingColumn { field: &'static str, column: String },
    #[error("dt must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// The five vehicle classes of the study area.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema,
)]
pub enum VehicleClass {
    #[serde(rename = "TW")]
    Tw,
    #[serde(rename = "CAR")]
    Car,
    #[serde(rename = "HV")]
    Hv,
    #[serde(rename = "LCV")]
    Lcv,
    #[serde(rename = "AUTO")]
    Auto,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 5] = [
        VehicleClass::Tw,
        VehicleClass::Car,
        VehicleClass::Hv,
        VehicleClass::Lcv,
        VehicleClass::Auto,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Tw => "TW",
            VehicleClass::Car => "CAR",
            VehicleClass::Hv => "HV",
            VehicleClass::Lcv => "LCV",
            VehicleClass::Auto => "AUTO",
        }
    }

    /// Position in the size ordering TW < AUTO < CAR < LCV < HV.
    pub fn size_rank(self) -> u8 {
        match self {
            VehicleClass::Tw => 0,
            VehicleClass::Auto => 1,
            VehicleClass::Car => 2,
            VehicleClass::Lcv => 3,
            VehicleClass::Hv => 4,
        }
    }

    /// Fallback footprint used when neither the data nor the config gives one.
    pub fn default_dimensions(self) -> Dimensions {
        let (length, width) = match self {
            VehicleClass::Tw => (1.87, 0.64),
            VehicleClass::Auto => (3.20, 1.40),
            VehicleClass::Car => (4.00, 1.75),
            VehicleClass::Lcv => (5.00, 1.90),
            VehicleClass::Hv => (10.10, 2.50),
        };
        Dimensions { length, width }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown class '{0}'")]
pub struct UnknownClass(pub String);

impl FromStr for VehicleClass {
    type Err = UnknownClass;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TW" => Ok(VehicleClass::Tw),
            "CAR" => Ok(VehicleClass::Car),
            "HV" => Ok(VehicleClass::Hv),
            "LCV" => Ok(VehicleClass::Lcv),
            "AUTO" => Ok(VehicleClass::Auto),
            _ => Err(UnknownClass(s.trim().to_string())),
        }
    }
}

/// Opaque vehicle identifier.
///
/// Ordering is numeric when both ids are unsigned integers, so `"9" < "10"`;
/// numeric ids sort before non-numeric ones, which compare lexically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct VehicleId(pub String);

impl VehicleId {
    pub fn new(id: impl Into<String>) -> Self {
        VehicleId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Ord for VehicleId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for VehicleId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Dimensions {
    /// meters
    pub length: f64,
    /// meters
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x_long: f64,
    pub y_lat: f64,
    pub v_long: f64,
    pub v_lat: f64,
    pub a_long: f64,
    pub a_lat: f64,
}

/// A vehicle trajectory sampled on the grid `t = frame * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub length: f64,
    pub width: f64,
    pub dt: f64,
    /// Grid index of `points[0]`.
    pub first_frame: i64,
    pub points: Vec<TrajectoryPoint>,
}

impl Vehicle {
    pub fn last_frame(&self) -> i64 {
        self.first_frame + self.points.len() as i64 - 1
    }

    pub fn point_at(&self, frame: i64) -> Option<&TrajectoryPoint> {
        if frame < self.first_frame {
            return None;
        }
        self.points.get((frame - self.first_frame) as usize)
    }

    pub fn covers(&self, window: Window) -> bool {
        window.start >= self.first_frame && window.end <= self.last_frame()
    }
}

/// Inclusive range of grid frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Self {
        debug_assert!(start <= end);
        Window { start, end }
    }

    pub fn n_samples(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    /// Duration under the `(n - 1) * dt` convention.
    pub fn duration(&self, dt: f64) -> f64 {
        (self.end - self.start) as f64 * dt
    }

    pub fn t0(&self, dt: f64) -> f64 {
        self.start as f64 * dt
    }

    pub fn t1(&self, dt: f64) -> f64 {
        self.end as f64 * dt
    }

    pub fn frames(&self) -> impl Iterator<Item = i64> {
        self.start..=self.end
    }
}

/// Frame index of a time stamp on the `dt` grid.
pub fn frame_of(t: f64, dt: f64) -> i64 {
    (t / dt).round() as i64
}

/// LV-SV interaction quantities at one grid instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionSample {
    pub t: f64,
    /// LV rear bumper minus SV front bumper, meters.
    pub gap_long: f64,
    /// SV centerline minus LV centerline, positive when the SV is to the right.
    pub gap_lat: f64,
    pub overlap: f64,
    /// `v_LV - v_SV`, m/s.
    pub rel_vel: f64,
    pub sv_speed: f64,
    pub lv_speed: f64,
    pub sv_accel: f64,
}

/// Length of the intersection of the two lateral extents.
pub fn lateral_overlap(lv_y: f64, lv_width: f64, sv_y: f64, sv_width: f64) -> f64 {
    let right = (lv_y + lv_width / 2.0).min(sv_y + sv_width / 2.0);
    let left = (lv_y - lv_width / 2.0).max(sv_y - sv_width / 2.0);
    (right - left).max(0.0)
}

/// Longitudinal bumper-to-bumper gap from front-bumper positions.
pub fn longitudinal_gap(lv_x: f64, lv_length: f64, sv_x: f64) -> f64 {
    (lv_x - lv_length) - sv_x
}

pub fn interaction_at(
    lv: &Vehicle,
    lv_pt: &TrajectoryPoint,
    sv: &Vehicle,
    sv_pt: &TrajectoryPoint,
) -> InteractionSample {
    InteractionSample {
        t: sv_pt.t,
        gap_long: longitudinal_gap(lv_pt.x_long, lv.length, sv_pt.x_long),
        gap_lat: sv_pt.y_lat - lv_pt.y_lat,
        overlap: lateral_overlap(lv_pt.y_lat, lv.width, sv_pt.y_lat, sv.width),
        rel_vel: lv_pt.v_long - sv_pt.v_long,
        sv_speed: sv_pt.v_long,
        lv_speed: lv_pt.v_long,
        sv_accel: sv_pt.a_long,
    }
}

/// One interaction sample per grid instant of `window`.
pub fn interaction_series(
    lv: &Vehicle,
    sv: &Vehicle,
    window: Window,
) -> Result<Vec<InteractionSample>, TrajError> {
    if window.start > window.end {
        return Err(TrajError::InvalidWindow {
            start: window.start,
            end: window.end,
        });
    }
    window
        .frames()
        .map(|frame| {
            let missing = |v: &Vehicle| TrajError::MissingInstant {
                vehicle: v.id.clone(),
                t: frame as f64 * v.dt,
            };
            let lv_pt = lv.point_at(frame).ok_or_else(|| missing(lv))?;
            let sv_pt = sv.point_at(frame).ok_or_else(|| missing(sv))?;
            Ok(interaction_at(lv, lv_pt, sv, sv_pt))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Maps canonical fields onto CSV header names. Optional columns are
/// synthesized (kinematics) or filled from class defaults (dimensions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub id: String,
    pub class: String,
    pub t: String,
    pub x_long: String,
    pub y_lat: String,
    #[serde(default)]
    pub v_long: Option<String>,
    #[serde(default)]
    pub v_lat: Option<String>,
    #[serde(default)]
    pub a_long: Option<String>,
    #[serde(default)]
    pub a_lat: Option<String>,
    #[serde(default)]
    pub length: Option<String>,
    #[serde(default)]
    pub width: Option<String>,
}

impl ColumnMap {
    /// The layout written by [`write_trajectories`].
    pub fn canonical() -> Self {
        ColumnMap {
            id: "id".into(),
            class: "class".into(),
            t: "t".into(),
            x_long: "x_long".into(),
            y_lat: "y_lat".into(),
            v_long: Some("v_long".into()),
            v_lat: Some("v_lat".into()),
            a_long: Some("a_long".into()),
            a_lat: Some("a_lat".into()),
            length: Some("length".into()),
            width: Some("width".into()),
        }
    }
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self::canonical()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    #[serde(default)]
    pub columns: ColumnMap,
    /// Grid step, seconds.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Per-class footprint used when the data has no dimension columns.
    #[serde(default)]
    pub class_defaults: BTreeMap<VehicleClass, Dimensions>,
    /// Extra spellings for class tags, e.g. `{"2W": "TW"}`.
    #[serde(default)]
    pub class_aliases: BTreeMap<String, VehicleClass>,
}

fn default_dt() -> f64 {
    0.5
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            columns: ColumnMap::canonical(),
            dt: default_dt(),
            class_defaults: BTreeMap::new(),
            class_aliases: BTreeMap::new(),
        }
    }
}

impl IngestConfig {
    pub fn dimensions_for(&self, class: VehicleClass) -> Dimensions {
        self.class_defaults
            .get(&class)
            .copied()
            .unwrap_or_else(|| class.default_dimensions())
    }

    fn parse_class(&self, raw: &str) -> Result<VehicleClass, UnknownClass> {
        if let Some(c) = self.class_aliases.get(raw.trim()) {
            return Ok(*c);
        }
        raw.parse()
    }
}

/// A row that could not be used. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordError {
    pub row: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleError {
    pub vehicle: VehicleId,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct Ingested {
    /// Sorted by id.
    pub vehicles: Vec<Vehicle>,
    pub record_errors: Vec<RecordError>,
    pub vehicle_errors: Vec<VehicleError>,
    /// Number of grid samples whose negative longitudinal speed was clamped to 0.
    pub clamped_speeds: usize,
}

#[derive(Debug, Clone, Copy)]
struct RawRow {
    t: f64,
    x: f64,
    y: f64,
    v_long: Option<f64>,
    v_lat: Option<f64>,
    a_long: Option<f64>,
    a_lat: Option<f64>,
    length: Option<f64>,
    width: Option<f64>,
}

impl RawRow {
    fn fields(&self) -> [Option<f64>; 7] {
        [
            Some(self.x),
            Some(self.y),
            self.v_long,
            self.v_lat,
            self.a_long,
            self.a_lat,
            self.length,
        ]
    }
}

struct Columns {
    id: usize,
    class: usize,
    t: usize,
    x: usize,
    y: usize,
    v_long: Option<usize>,
    v_lat: Option<usize>,
    a_long: Option<usize>,
    a_lat: Option<usize>,
    length: Option<usize>,
    width: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self, IngestError> {
        let find = |field: &'static str, name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| IngestError::MissingColumn {
                    field,
                    column: name.to_string(),
                })
        };
        let opt = |field: &'static str, name: &Option<String>| match name {
            Some(n) => find(field, n).map(Some),
            None => Ok(None),
        };
        Ok(Columns {
            id: find("id", &map.id)?,
            class: find("class", &map.class)?,
            t: find("t", &map.t)?,
            x: find("x_long", &map.x_long)?,
            y: find("y_lat", &map.y_lat)?,
            v_long: opt("v_long", &map.v_long)?,
            v_lat: opt("v_lat", &map.v_lat)?,
            a_long: opt("a_long", &map.a_long)?,
            a_lat: opt("a_lat", &map.a_lat)?,
            length: opt("length", &map.length)?,
            width: opt("width", &map.width)?,
        })
    }
}

fn parse_num(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, String> {
    let raw = record.get(idx).unwrap_or("").trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("column '{name}': cannot parse '{raw}' as a number"))?;
    if !v.is_finite() {
        return Err(format!("column '{name}': non-finite value"));
    }
    Ok(v)
}

fn parse_opt(
    record: &csv::StringRecord,
    idx: Option<usize>,
    name: &str,
) -> Result<Option<f64>, String> {
    idx.map(|i| parse_num(record, i, name)).transpose()
}

/// Reads a trajectory CSV into grid-normalized vehicles.
///
/// Record-level problems (unknown class, unparsable numbers) and
/// vehicle-level problems (conflicting duplicate timestamps, inconsistent
/// class, bad dimensions) are collected and the offending rows or vehicles
/// skipped. A column mapping that does not match the header is fatal.
pub fn ingest<R: Read>(source: R, cfg: &IngestConfig) -> Result<Ingested, IngestError> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(IngestError::InvalidDt(cfg.dt));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = Columns::resolve(&headers, &cfg.columns)?;
    let names = &cfg.columns;

    let mut out = Ingested::default();
    let mut by_vehicle: BTreeMap<VehicleId, (VehicleClass, Vec<RawRow>)> = BTreeMap::new();
    let mut bad_class: BTreeMap<VehicleId, String> = BTreeMap::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        let id = VehicleId::new(record.get(cols.id).unwrap_or("").trim());
        let class = match cfg.parse_class(record.get(cols.class).unwrap_or("")) {
            Ok(c) => c,
            Err(e) => {
                out.record_errors.push(RecordError {
                    row,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let parsed = (|| -> Result<RawRow, String> {
            Ok(RawRow {
                t: parse_num(&record, cols.t, &names.t)?,
                x: parse_num(&record, cols.x, &names.x_long)?,
                y: parse_num(&record, cols.y, &names.y_lat)?,
                v_long: parse_opt(&record, cols.v_long, "v_long")?,
                v_lat: parse_opt(&record, cols.v_lat, "v_lat")?,
                a_long: parse_opt(&record, cols.a_long, "a_long")?,
                a_lat: parse_opt(&record, cols.a_lat, "a_lat")?,
                length: parse_opt(&record, cols.length, "length")?,
                width: parse_opt(&record, cols.width, "width")?,
            })
        })();
        let raw = match parsed {
            Ok(r) => r,
            Err(message) => {
                out.record_errors.push(RecordError { row, message });
                continue;
            }
        };
        let entry = by_vehicle
            .entry(id.clone())
            .or_insert_with(|| (class, Vec::new()));
        if entry.0 != class {
            bad_class.entry(id).or_insert_with(|| {
                format!("inconsistent class: {} and {}", entry.0, class)
            });
        }
        entry.1.push(raw);
    }

    let dt = cfg.dt;
    for (id, (class, rows)) in by_vehicle {
        if let Some(message) = bad_class.remove(&id) {
            out.vehicle_errors.push(VehicleError {
                vehicle: id,
                message,
            });
            continue;
        }
        match build_vehicle(id.clone(), class, rows, cfg, &mut out.clamped_speeds) {
            Ok(v) => out.vehicles.push(v),
            Err(message) => out.vehicle_errors.push(VehicleError {
                vehicle: id,
                message,
            }),
        }
    }
    log::debug!(
        "ingested {} vehicles at dt = {dt} ({} record errors, {} vehicle errors)",
        out.vehicles.len(),
        out.record_errors.len(),
        out.vehicle_errors.len()
    );
    Ok(out)
}

fn build_vehicle(
    id: VehicleId,
    class: VehicleClass,
    mut rows: Vec<RawRow>,
    cfg: &IngestConfig,
    clamped: &mut usize,
) -> Result<Vehicle, String> {
    let dt = cfg.dt;
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    // Exact duplicate rows collapse; same instant with different values is an error.
    let mut deduped: Vec<RawRow> = Vec::with_capacity(rows.len());
    for r in rows {
        if let Some(prev) = deduped.last() {
            if prev.t == r.t {
                if prev.fields() == r.fields() && prev.width == r.width {
                    continue;
                }
                return Err(format!(
                    "non-monotonic timestamps: conflicting rows at t = {}",
                    r.t
                ));
            }
        }
        deduped.push(r);
    }
    let rows = deduped;

    let dims = cfg.dimensions_for(class);
    let length = rows[0].length.unwrap_or(dims.length);
    let width = rows[0].width.unwrap_or(dims.width);
    if !(length > 0.0 && length.is_finite() && width > 0.0 && width.is_finite()) {
        return Err(format!("invalid dimensions {length} x {width}"));
    }

    let t_first = rows[0].t / dt;
    let t_last = rows[rows.len() - 1].t / dt;
    let first_frame = (t_first - GRID_SNAP).ceil() as i64;
    let last_frame = (t_last + GRID_SNAP).floor() as i64;
    if last_frame < first_frame {
        return Err("trajectory spans no grid instant".to_string());
    }

    // Linear interpolation onto the grid.
    let n = (last_frame - first_frame + 1) as usize;
    let mut grid: Vec<RawRow> = Vec::with_capacity(n);
    let mut j = 0usize;
    for k in 0..n {
        let frame = first_frame + k as i64;
        let tf = frame as f64;
        while j + 1 < rows.len() && rows[j + 1].t / dt <= tf + GRID_SNAP {
            j += 1;
        }
        let a = rows[j];
        let sample = if (a.t / dt - tf).abs() <= GRID_SNAP || j + 1 == rows.len() {
            a
        } else {
            let b = rows[j + 1];
            let w = (tf - a.t / dt) / (b.t / dt - a.t / dt);
            let lerp = |p: f64, q: f64| p + (q - p) * w;
            let lerp_opt = |p: Option<f64>, q: Option<f64>| p.zip(q).map(|(p, q)| lerp(p, q));
            RawRow {
                t: tf * dt,
                x: lerp(a.x, b.x),
                y: lerp(a.y, b.y),
                v_long: lerp_opt(a.v_long, b.v_long),
                v_lat: lerp_opt(a.v_lat, b.v_lat),
                a_long: lerp_opt(a.a_long, b.a_long),
                a_lat: lerp_opt(a.a_lat, b.a_lat),
                length: a.length,
                width: a.width,
            }
        };
        grid.push(sample);
    }

    let xs: Vec<f64> = grid.iter().map(|r| r.x).collect();
    let ys: Vec<f64> = grid.iter().map(|r| r.y).collect();
    let column = |f: fn(&RawRow) -> Option<f64>| -> Option<Vec<f64>> {
        grid.iter().map(f).collect::<Option<Vec<f64>>>()
    };
    let v_long_col = column(|r| r.v_long);
    let v_lat_col = column(|r| r.v_lat);
    let a_long = column(|r| r.a_long).unwrap_or_else(|| match &v_long_col {
        Some(v) => first_difference(v, dt),
        None => second_difference(&xs, dt),
    });
    let a_lat = column(|r| r.a_lat).unwrap_or_else(|| match &v_lat_col {
        Some(v) => first_difference(v, dt),
        None => second_difference(&ys, dt),
    });
    let v_long = v_long_col.unwrap_or_else(|| first_difference(&xs, dt));
    let v_lat = v_lat_col.unwrap_or_else(|| first_difference(&ys, dt));

    let points = (0..n)
        .map(|k| {
            let mut v = v_long[k];
            if v < 0.0 {
                *clamped += 1;
                v = 0.0;
            }
            TrajectoryPoint {
                t: (first_frame + k as i64) as f64 * dt,
                x_long: xs[k],
                y_lat: ys[k],
                v_long: v,
                v_lat: v_lat[k],
                a_long: a_long[k],
                a_lat: a_lat[k],
            }
        })
        .collect();

    Ok(Vehicle {
        id,
        class,
        length,
        width,
        dt,
        first_frame,
        points,
    })
}

/// Central differences, one-sided at the ends.
pub fn first_difference(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (x[1] - x[0]) / dt
                } else if i == n - 1 {
                    (x[n - 1] - x[n - 2]) / dt
                } else {
                    (x[i + 1] - x[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

/// Second differences of position; endpoints reuse the nearest interior stencil.
pub fn second_difference(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let inner = |i: usize| (x[i + 1] - 2.0 * x[i] + x[i - 1]) / (dt * dt);
    (0..n).map(|i| inner(i.clamp(1, n - 2))).collect()
}

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "id", "class", "t", "x_long", "y_lat", "v_long", "v_lat", "a_long", "a_lat", "length", "width",
];

/// Writes vehicles in the canonical layout read by `ColumnMap::canonical()`.
///
/// Values use the shortest round-trip decimal form, so re-ingesting the
/// output reproduces the in-memory trajectories exactly.
pub fn write_trajectories<W: Write>(vehicles: &[Vehicle], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRAJECTORY_HEADER)?;
    for v in vehicles {
        for p in &v.points {
            w.write_record(&[
                v.id.to_string(),
                v.class.to_string(),
                p.t.to_string(),
                p.x_long.to_string(),
                p.y_lat.to_string(),
                p.v_long.to_string(),
                p.v_lat.to_string(),
                p.a_long.to_string(),
                p.a_lat.to_string(),
                v.length.to_string(),
                v.width.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
