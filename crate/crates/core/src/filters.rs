//! Outlier screening of candidate pairs.
//!
//! Stage 1 flags samples that sit in the tails of their category's speed-gap
//! distribution *and* break a physical plausibility rule, then trims flagged
//! runs at the pair ends. Stage 2 drops pairs whose gap drifts steadily
//! (approach or diverge) instead of oscillating. A wavelet stage keeps only
//! pairs whose speed profiles share energy peaks. [`run_pipeline`] chains
//! stages and records every decision.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fdgap::{desirable_gap, FdError, FdParams, FdTable};
use crate::fmt::sig6;
use crate::pairing::{CandidatePair, Category};
use crate::stats::{percentile_sorted, sorted, Whiskers};
use crate::trajmodel::InteractionSample;
use crate::wavecorr::{cwt_energy, peak_match, WaveletConfig, WaveletError};

const MS_TO_KMH: f64 = 3.6;
const DURATION_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("category {0} has no samples")]
    EmptyCategory(String),
    #[error("invalid thresholds for {scope}: {message}")]
    InvalidThresholds { scope: String, message: String },
    #[error("unknown preset '{0}' (expected approach1..approach4)")]
    UnknownPreset(String),
    #[error("bad category key '{0}' in threshold overrides")]
    BadCategoryKey(String),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    /// m/s
    pub rel_vel_abs_max: f64,
    /// meters
    pub lat_gap_abs_max: f64,
    /// meters; applies above the category's speed Q3
    pub tailgate_gap: f64,
    /// meters; applies between the category's speed Q1 and Q3
    pub far_gap: f64,
    /// meters
    pub gap_range_max: f64,
    pub sign_change_ratio_min: f64,
    /// percent
    pub pct_low: f64,
    /// percent
    pub pct_high: f64,
    /// km/h
    pub speed_bin_width: f64,
    /// meters; `None` derives it from the FD slope times `speed_bin_width`
    pub gap_bin_width: Option<f64>,
    /// (low, high) multipliers on the desirable gap
    pub fd_band: (f64, f64),
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            rel_vel_abs_max: 2.5,
            lat_gap_abs_max: 1.5,
            tailgate_gap: 2.0,
            far_gap: 28.0,
            gap_range_max: 10.0,
            sign_change_ratio_min: 0.3,
            pct_low: 5.0,
            pct_high: 95.0,
            speed_bin_width: 5.0,
            gap_bin_width: None,
            fd_band: (0.25, 4.0),
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self, scope: &str) -> Result<(), FilterError> {
        let fail = |m: &str| {
            Err(FilterError::InvalidThresholds {
                scope: scope.to_string(),
                message: m.to_string(),
            })
        };
        if !(0.0 < self.pct_low && self.pct_low < self.pct_high && self.pct_high < 100.0) {
            return fail("need 0 < pct_low < pct_high < 100");
        }
        let positive = [
            self.rel_vel_abs_max,
            self.lat_gap_abs_max,
            self.tailgate_gap,
            self.far_gap,
            self.gap_range_max,
            self.speed_bin_width,
            self.fd_band.0,
            self.fd_band.1,
        ];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return fail("lengths, speeds and band multipliers must be positive");
        }
        if let Some(w) = self.gap_bin_width {
            if !(w > 0.0 && w.is_finite()) {
                return fail("gap_bin_width must be positive");
            }
        }
        if self.fd_band.0 >= self.fd_band.1 {
            return fail("fd_band low must be below high");
        }
        if !(0.0..=1.0).contains(&self.sign_change_ratio_min) {
            return fail("sign_change_ratio_min must be in [0, 1]");
        }
        Ok(())
    }

    pub fn gap_bin_width_for(&self, fd: &FdParams) -> f64 {
        self.gap_bin_width
            .unwrap_or_else(|| fd.slope() * self.speed_bin_width)
    }
}

/// Partial [`ThresholdConfig`] applied on top of the global defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ThresholdOverrides {
    pub rel_vel_abs_max: Option<f64>,
    pub lat_gap_abs_max: Option<f64>,
    pub tailgate_gap: Option<f64>,
    pub far_gap: Option<f64>,
    pub gap_range_max: Option<f64>,
    pub sign_change_ratio_min: Option<f64>,
    pub pct_low: Option<f64>,
    pub pct_high: Option<f64>,
    pub speed_bin_width: Option<f64>,
    pub gap_bin_width: Option<f64>,
    pub fd_band: Option<(f64, f64)>,
}

impl ThresholdOverrides {
    pub fn apply(&self, base: &ThresholdConfig) -> ThresholdConfig {
        ThresholdConfig {
            rel_vel_abs_max: self.rel_vel_abs_max.unwrap_or(base.rel_vel_abs_max),
            lat_gap_abs_max: self.lat_gap_abs_max.unwrap_or(base.lat_gap_abs_max),
            tailgate_gap: self.tailgate_gap.unwrap_or(base.tailgate_gap),
            far_gap: self.far_gap.unwrap_or(base.far_gap),
            gap_range_max: self.gap_range_max.unwrap_or(base.gap_range_max),
            sign_change_ratio_min: self
                .sign_change_ratio_min
                .unwrap_or(base.sign_change_ratio_min),
            pct_low: self.pct_low.unwrap_or(base.pct_low),
            pct_high: self.pct_high.unwrap_or(base.pct_high),
            speed_bin_width: self.speed_bin_width.unwrap_or(base.speed_bin_width),
            gap_bin_width: self.gap_bin_width.or(base.gap_bin_width),
            fd_band: self.fd_band.unwrap_or(base.fd_band),
        }
    }
}

/// Global thresholds plus per-category overrides keyed `"LV-SV"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub defaults: ThresholdConfig,
    pub per_category: BTreeMap<String, ThresholdOverrides>,
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), FilterError> {
        self.defaults.validate("defaults")?;
        for (key, o) in &self.per_category {
            Category::parse(key).ok_or_else(|| FilterError::BadCategoryKey(key.clone()))?;
            o.apply(&self.defaults).validate(key)?;
        }
        Ok(())
    }

    pub fn for_category(&self, cat: Category) -> ThresholdConfig {
        match self.per_category.get(&cat.to_string()) {
            Some(o) => o.apply(&self.defaults),
            None => self.defaults.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Category statistics
// ---------------------------------------------------------------------------

/// Percentiles of one variable inside one bin of another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BinPercentiles {
    /// `floor(value / width)`
    pub index: i64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub p_low: f64,
    pub p_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WhiskerSummary {
    pub lower: f64,
    pub q1: f64,
    pub q3: f64,
    pub upper: f64,
}

impl From<Whiskers> for WhiskerSummary {
    fn from(w: Whiskers) -> Self {
        WhiskerSummary {
            lower: w.lower,
            q1: w.q1,
            q3: w.q3,
            upper: w.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CategoryStats {
    pub n: usize,
    /// SV speed, km/h
    pub speed: WhiskerSummary,
    /// longitudinal gap, meters
    pub gap: WhiskerSummary,
    /// Gap percentiles per SV-speed bin.
    pub gap_by_speed: Vec<BinPercentiles>,
    /// SV-speed percentiles per gap bin. Computed for inspection; not used to flag.
    pub speed_by_gap: Vec<BinPercentiles>,
}

impl CategoryStats {
    pub fn gap_bin(&self, speed_kmh: f64, width: f64) -> Option<&BinPercentiles> {
        let idx = (speed_kmh / width).floor() as i64;
        self.gap_by_speed
            .binary_search_by_key(&idx, |b| b.index)
            .ok()
            .map(|i| &self.gap_by_speed[i])
    }
}

fn binned(pairs: &[(f64, f64)], width: f64, lo_pct: f64, hi_pct: f64) -> Vec<BinPercentiles> {
    let mut bins: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(key, value) in pairs {
        bins.entry((key / width).floor() as i64).or_default().push(value);
    }
    bins.into_iter()
        .map(|(index, values)| {
            let s = sorted(&values);
            BinPercentiles {
                index,
                lo: index as f64 * width,
                hi: (index + 1) as f64 * width,
                n: s.len(),
                p_low: percentile_sorted(&s, lo_pct),
                p_high: percentile_sorted(&s, hi_pct),
            }
        })
        .collect()
}

/// Whiskers and binned percentiles over every sample of one category.
pub fn category_stats(
    samples: &[InteractionSample],
    cfg: &ThresholdConfig,
    fd: &FdParams,
) -> Result<CategoryStats, FilterError> {
    if samples.is_empty() {
        return Err(FilterError::EmptyCategory(fd.class.to_string()));
    }
    let speeds: Vec<f64> = samples.iter().map(|s| s.sv_speed * MS_TO_KMH).collect();
    let gaps: Vec<f64> = samples.iter().map(|s| s.gap_long).collect();
    let speed_gap: Vec<(f64, f64)> = speeds.iter().copied().zip(gaps.iter().copied()).collect();
    let gap_speed: Vec<(f64, f64)> = speed_gap.iter().map(|&(v, g)| (g, v)).collect();
    Ok(CategoryStats {
        n: samples.len(),
        speed: Whiskers::of_sorted(&sorted(&speeds)).into(),
        gap: Whiskers::of_sorted(&sorted(&gaps)).into(),
        gap_by_speed: binned(&speed_gap, cfg.speed_bin_width, cfg.pct_low, cfg.pct_high),
        speed_by_gap: binned(
            &gap_speed,
            cfg.gap_bin_width_for(fd),
            cfg.pct_low,
            cfg.pct_high,
        ),
    })
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    GapBelowP5,
    GapAboveP95,
    SpeedAboveWhisker,
    SpeedBelowWhisker,
    RelVelExcess,
    LatGapExcess,
    Tailgate,
    FarGap,
    FdBand,
}

impl Reason {
    pub const ALL: [Reason; 9] = [
        Reason::GapBelowP5,
        Reason::GapAboveP95,
        Reason::SpeedAboveWhisker,
        Reason::SpeedBelowWhisker,
        Reason::RelVelExcess,
        Reason::LatGapExcess,
        Reason::Tailgate,
        Reason::FarGap,
        Reason::FdBand,
    ];

    fn bit(self) -> u16 {
        1 << self as u16
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

/// Set of [`Reason`]s for one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ReasonSet(u16);

impl ReasonSet {
    pub fn insert(&mut self, r: Reason) {
        self.0 |= r.bit();
    }

    pub fn contains(&self, r: Reason) -> bool {
        self.0 & r.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn intersects(&self, other: ReasonSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Reason> + '_ {
        Reason::ALL.into_iter().filter(|r| self.contains(*r))
    }
}

impl FromIterator<Reason> for ReasonSet {
    fn from_iter<I: IntoIterator<Item = Reason>>(iter: I) -> Self {
        let mut s = ReasonSet::default();
        for r in iter {
            s.insert(r);
        }
        s
    }
}

/// Every reason each sample triggers.
pub fn flag_stage1(
    pair: &CandidatePair,
    stats: &CategoryStats,
    cfg: &ThresholdConfig,
    fd: &FdParams,
) -> Vec<ReasonSet> {
    pair.samples
        .iter()
        .map(|s| flag_sample(s, stats, cfg, fd))
        .collect()
}

pub fn flag_sample(
    s: &InteractionSample,
    stats: &CategoryStats,
    cfg: &ThresholdConfig,
    fd: &FdParams,
) -> ReasonSet {
    let mut out = ReasonSet::default();
    let v = s.sv_speed * MS_TO_KMH;
    let g = s.gap_long;
    if let Some(bin) = stats.gap_bin(v, cfg.speed_bin_width) {
        if g < bin.p_low {
            out.insert(Reason::GapBelowP5);
        }
        if g > bin.p_high {
            out.insert(Reason::GapAboveP95);
        }
    }
    if v > stats.speed.upper {
        out.insert(Reason::SpeedAboveWhisker);
    }
    if v < stats.speed.lower {
        out.insert(Reason::SpeedBelowWhisker);
    }
    if s.rel_vel.abs() > cfg.rel_vel_abs_max {
        out.insert(Reason::RelVelExcess);
    }
    if s.gap_lat.abs() > cfg.lat_gap_abs_max {
        out.insert(Reason::LatGapExcess);
    }
    if g < cfg.tailgate_gap && v > stats.speed.q3 {
        out.insert(Reason::Tailgate);
    }
    if g > cfg.far_gap && v >= stats.speed.q1 && v <= stats.speed.q3 {
        out.insert(Reason::FarGap);
    }
    if let Ok(s_eq) = desirable_gap(fd, v.max(0.0)) {
        if g < cfg.fd_band.0 * s_eq || g > cfg.fd_band.1 * s_eq {
            out.insert(Reason::FdBand);
        }
    }
    out
}

/// Which flags make a sample an outlier: it must carry a `screen` reason and a
/// `confirm` reason. An empty list imposes no requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Stage1Rule {
    pub screen: Vec<Reason>,
    pub confirm: Vec<Reason>,
}

impl Default for Stage1Rule {
    fn default() -> Self {
        Stage1Rule {
            screen: vec![
                Reason::GapBelowP5,
                Reason::GapAboveP95,
                Reason::SpeedAboveWhisker,
                Reason::SpeedBelowWhisker,
                Reason::FdBand,
            ],
            confirm: vec![
                Reason::RelVelExcess,
                Reason::LatGapExcess,
                Reason::Tailgate,
                Reason::FarGap,
            ],
        }
    }
}

impl Stage1Rule {
    pub fn is_outlier(&self, flags: ReasonSet) -> bool {
        let screen: ReasonSet = self.screen.iter().copied().collect();
        let confirm: ReasonSet = self.confirm.iter().copied().collect();
        !flags.is_empty()
            && (screen.is_empty() || flags.intersects(screen))
            && (confirm.is_empty() || flags.intersects(confirm))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrimOutcome {
    Unchanged,
    /// Surviving sample range.
    Trimmed(Range<usize>),
    TooShort,
}

/// Drops the flagged prefix and suffix runs; interior flags stay.
pub fn trim_pair(outlier: &[bool], dt: f64, min_duration: f64) -> TrimOutcome {
    let n = outlier.len();
    let start = outlier.iter().take_while(|&&f| f).count();
    if start == n {
        return TrimOutcome::TooShort;
    }
    let end = n - outlier.iter().rev().take_while(|&&f| f).count();
    if (end - start - 1) as f64 * dt + DURATION_EPS < min_duration {
        return TrimOutcome::TooShort;
    }
    if start == 0 && end == n {
        TrimOutcome::Unchanged
    } else {
        TrimOutcome::Trimmed(start..end)
    }
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

/// `max(gap) - min(gap)` over the pair, meters.
pub fn gap_range(samples: &[InteractionSample]) -> f64 {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.gap_long), hi.max(s.gap_long))
        });
    if samples.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Sign flips of `rel_vel` divided by the number of samples. Zeros carry the
/// previous nonzero sign; an all-zero series gives 0.
pub fn sign_change_ratio(rel_vel: &[f64]) -> f64 {
    if rel_vel.is_empty() {
        return 0.0;
    }
    let mut prev: Option<bool> = None;
    let mut changes = 0usize;
    for &v in rel_vel {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        let pos = v > 0.0;
        if prev.is_some_and(|p| p != pos) {
            changes += 1;
        }
        prev = Some(pos);
    }
    if prev.is_none() {
        log::debug!("relative velocity is identically zero; sign-change ratio set to 0");
    }
    changes as f64 / rel_vel.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Stage2Metrics {
    pub gap_range: f64,
    pub sign_change_ratio: f64,
    pub removed: bool,
}

pub fn flag_stage2(samples: &[InteractionSample], cfg: &ThresholdConfig) -> Stage2Metrics {
    let range = gap_range(samples);
    let rv: Vec<f64> = samples.iter().map(|s| s.rel_vel).collect();
    let r = sign_change_ratio(&rv);
    Stage2Metrics {
        gap_range: range,
        sign_change_ratio: r,
        removed: range > cfg.gap_range_max && r < cfg.sign_change_ratio_min,
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "stage", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSpec {
    Stage1 {
        #[serde(default, flatten)]
        rule: Stage1Rule,
    },
    Stage2,
    Wavelet {
        /// Overrides the wavelet config's `min_matches`.
        #[serde(default)]
        min_matches: Option<usize>,
    },
}

impl StageSpec {
    pub fn name(&self) -> &'static str {
        match self {
            StageSpec::Stage1 { .. } => "stage1",
            StageSpec::Stage2 => "stage2",
            StageSpec::Wavelet { .. } => "wavelet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Approach1,
    Approach2,
    Approach3,
    Approach4,
}

impl Preset {
    /// Approaches 1 to 3 are best-effort reconstructions; approach 4 is
    /// stage 1, stage 2, then wavelet matching.
    pub fn stages(self) -> Vec<StageSpec> {
        let s1 = || StageSpec::Stage1 {
            rule: Stage1Rule::default(),
        };
        let s1_confirm = |confirm: Vec<Reason>| StageSpec::Stage1 {
            rule: Stage1Rule {
                confirm,
                ..Stage1Rule::default()
            },
        };
        let wav = |m| StageSpec::Wavelet { min_matches: m };
        match self {
            Preset::Approach1 => vec![
                s1_confirm(vec![Reason::RelVelExcess]),
                s1_confirm(vec![Reason::LatGapExcess]),
                s1_confirm(vec![Reason::Tailgate, Reason::FarGap]),
                StageSpec::Stage2,
                wav(Some(3)),
            ],
            Preset::Approach2 => vec![StageSpec::Stage2, s1(), wav(None)],
            Preset::Approach3 => vec![s1(), wav(None), StageSpec::Stage2],
            Preset::Approach4 => vec![s1(), StageSpec::Stage2, wav(None)],
        }
    }
}

impl FromStr for Preset {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "approach1" => Ok(Preset::Approach1),
            "approach2" => Ok(Preset::Approach2),
            "approach3" => Ok(Preset::Approach3),
            "approach4" => Ok(Preset::Approach4),
            other => Err(FilterError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RemovalReason {
    TrimmedTooShort,
    ApproachDiverge,
    WaveletNoMatch,
    WaveletUndersized,
    ReviewRemoved,
    ReviewTrimmedTooShort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Kept,
    /// Surviving window, seconds.
    Trimmed { t0: f64, t1: f64 },
    Removed { reason: RemovalReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageDetail {
    Stage1 {
        outliers: usize,
        reason_counts: BTreeMap<Reason, usize>,
    },
    Stage2(Stage2Metrics),
    Wavelet {
        lv_peaks: usize,
        sv_peaks: usize,
        matches: usize,
    },
    Review {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StageEvent {
    /// 1-based position in the stage list.
    pub stage: usize,
    pub step: String,
    #[serde(flatten)]
    pub action: Action,
    pub detail: StageDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Retained { t0: f64, t1: f64, trimmed: bool },
    Removed { stage: usize, reason: RemovalReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PairLedger {
    pub pair_id: String,
    pub category: String,
    pub n_samples: usize,
    pub events: Vec<StageEvent>,
    pub verdict: Verdict,
}

impl PairLedger {
    pub fn is_removed(&self) -> bool {
        matches!(self.verdict, Verdict::Removed { .. })
    }

    /// Removed, trimmed, or carrying at least one outlier sample.
    pub fn is_flagged(&self) -> bool {
        self.events.iter().any(|e| match (&e.action, &e.detail) {
            (Action::Kept, StageDetail::Stage1 { outliers, .. }) => *outliers > 0,
            (Action::Kept, _) => false,
            _ => true,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StageSummary {
    /// 0 is the input set.
    pub stage: usize,
    pub step: String,
    /// `"ALL"` or an `LV-SV` category.
    pub category: String,
    pub pairs_in: usize,
    pub pairs_out: usize,
    pub points_in: usize,
    pub points_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FilterOutcome {
    pub stages: Vec<StageSpec>,
    pub summaries: Vec<StageSummary>,
    pub pairs: Vec<PairLedger>,
}

/// Per-sample flags of the first stage-1 pass, for dossiers.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFlags {
    pub reasons: Vec<ReasonSet>,
    pub outlier: Vec<bool>,
}

pub struct PipelineInput<'a> {
    pub thresholds: &'a Thresholds,
    pub fd: &'a FdTable,
    pub wavelet: &'a WaveletConfig,
    /// seconds
    pub min_duration: f64,
}

pub struct PipelineResult {
    pub outcome: FilterOutcome,
    pub retained: Vec<CandidatePair>,
    pub first_flags: BTreeMap<String, SampleFlags>,
    /// Stats of the first stage-1 pass per category.
    pub first_stats: BTreeMap<Category, CategoryStats>,
}

struct Live {
    ledger: usize,
    pair: CandidatePair,
}

/// Applies `stages` in order, each to the survivors of the one before.
pub fn run_pipeline(
    pairs: &[CandidatePair],
    stages: &[StageSpec],
    input: &PipelineInput<'_>,
) -> Result<PipelineResult, FilterError> {
    input.thresholds.validate()?;
    input.wavelet.validate()?;
    let mut ledgers: Vec<PairLedger> = pairs
        .iter()
        .map(|p| PairLedger {
            pair_id: p.id.clone(),
            category: p.category.to_string(),
            n_samples: p.n_samples(),
            events: vec![],
            verdict: Verdict::Retained {
                t0: p.window.t0(p.dt),
                t1: p.window.t1(p.dt),
                trimmed: false,
            },
        })
        .collect();
    let mut live: Vec<Live> = pairs
        .iter()
        .cloned()
        .enumerate()
        .map(|(ledger, pair)| Live { ledger, pair })
        .collect();
    let mut summaries = summarize(0, "input", &live, &live);
    let mut first_flags = BTreeMap::new();
    let mut first_stats = BTreeMap::new();

    for (k, spec) in stages.iter().enumerate() {
        let stage = k + 1;
        let before: Vec<(Category, usize)> =
            live.iter().map(|l| (l.pair.category, l.pair.n_samples())).collect();
        let results: Vec<(StageEvent, Option<CandidatePair>, Option<SampleFlags>)> = match spec {
            StageSpec::Stage1 { rule } => {
                let stats = stats_by_category(&live, input)?;
                if first_stats.is_empty() {
                    first_stats = stats.clone();
                }
                live.par_iter()
                    .map(|l| {
                        let cat = l.pair.category;
                        let cfg = input.thresholds.for_category(cat);
                        let fd = input.fd.get(cat.sv)?;
                        let reasons = flag_stage1(&l.pair, &stats[&cat], &cfg, fd);
                        let outlier: Vec<bool> = reasons.iter().map(|r| rule.is_outlier(*r)).collect();
                        let mut reason_counts = BTreeMap::new();
                        for r in reasons.iter().flat_map(|s| s.iter()) {
                            *reason_counts.entry(r).or_insert(0) += 1;
                        }
                        let detail = StageDetail::Stage1 {
                            outliers: outlier.iter().filter(|&&o| o).count(),
                            reason_counts,
                        };
                        let (action, kept) =
                            apply_trim(&l.pair, &outlier, input.min_duration, RemovalReason::TrimmedTooShort);
                        let flags = SampleFlags { reasons, outlier };
                        Ok((event(stage, spec, action, detail), kept, Some(flags)))
                    })
                    .collect::<Result<_, FilterError>>()?
            }
            StageSpec::Stage2 => live
                .par_iter()
                .map(|l| {
                    let cfg = input.thresholds.for_category(l.pair.category);
                    let m = flag_stage2(&l.pair.samples, &cfg);
                    let (action, kept) = if m.removed {
                        (
                            Action::Removed {
                                reason: RemovalReason::ApproachDiverge,
                            },
                            None,
                        )
                    } else {
                        (Action::Kept, Some(l.pair.clone()))
                    };
                    (event(stage, spec, action, StageDetail::Stage2(m)), kept, None)
                })
                .collect(),
            StageSpec::Wavelet { min_matches } => {
                let cfg = WaveletConfig {
                    min_matches: min_matches.unwrap_or(input.wavelet.min_matches),
                    ..input.wavelet.clone()
                };
                cfg.validate()?;
                live.par_iter()
                    .map(|l| {
                        let (action, detail) = wavelet_verdict(&l.pair, &cfg);
                        let kept = matches!(action, Action::Kept).then(|| l.pair.clone());
                        (event(stage, spec, action, detail), kept, None)
                    })
                    .collect()
            }
        };

        let mut next = Vec::with_capacity(live.len());
        for (l, (ev, kept, flags)) in live.iter().zip(results) {
            let ledger = &mut ledgers[l.ledger];
            if let Some(f) = flags {
                first_flags.entry(ledger.pair_id.clone()).or_insert(f);
            }
            if let Action::Removed { reason } = ev.action {
                ledger.verdict = Verdict::Removed { stage, reason };
            }
            ledger.events.push(ev);
            if let Some(pair) = kept {
                next.push(Live {
                    ledger: l.ledger,
                    pair,
                });
            }
        }
        summaries.extend(summarize_counts(stage, spec.name(), &before, &next));
        live = next;
    }

    for l in &live {
        let trimmed = l.pair.n_samples() != pairs[l.ledger].n_samples();
        ledgers[l.ledger].verdict = Verdict::Retained {
            t0: l.pair.window.t0(l.pair.dt),
            t1: l.pair.window.t1(l.pair.dt),
            trimmed,
        };
    }
    Ok(PipelineResult {
        outcome: FilterOutcome {
            stages: stages.to_vec(),
            summaries,
            pairs: ledgers,
        },
        retained: live.into_iter().map(|l| l.pair).collect(),
        first_flags,
        first_stats,
    })
}

fn event(stage: usize, spec: &StageSpec, action: Action, detail: StageDetail) -> StageEvent {
    StageEvent {
        stage,
        step: spec.name().to_string(),
        action,
        detail,
    }
}

/// Trims `pair` by an outlier mask; returns the action and the survivor.
pub fn apply_trim(
    pair: &CandidatePair,
    outlier: &[bool],
    min_duration: f64,
    too_short: RemovalReason,
) -> (Action, Option<CandidatePair>) {
    match trim_pair(outlier, pair.dt, min_duration) {
        TrimOutcome::Unchanged => (Action::Kept, Some(pair.clone())),
        TrimOutcome::Trimmed(r) => {
            let p = pair.restricted(r);
            (
                Action::Trimmed {
                    t0: p.window.t0(p.dt),
                    t1: p.window.t1(p.dt),
                },
                Some(p),
            )
        }
        TrimOutcome::TooShort => (Action::Removed { reason: too_short }, None),
    }
}

fn wavelet_verdict(pair: &CandidatePair, cfg: &WaveletConfig) -> (Action, StageDetail) {
    let lv: Vec<f64> = pair.samples.iter().map(|s| s.lv_speed).collect();
    let sv: Vec<f64> = pair.samples.iter().map(|s| s.sv_speed).collect();
    let t0 = pair.window.t0(pair.dt);
    match (cwt_energy(&lv, t0, pair.dt, cfg), cwt_energy(&sv, t0, pair.dt, cfg)) {
        (Ok(a), Ok(b)) => {
            let m = peak_match(&a, &b, cfg);
            let detail = StageDetail::Wavelet {
                lv_peaks: a.peaks.len(),
                sv_peaks: b.peaks.len(),
                matches: m.count,
            };
            let action = if m.matched {
                Action::Kept
            } else {
                Action::Removed {
                    reason: RemovalReason::WaveletNoMatch,
                }
            };
            (action, detail)
        }
        _ => (
            Action::Removed {
                reason: RemovalReason::WaveletUndersized,
            },
            StageDetail::Wavelet {
                lv_peaks: 0,
                sv_peaks: 0,
                matches: 0,
            },
        ),
    }
}

fn stats_by_category(
    live: &[Live],
    input: &PipelineInput<'_>,
) -> Result<BTreeMap<Category, CategoryStats>, FilterError> {
    let mut samples: BTreeMap<Category, Vec<InteractionSample>> = BTreeMap::new();
    for l in live {
        samples
            .entry(l.pair.category)
            .or_default()
            .extend_from_slice(&l.pair.samples);
    }
    samples
        .into_iter()
        .map(|(cat, s)| {
            let cfg = input.thresholds.for_category(cat);
            let stats = category_stats(&s, &cfg, input.fd.get(cat.sv)?)
                .map_err(|_| FilterError::EmptyCategory(cat.to_string()))?;
            Ok((cat, stats))
        })
        .collect()
}

fn summarize(stage: usize, step: &str, before: &[Live], after: &[Live]) -> Vec<StageSummary> {
    let b: Vec<(Category, usize)> = before
        .iter()
        .map(|l| (l.pair.category, l.pair.n_samples()))
        .collect();
    summarize_counts(stage, step, &b, after)
}

fn summarize_counts(
    stage: usize,
    step: &str,
    before: &[(Category, usize)],
    after: &[Live],
) -> Vec<StageSummary> {
    let mut rows: BTreeMap<Option<Category>, [usize; 4]> = BTreeMap::new();
    rows.insert(None, [0; 4]);
    for &(c, n) in before {
        for key in [None, Some(c)] {
            let e = rows.entry(key).or_default();
            e[0] += 1;
            e[2] += n;
        }
    }
    for l in after {
        for key in [None, Some(l.pair.category)] {
            let e = rows.entry(key).or_default();
            e[1] += 1;
            e[3] += l.pair.n_samples();
        }
    }
    rows.into_iter()
        .map(|(cat, [pi, po, xi, xo])| StageSummary {
            stage,
            step: step.to_string(),
            category: cat.map_or_else(|| "ALL".to_string(), |c| c.to_string()),
            pairs_in: pi,
            pairs_out: po,
            points_in: xi,
            points_out: xo,
        })
        .collect()
}

pub fn write_stage_summary_csv<W: Write>(rows: &[StageSummary], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "stage",
        "step",
        "category",
        "pairs_in",
        "pairs_out",
        "points_in",
        "points_out",
        "points_removed_pct",
    ])?;
    for r in rows {
        let pct = if r.points_in == 0 {
            0.0
        } else {
            100.0 * (r.points_in - r.points_out) as f64 / r.points_in as f64
        };
        w.write_record([
            r.stage.to_string(),
            r.step.clone(),
            r.category.clone(),
            r.pairs_in.to_string(),
            r.pairs_out.to_string(),
            r.points_in.to_string(),
            r.points_out.to_string(),
            sig6(pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
