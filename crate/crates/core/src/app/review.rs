//! Manual review decisions and their application to the retained set.

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{apply_trim, Action, RemovalReason, StageDetail, StageEvent};
use crate::pairing::CandidatePair;

const T_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ReviewAction {
    Keep,
    Remove,
    Trim,
}

/// Time span to cut, absolute seconds. Samples with `t0 <= t < t1` are cut;
/// a window reaching the pair's last sample also cuts that sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TrimWindow {
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ReviewDecision {
    pub pair_id: String,
    pub action: ReviewAction,
    /// Required for `trim`, forbidden otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trim: Vec<TrimWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReviewError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: String, message: impl Into<String>) -> ReviewError {
    ReviewError::Invalid {
        path,
        message: message.into(),
    }
}

/// What happened to one reviewed pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReviewRecord {
    pub pair_id: String,
    pub decision: ReviewAction,
    /// `None` when the pair was already gone before review.
    pub event: Option<StageEvent>,
}

/// Checks windows against the unfiltered pair: ordered, inside it, disjoint.
pub fn validate_decisions(decisions: &[ReviewDecision], base: &[CandidatePair]) -> Result<(), ReviewError> {
    let by_id: BTreeMap<&str, &CandidatePair> = base.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut seen = BTreeSet::new();
    for (i, d) in decisions.iter().enumerate() {
        let at = format!("[{i}]");
        let Some(pair) = by_id.get(d.pair_id.as_str()) else {
            return Err(invalid(format!("{at}.pair_id"), format!("unknown pair '{}'", d.pair_id)));
        };
        if !seen.insert(d.pair_id.as_str()) {
            return Err(invalid(format!("{at}.pair_id"), format!("duplicate decision for '{}'", d.pair_id)));
        }
        match (d.action, d.trim.is_empty()) {
            (ReviewAction::Trim, true) => return Err(invalid(format!("{at}.trim"), "trim needs at least one window")),
            (ReviewAction::Keep | ReviewAction::Remove, false) => {
                return Err(invalid(format!("{at}.trim"), "windows are only allowed with trim"))
            }
            _ => {}
        }
        let (lo, hi) = (pair.window.t0(pair.dt), pair.window.t1(pair.dt));
        let mut ws: Vec<(usize, TrimWindow)> = d.trim.iter().copied().enumerate().collect();
        for (j, w) in &ws {
            if !(w.t0 < w.t1) {
                return Err(invalid(format!("{at}.trim[{j}]"), "need t0 < t1"));
            }
            if w.t0 < lo - T_EPS || w.t1 > hi + T_EPS {
                return Err(invalid(
                    format!("{at}.trim[{j}]"),
                    format!("window [{}, {}] leaves the pair span [{lo}, {hi}]", w.t0, w.t1),
                ));
            }
        }
        ws.sort_by(|a, b| a.1.t0.total_cmp(&b.1.t0));
        for pair in ws.windows(2) {
            if pair[1].1.t0 < pair[0].1.t1 - T_EPS {
                return Err(invalid(format!("{at}.trim[{}]", pair[1].0), "windows overlap"));
            }
        }
    }
    Ok(())
}

/// Samples of `pair` cut by `windows`.
pub fn cut_mask(pair: &CandidatePair, windows: &[TrimWindow]) -> Vec<bool> {
    let end = pair.window.t1(pair.dt);
    pair.samples
        .iter()
        .map(|s| {
            windows
                .iter()
                .any(|w| s.t >= w.t0 - T_EPS && (s.t < w.t1 - T_EPS || w.t1 >= end - T_EPS))
        })
        .collect()
}

/// Applies validated decisions to `current`, keeping its order. Pairs without
/// a decision pass through; decisions are independent per pair, so disjoint
/// decision sets commute.
pub fn apply_decisions(
    current: &[CandidatePair],
    decisions: &[ReviewDecision],
    min_duration: f64,
    stage: usize,
) -> (Vec<CandidatePair>, Vec<ReviewRecord>) {
    let by_id: BTreeMap<&str, &ReviewDecision> = decisions.iter().map(|d| (d.pair_id.as_str(), d)).collect();
    let mut out = Vec::with_capacity(current.len());
    let mut records: BTreeMap<&str, ReviewRecord> = BTreeMap::new();
    for pair in current {
        let Some(d) = by_id.get(pair.id.as_str()) else {
            out.push(pair.clone());
            continue;
        };
        let (action, kept) = match d.action {
            ReviewAction::Keep => (Action::Kept, Some(pair.clone())),
            ReviewAction::Remove => (
                Action::Removed {
                    reason: RemovalReason::ReviewRemoved,
                },
                None,
            ),
            ReviewAction::Trim => apply_trim(
                pair,
                &cut_mask(pair, &d.trim),
                min_duration,
                RemovalReason::ReviewTrimmedTooShort,
            ),
        };
        out.extend(kept);
        records.insert(
            d.pair_id.as_str(),
            ReviewRecord {
                pair_id: d.pair_id.clone(),
                decision: d.action,
                event: Some(StageEvent {
                    stage,
                    step: "review".to_string(),
                    action,
                    detail: StageDetail::Review { note: d.note.clone() },
                }),
            },
        );
    }
    for d in decisions {
        records.entry(d.pair_id.as_str()).or_insert_with(|| ReviewRecord {
            pair_id: d.pair_id.clone(),
            decision: d.action,
            event: None,
        });
    }
    (out, records.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::Category;
    use crate::trajmodel::{InteractionSample, VehicleClass, VehicleId, Window};

    fn pair(id: &str, n: i64) -> CandidatePair {
        let dt = 0.5;
        CandidatePair {
            id: id.into(),
            lv: VehicleId::new("2"),
            sv: VehicleId::new("1"),
            category: Category::new(VehicleClass::Car, VehicleClass::Car),
            window: Window::new(0, n - 1),
            dt,
            samples: (0..n)
                .map(|k| InteractionSample {
                    t: k as f64 * dt,
                    gap_long: 10.0,
                    gap_lat: 0.0,
                    overlap: 1.0,
                    rel_vel: 0.0,
                    sv_speed: 10.0,
                    lv_speed: 10.0,
                    sv_accel: 0.0,
                })
                .collect(),
        }
    }

    fn trim(id: &str, ws: &[(f64, f64)]) -> ReviewDecision {
        ReviewDecision {
            pair_id: id.into(),
            action: ReviewAction::Trim,
            trim: ws.iter().map(|&(t0, t1)| TrimWindow { t0, t1 }).collect(),
            note: None,
        }
    }

    #[test]
    fn leading_trim_moves_start() {
        let p = pair("a", 41);
        let d = [trim("a", &[(0.0, 3.0)])];
        validate_decisions(&d, &[p.clone()]).unwrap();
        let (out, rec) = apply_decisions(&[p], &d, 5.0, 4);
        assert_eq!(out[0].window.t0(0.5), 3.0);
        assert_eq!(out[0].id, "a");
        assert!(matches!(rec[0].event.as_ref().unwrap().action, Action::Trimmed { t0, .. } if t0 == 3.0));
    }

    #[test]
    fn trailing_trim_includes_last_sample() {
        let p = pair("a", 41);
        let (out, _) = apply_decisions(&[p], &[trim("a", &[(15.0, 20.0)])], 5.0, 4);
        assert_eq!(out[0].window.t1(0.5), 14.5);
    }

    #[test]
    fn trim_leaving_four_seconds_removes() {
        let p = pair("a", 41);
        let (out, rec) = apply_decisions(&[p], &[trim("a", &[(0.0, 16.0)])], 5.0, 4);
        assert!(out.is_empty());
        assert!(matches!(
            rec[0].event.as_ref().unwrap().action,
            Action::Removed {
                reason: RemovalReason::ReviewTrimmedTooShort
            }
        ));
    }

    #[test]
    fn remove_and_keep() {
        let ps = [pair("a", 20), pair("b", 20)];
        let d = [
            ReviewDecision {
                pair_id: "a".into(),
                action: ReviewAction::Remove,
                trim: vec![],
                note: Some("not following".into()),
            },
            ReviewDecision {
                pair_id: "b".into(),
                action: ReviewAction::Keep,
                trim: vec![],
                note: None,
            },
        ];
        let (out, rec) = apply_decisions(&ps, &d, 5.0, 4);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "b");
        assert_eq!(rec.len(), 2);
    }

    #[test]
    fn validation_rejects_bad_windows() {
        let p = [pair("a", 41)];
        let bad = |d: ReviewDecision| validate_decisions(&[d], &p).unwrap_err().to_string();
        assert!(bad(trim("a", &[(5.0, 25.0)])).starts_with("[0].trim[0]"));
        assert!(bad(trim("a", &[(3.0, 2.0)])).contains("t0 < t1"));
        assert!(bad(trim("a", &[(0.0, 3.0), (2.0, 4.0)])).contains("overlap"));
        assert!(bad(trim("zz", &[(0.0, 1.0)])).contains("unknown pair"));
        assert!(bad(trim("a", &[])).contains("at least one"));
        validate_decisions(&[trim("a", &[(0.0, 3.0), (3.0, 4.0)])], &p).unwrap();
    }

    #[test]
    fn decisions_for_gone_pairs_are_recorded() {
        let (out, rec) = apply_decisions(&[], &[trim("a", &[(0.0, 1.0)])], 5.0, 4);
        assert!(out.is_empty());
        assert_eq!(rec[0].event, None);
    }
}
