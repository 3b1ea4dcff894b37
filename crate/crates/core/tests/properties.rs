//! Cross-module properties checked through the public API.

use std::collections::{BTreeMap, HashMap};

use lf_forge::app::review::{apply_decisions, ReviewAction, ReviewDecision, TrimWindow};
use lf_forge::evalmod::{build_dataset, fit_ols, metrics, N_PREDICTORS};
use lf_forge::fdgap::FdTable;
use lf_forge::filters::{
    category_stats, gap_range, run_pipeline, Action, PipelineInput, Preset, Thresholds, Verdict,
};
use lf_forge::pairing::{extract_pairs, CandidatePair, PairingCriteria};
use lf_forge::stats::percentile;
use lf_forge::synthgen::{gen_suite, ScenarioLabel, SynthConfig};
use lf_forge::trajmodel::{Vehicle, VehicleClass};
use lf_forge::wavecorr::{cwt_energy, WaveletConfig};
use proptest::prelude::*;

fn suite(seed: u64, per_label: usize) -> (Vec<Vehicle>, Vec<CandidatePair>) {
    let cfg = SynthConfig {
        counts: ScenarioLabel::ALL.iter().map(|&l| (l, per_label)).collect(),
        seed,
        ..SynthConfig::default()
    };
    let fd = FdTable::default();
    let s = gen_suite(&cfg, fd.get(VehicleClass::Car).unwrap()).unwrap();
    let pairs = extract_pairs(&s.vehicles, &PairingCriteria::default(), cfg.dt);
    (s.vehicles, pairs)
}

fn pipeline(pairs: &[CandidatePair], preset: Preset) -> lf_forge::filters::PipelineResult {
    let fd = FdTable::default();
    let input = PipelineInput {
        thresholds: &Thresholds::default(),
        fd: &fd,
        wavelet: &WaveletConfig::default(),
        min_duration: 5.0,
    };
    run_pipeline(pairs, &preset.stages(), &input).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pair_windows_meet_the_criteria(seed in any::<u64>()) {
        let (_, pairs) = suite(seed, 2);
        for p in &pairs {
            prop_assert!(p.duration() >= 5.0 - 1e-9);
            prop_assert_eq!(p.n_samples(), p.window.n_samples());
            for s in &p.samples {
                prop_assert!(s.gap_long >= 0.0 && s.gap_long <= 30.0);
                prop_assert!(s.overlap > 0.0);
            }
        }
    }

    #[test]
    fn gap_range_is_translation_invariant(seed in any::<u64>(), shift in -5000.0f64..5000.0) {
        let (vehicles, pairs) = suite(seed, 1);
        let moved: HashMap<String, Vehicle> = vehicles
            .iter()
            .map(|v| {
                let mut v = v.clone();
                v.points.iter_mut().for_each(|p| p.x_long += shift);
                (v.id.to_string(), v)
            })
            .collect();
        for p in &pairs {
            let q = CandidatePair::from_vehicles(&moved[p.lv.as_str()], &moved[p.sv.as_str()], p.window).unwrap();
            let (a, b) = (gap_range(&p.samples), gap_range(&q.samples));
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + shift.abs()), "{} vs {}", a, b);
        }
    }

    #[test]
    fn category_statistics_are_ordered(seed in any::<u64>()) {
        let (_, pairs) = suite(seed, 2);
        let samples: Vec<_> = pairs.iter().flat_map(|p| p.samples.clone()).collect();
        let fd = FdTable::default();
        let st = category_stats(&samples, &Default::default(), fd.get(VehicleClass::Car).unwrap()).unwrap();
        for w in [st.speed, st.gap] {
            prop_assert!(w.lower <= w.q1 && w.q1 <= w.q3 && w.q3 <= w.upper);
        }
        for b in st.gap_by_speed.iter().chain(&st.speed_by_gap) {
            prop_assert!(b.p_low <= b.p_high);
        }
    }

    #[test]
    fn percentiles_are_monotone_in_rank(v in prop::collection::vec(-1e3f64..1e3, 1..60), a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(percentile(&v, lo) <= percentile(&v, hi));
    }

    #[test]
    fn every_removal_happens_once(seed in any::<u64>()) {
        let (_, pairs) = suite(seed, 2);
        let res = pipeline(&pairs, Preset::Approach4);
        for l in &res.outcome.pairs {
            let removals: Vec<_> = l.events.iter().filter(|e| matches!(e.action, Action::Removed { .. })).collect();
            prop_assert!(removals.len() <= 1);
            prop_assert_eq!(removals.len() == 1, l.is_removed());
            if let (Some(e), Verdict::Removed { stage, .. }) = (removals.first(), &l.verdict) {
                prop_assert_eq!(e.stage, *stage);
                prop_assert_eq!(l.events.last().unwrap().stage, *stage);
            }
        }
        for s in &res.outcome.summaries {
            prop_assert!(s.points_out <= s.points_in && s.pairs_out <= s.pairs_in);
        }
        let removed = res.outcome.pairs.iter().filter(|l| l.is_removed()).count();
        prop_assert_eq!(removed + res.retained.len(), pairs.len());
    }

    #[test]
    fn energy_is_nonnegative_and_peaks_are_maxima(v in prop::collection::vec(0.0f64..30.0, 16..120)) {
        let e = cwt_energy(&v, 0.0, 0.5, &WaveletConfig::default()).unwrap();
        prop_assert!(e.energy.iter().all(|&x| x >= 0.0));
        for &i in &e.peaks {
            prop_assert!(i > 0 && i + 1 < e.energy.len());
            prop_assert!(e.energy[i] >= e.energy[i - 1] && e.energy[i] >= e.energy[i + 1]);
        }
    }

    #[test]
    fn regression_rows_look_tau_ahead(seed in any::<u64>(), steps in 0usize..4) {
        let (_, pairs) = suite(seed, 1);
        let tau = steps as f64 * 0.5;
        let d = build_dataset(&pairs, tau).unwrap();
        let by_id: HashMap<&str, &CandidatePair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
        let mut per_pair: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &d.rows {
            let p = by_id[r.pair.as_str()];
            let i = (r.frame - p.window.start) as usize;
            prop_assert_eq!(r.y, p.samples[i + steps].sv_accel);
            prop_assert_eq!(r.x, [p.samples[i].rel_vel, p.samples[i].gap_long, p.samples[i].sv_speed]);
            *per_pair.entry(r.pair.as_str()).or_default() += 1;
        }
        for p in &pairs {
            prop_assert_eq!(per_pair.get(p.id.as_str()).copied().unwrap_or(0), p.n_samples().saturating_sub(steps));
        }
    }

    #[test]
    fn fit_residuals_and_metric_bounds(seed in any::<u64>()) {
        let (_, pairs) = suite(seed, 1);
        let d = build_dataset(&pairs, 0.5).unwrap();
        let fit = fit_ols(&d).unwrap();
        let y = d.y();
        let n = y.len() as f64;
        let sigma = lf_forge::stats::population_std(&y);
        prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-6 * n * sigma);
        let pred: Vec<f64> = d.rows.iter().map(|r| fit.predict(&r.x)).collect();
        let m = metrics(&y, &pred, N_PREDICTORS).unwrap();
        prop_assert!(m.nrmse >= 0.0 && m.rmse >= 0.0 && m.mae >= 0.0);
        prop_assert!(m.adj_r2 <= m.r2);
    }

    #[test]
    fn review_commutes_on_disjoint_ids(seed in any::<u64>(), split in 0usize..6, cut in 0.5f64..20.0) {
        let (_, pairs) = suite(seed, 1);
        let decide = |i: usize, p: &CandidatePair| {
            let t0 = p.window.t0(p.dt);
            match i % 3 {
                0 => ReviewDecision { pair_id: p.id.clone(), action: ReviewAction::Remove, trim: vec![], note: None },
                1 => ReviewDecision {
                    pair_id: p.id.clone(),
                    action: ReviewAction::Trim,
                    trim: vec![TrimWindow { t0, t1: (t0 + cut).min(p.window.t1(p.dt)) }],
                    note: None,
                },
                _ => ReviewDecision { pair_id: p.id.clone(), action: ReviewAction::Keep, trim: vec![], note: None },
            }
        };
        let all: Vec<ReviewDecision> = pairs.iter().enumerate().map(|(i, p)| decide(i, p)).collect();
        let (a, b) = all.split_at(split.min(all.len()));
        let (ab, _) = apply_decisions(&apply_decisions(&pairs, a, 5.0, 4).0, b, 5.0, 4);
        let (ba, _) = apply_decisions(&apply_decisions(&pairs, b, 5.0, 4).0, a, 5.0, 4);
        let (once, _) = apply_decisions(&pairs, &all, 5.0, 4);
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(&ab, &once);
    }
}
