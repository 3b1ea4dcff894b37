//! Subcommand bodies. Each reads earlier artifacts from the output directory,
//! writes its own, and leaves a manifest behind.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use serde::Serialize;

use super::artifacts::*;
use super::config::RunConfig;
use super::dossier::{build_dossier, file_name};
use super::report::render_report;
use super::review::{apply_decisions, validate_decisions, ReviewDecision, ReviewRecord};
use super::AppError;
use crate::evalmod::{
    build_dataset, evaluate_categories, kfold_eval, write_coefficients_csv, write_improvement_csv,
    write_metrics_csv, write_weight_histogram_csv, Metrics,
};
use crate::fdgap::{gap_threshold_table, standard_speeds};
use crate::filters::{
    run_pipeline, write_stage_summary_csv, Action, FilterOutcome, PipelineInput, PipelineResult, Verdict,
};
use crate::fmt::sig6;
use crate::pairing::{extract_pairs, read_pair_index, summarize_pairs, write_pair_index, write_summary_csv, CandidatePair};
use crate::synthgen::{gen_suite, write_labels};
use crate::trajmodel::{frame_of, ingest, write_trajectories, ColumnMap, IngestConfig, Vehicle, VehicleClass, Window};
use crate::wavecorr::{cwt_energy, peak_match};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Ingest,
    Thresholds,
    Pairs,
    Filter,
    Wavelet,
    Eval,
    Dossier { all: bool },
    ReviewApply { decisions: Vec<PathBuf> },
    Synth,
    Report,
    /// ingest (when an input is configured), pairs, filter, wavelet, eval,
    /// dossier and report in sequence.
    All { all_dossiers: bool },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Thresholds => "thresholds",
            Command::Pairs => "pairs",
            Command::Filter => "filter",
            Command::Wavelet => "wavelet",
            Command::Eval => "eval",
            Command::Dossier { .. } => "dossier",
            Command::ReviewApply { .. } => "review-apply",
            Command::Synth => "synth",
            Command::Report => "report",
            Command::All { .. } => "all",
        }
    }
}

/// One finished subcommand.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub subcommand: &'static str,
    pub manifest: PathBuf,
    pub outputs: Vec<String>,
    pub summary: String,
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Vec<StepReport>, AppError> {
    if let Command::All { all_dossiers } = cmd {
        let mut steps = vec![];
        if cfg.input.is_some() {
            steps.push(Command::Ingest);
        }
        steps.extend([
            Command::Pairs,
            Command::Filter,
            Command::Wavelet,
            Command::Eval,
            Command::Dossier { all: *all_dossiers },
            Command::Report,
        ]);
        let mut out = vec![];
        for s in &steps {
            out.extend(execute(s, cfg)?);
        }
        return Ok(out);
    }
    let mut ws = Workspace::new(&cfg.out_dir);
    let summary = match cmd {
        Command::Ingest => cmd_ingest(&mut ws, cfg)?,
        Command::Thresholds => cmd_thresholds(&mut ws, cfg)?,
        Command::Pairs => cmd_pairs(&mut ws, cfg)?,
        Command::Filter => cmd_filter(&mut ws, cfg)?,
        Command::Wavelet => cmd_wavelet(&mut ws, cfg)?,
        Command::Eval => cmd_eval(&mut ws, cfg)?,
        Command::Dossier { all } => cmd_dossier(&mut ws, cfg, *all)?,
        Command::ReviewApply { decisions } => cmd_review(&mut ws, cfg, decisions)?,
        Command::Synth => cmd_synth(&mut ws, cfg)?,
        Command::Report => cmd_report(&mut ws, cfg)?,
        Command::All { .. } => unreachable!(),
    };
    let outputs = ws.outputs().keys().cloned().collect();
    let (seed, preset) = match cmd {
        Command::Synth => (cfg.synth.seed, None),
        Command::Filter | Command::Dossier { .. } => (cfg.eval.seed, Some(preset_label(cfg))),
        _ => (cfg.eval.seed, None),
    };
    let manifest = ws.finish(cmd.name(), cfg.digest(), seed, preset)?;
    Ok(vec![StepReport {
        subcommand: cmd.name(),
        manifest,
        outputs,
        summary,
    }])
}

fn preset_label(cfg: &RunConfig) -> String {
    match &cfg.pipeline.stages {
        Some(_) => "custom".to_string(),
        None => serde_json::to_value(cfg.pipeline.preset)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    }
}

fn runtime(e: impl std::fmt::Display) -> AppError {
    AppError::Runtime(e.to_string())
}

// ---------------------------------------------------------------------------
// Loading earlier artifacts
// ---------------------------------------------------------------------------

/// Reads `trajectories.csv` back into vehicles.
pub fn load_vehicles(ws: &mut Workspace, cfg: &RunConfig) -> Result<Vec<Vehicle>, AppError> {
    let bytes = ws.read(TRAJECTORIES)?;
    let icfg = IngestConfig {
        columns: ColumnMap::canonical(),
        dt: cfg.ingest.dt,
        ..IngestConfig::default()
    };
    let ing = ingest(&bytes[..], &icfg).map_err(|e| runtime(format!("{TRAJECTORIES}: {e}")))?;
    if let Some(e) = ing.record_errors.first() {
        return Err(runtime(format!("{TRAJECTORIES} row {}: {}", e.row, e.message)));
    }
    Ok(ing.vehicles)
}

/// Rebuilds pairs listed in a pair index from the vehicles.
pub fn load_pairs(ws: &mut Workspace, name: &str, vehicles: &[Vehicle]) -> Result<Vec<CandidatePair>, AppError> {
    let bytes = ws.read(name)?;
    let rows = read_pair_index(&bytes[..]).map_err(|e| runtime(format!("{name}: {e}")))?;
    let by_id: HashMap<&str, &Vehicle> = vehicles.iter().map(|v| (v.id.as_str(), v)).collect();
    rows.into_iter()
        .map(|r| {
            let get = |id: &crate::trajmodel::VehicleId| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| runtime(format!("{name}: pair {} names unknown vehicle {id}", r.pair_id)))
            };
            let (lv, sv) = (get(&r.lv_id)?, get(&r.sv_id)?);
            if r.start_frame > r.end_frame {
                return Err(runtime(format!("{name}: pair {} has an empty window", r.pair_id)));
            }
            let mut p = CandidatePair::from_vehicles(lv, sv, Window::new(r.start_frame, r.end_frame))
                .map_err(|e| runtime(format!("{name}: pair {}: {e}", r.pair_id)))?;
            p.id = r.pair_id;
            Ok(p)
        })
        .collect()
}

fn run_filters(pairs: &[CandidatePair], cfg: &RunConfig) -> Result<PipelineResult, AppError> {
    let fd = cfg.fd_table();
    let input = PipelineInput {
        thresholds: &cfg.thresholds,
        fd: &fd,
        wavelet: &cfg.wavelet,
        min_duration: cfg.pairing.min_duration,
    };
    run_pipeline(pairs, &cfg.pipeline.stages(), &input).map_err(runtime)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct IngestReport<'a> {
    vehicles: usize,
    points: usize,
    clamped_speeds: usize,
    record_errors: &'a [crate::trajmodel::RecordError],
    vehicle_errors: &'a [crate::trajmodel::VehicleError],
}

fn cmd_ingest(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let path = cfg.input.as_ref().ok_or_else(|| AppError::Config {
        path: "input".into(),
        message: "ingest needs an input trajectory file".into(),
    })?;
    let bytes = ws.read_external("input", path)?;
    let ing = ingest(&bytes[..], &cfg.ingest).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    for e in &ing.record_errors {
        log::warn!("row {}: {}", e.row, e.message);
    }
    for e in &ing.vehicle_errors {
        log::warn!("vehicle {}: {}", e.vehicle, e.message);
    }
    ws.write_csv(TRAJECTORIES, |b| write_trajectories(&ing.vehicles, b))?;
    let points = ing.vehicles.iter().map(|v| v.points.len()).sum();
    ws.write_json(
        INGEST_REPORT,
        &IngestReport {
            vehicles: ing.vehicles.len(),
            points,
            clamped_speeds: ing.clamped_speeds,
            record_errors: &ing.record_errors,
            vehicle_errors: &ing.vehicle_errors,
        },
    )?;
    Ok(format!(
        "{} vehicles, {points} points, {} bad rows, {} rejected vehicles",
        ing.vehicles.len(),
        ing.record_errors.len(),
        ing.vehicle_errors.len()
    ))
}

fn cmd_thresholds(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let fd = cfg.fd_table();
    let params: Vec<_> = VehicleClass::ALL
        .iter()
        .map(|&c| fd.get(c).copied())
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    let table = gap_threshold_table(&params, &standard_speeds()).map_err(runtime)?;
    ws.write_csv(GAP_TABLE, |b| table.write_csv(b))?;
    Ok(format!("{} speeds x {} classes", table.rows.len(), table.classes.len()))
}

fn cmd_pairs(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let vehicles = load_vehicles(ws, cfg)?;
    let pairs = extract_pairs(&vehicles, &cfg.pairing, cfg.ingest.dt);
    let summary = summarize_pairs(&pairs, cfg.eval.min_pairs);
    ws.write_csv(PAIRS, |b| write_pair_index(&pairs, b))?;
    ws.write_csv(PAIR_SUMMARY, |b| write_summary_csv(&summary, b))?;
    Ok(format!("{} candidate pairs in {} categories", pairs.len(), summary.len()))
}

fn cmd_filter(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let vehicles = load_vehicles(ws, cfg)?;
    let base = load_pairs(ws, PAIRS, &vehicles)?;
    let res = run_filters(&base, cfg)?;
    ws.write_json(FILTER_LEDGER, &res.outcome)?;
    ws.write_csv(STAGE_SUMMARY, |b| write_stage_summary_csv(&res.outcome.summaries, b))?;
    let stats: BTreeMap<String, _> = res.first_stats.iter().map(|(c, s)| (c.to_string(), s)).collect();
    ws.write_json(CATEGORY_STATS, &stats)?;
    ws.write_csv(FILTERED, |b| write_pair_index(&res.retained, b))?;
    ws.write_csv(RETAINED, |b| write_pair_index(&res.retained, b))?;
    Ok(format!("{} of {} pairs retained", res.retained.len(), base.len()))
}

#[derive(Serialize)]
struct WaveletPairResult {
    pair_id: String,
    category: String,
    undersized: bool,
    lv_peaks: Vec<f64>,
    sv_peaks: Vec<f64>,
    /// (LV peak time, SV peak time)
    matches: Vec<(f64, f64)>,
    matched: bool,
}

#[derive(Serialize)]
struct WaveletReport<'a> {
    config: &'a crate::wavecorr::WaveletConfig,
    pairs: Vec<WaveletPairResult>,
}

/// Wavelet matching on every candidate pair, independent of the filter stages.
fn cmd_wavelet(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    use rayon::prelude::*;
    let vehicles = load_vehicles(ws, cfg)?;
    let base = load_pairs(ws, PAIRS, &vehicles)?;
    let w = &cfg.wavelet;
    let pairs: Vec<WaveletPairResult> = base
        .par_iter()
        .map(|p| {
            let lv: Vec<f64> = p.samples.iter().map(|s| s.lv_speed).collect();
            let sv: Vec<f64> = p.samples.iter().map(|s| s.sv_speed).collect();
            let t0 = p.window.t0(p.dt);
            let mut r = WaveletPairResult {
                pair_id: p.id.clone(),
                category: p.category.to_string(),
                undersized: true,
                lv_peaks: vec![],
                sv_peaks: vec![],
                matches: vec![],
                matched: false,
            };
            if let (Ok(a), Ok(b)) = (cwt_energy(&lv, t0, p.dt, w), cwt_energy(&sv, t0, p.dt, w)) {
                let m = peak_match(&a, &b, w);
                r.undersized = false;
                r.lv_peaks = a.peak_times();
                r.sv_peaks = b.peak_times();
                r.matches = m.pairs;
                r.matched = m.matched;
            }
            r
        })
        .collect();
    let matched = pairs.iter().filter(|r| r.matched).count();
    ws.write_json(WAVELET, &WaveletReport { config: w, pairs })?;
    Ok(format!("{matched} of {} pairs matched", base.len()))
}

/// Pairs alive after each stage, reconstructed from the ledger.
pub fn survivors_by_stage(base: &[CandidatePair], outcome: &FilterOutcome) -> Vec<(usize, String, Vec<CandidatePair>)> {
    let by_id: HashMap<&str, &CandidatePair> = base.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut live: Vec<CandidatePair> = base.to_vec();
    let mut out = vec![(0, "input".to_string(), live.clone())];
    for (k, spec) in outcome.stages.iter().enumerate() {
        let stage = k + 1;
        let mut actions: HashMap<&str, &Action> = HashMap::new();
        for l in &outcome.pairs {
            if let Some(e) = l.events.iter().find(|e| e.stage == stage) {
                actions.insert(l.pair_id.as_str(), &e.action);
            }
        }
        live = live
            .into_iter()
            .filter_map(|p| match actions.get(p.id.as_str()) {
                Some(Action::Removed { .. }) => None,
                Some(Action::Trimmed { t0, t1 }) => {
                    let orig = by_id[p.id.as_str()];
                    let s = (frame_of(*t0, p.dt) - orig.window.start) as usize;
                    let e = (frame_of(*t1, p.dt) - orig.window.start) as usize;
                    Some(orig.restricted(s..e + 1))
                }
                _ => Some(p),
            })
            .collect();
        out.push((stage, spec.name().to_string(), live.clone()));
    }
    out
}

fn cmd_eval(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let vehicles = load_vehicles(ws, cfg)?;
    let base = load_pairs(ws, PAIRS, &vehicles)?;
    let retained = load_pairs(ws, RETAINED, &vehicles)?;
    let ledger: FilterOutcome =
        serde_json::from_slice(&ws.read(FILTER_LEDGER)?).map_err(|e| runtime(format!("{FILTER_LEDGER}: {e}")))?;
    let s = &cfg.eval;
    let evals = evaluate_categories(&base, &retained, s).map_err(runtime)?;
    ws.write_csv(METRICS, |b| write_metrics_csv(&evals, b))?;
    ws.write_csv(IMPROVEMENT, |b| write_improvement_csv(&evals, b))?;
    ws.write_csv(COEFFICIENTS, |b| write_coefficients_csv(&evals, b))?;
    ws.write_csv(WEIGHT_HISTOGRAM, |b| write_weight_histogram_csv(&evals, b))?;

    let modelled: Vec<_> = evals.iter().map(|e| e.category).collect();
    let mut rows: Vec<[String; 10]> = vec![];
    for (stage, step, pairs) in survivors_by_stage(&base, &ledger) {
        for cat in &modelled {
            let ps: Vec<CandidatePair> = pairs.iter().filter(|p| p.category == *cat).cloned().collect();
            if ps.len() < s.k {
                continue;
            }
            let rep = build_dataset(&ps, s.tau).and_then(|d| kfold_eval(&d, s.k, s.seed));
            let rep = match rep {
                Ok(r) => r,
                Err(e) => {
                    log::info!("{cat} after {step}: {e}");
                    continue;
                }
            };
            for (split, m) in [("train", &rep.mean_train), ("test", &rep.mean_test)] {
                let Metrics {
                    r2,
                    adj_r2,
                    mae,
                    rmse,
                    nrmse,
                } = *m;
                rows.push([
                    cat.to_string(),
                    stage.to_string(),
                    step.clone(),
                    ps.len().to_string(),
                    split.to_string(),
                    sig6(r2),
                    sig6(adj_r2),
                    sig6(mae),
                    sig6(rmse),
                    sig6(nrmse),
                ]);
            }
        }
    }
    ws.write_csv(STAGE_METRICS, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["lf_pair", "stage", "step", "n_pairs", "split", "r2", "adj_r2", "mae", "rmse", "nrmse"])?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(format!("{} categories evaluated", evals.len()))
}

#[derive(Serialize)]
struct DossierIndexEntry {
    pair_id: String,
    file: String,
    category: String,
    verdict: Verdict,
}

#[derive(Serialize, serde::Deserialize)]
pub struct ReviewLedger {
    pub records: Vec<ReviewRecord>,
}

fn cmd_dossier(ws: &mut Workspace, cfg: &RunConfig, all: bool) -> Result<String, AppError> {
    let vehicles = load_vehicles(ws, cfg)?;
    let base = load_pairs(ws, PAIRS, &vehicles)?;
    let mut res = run_filters(&base, cfg)?;
    let mut reviewed = std::collections::HashSet::new();
    if ws.exists(REVIEW_LEDGER) {
        let rl: ReviewLedger = serde_json::from_slice(&ws.read(REVIEW_LEDGER)?)
            .map_err(|e| runtime(format!("{REVIEW_LEDGER}: {e}")))?;
        let idx: HashMap<String, usize> =
            res.outcome.pairs.iter().enumerate().map(|(i, l)| (l.pair_id.clone(), i)).collect();
        for r in rl.records {
            let (Some(&i), Some(ev)) = (idx.get(&r.pair_id), r.event) else { continue };
            let l = &mut res.outcome.pairs[i];
            match &ev.action {
                Action::Removed { reason } => {
                    l.verdict = Verdict::Removed {
                        stage: ev.stage,
                        reason: *reason,
                    }
                }
                Action::Trimmed { t0, t1 } => {
                    l.verdict = Verdict::Retained {
                        t0: *t0,
                        t1: *t1,
                        trimmed: true,
                    }
                }
                Action::Kept => {}
            }
            l.events.push(ev);
            reviewed.insert(r.pair_id);
        }
    }
    let by_id: HashMap<&str, &Vehicle> = vehicles.iter().map(|v| (v.id.as_str(), v)).collect();
    let dir = ws.path(DOSSIERS);
    if dir.is_dir() {
        for entry in std::fs::read_dir(&dir).map_err(|e| AppError::io(&dir, e))? {
            let p = entry.map_err(|e| AppError::io(&dir, e))?.path();
            if p.extension().is_some_and(|x| x == "json") {
                std::fs::remove_file(&p).map_err(|e| AppError::io(&p, e))?;
            }
        }
    }
    let mut index = vec![];
    for (pair, ledger) in base.iter().zip(&res.outcome.pairs) {
        if !(all || ledger.is_flagged() || reviewed.contains(&pair.id)) {
            continue;
        }
        let d = build_dossier(
            pair,
            by_id[pair.lv.as_str()],
            by_id[pair.sv.as_str()],
            ledger,
            res.first_flags.get(&pair.id),
            &cfg.wavelet,
        );
        let file = file_name(&pair.id);
        ws.write_json(&format!("{DOSSIERS}/{file}"), &d)?;
        index.push(DossierIndexEntry {
            pair_id: pair.id.clone(),
            file,
            category: d.category,
            verdict: d.verdict,
        });
    }
    let n = index.len();
    ws.write_json(&format!("{DOSSIERS}/index.json"), &index)?;
    Ok(format!("{n} dossiers"))
}

fn cmd_review(ws: &mut Workspace, cfg: &RunConfig, files: &[PathBuf]) -> Result<String, AppError> {
    let mut decisions: Vec<ReviewDecision> = vec![];
    for (i, path) in files.iter().enumerate() {
        let bytes = ws.read_external(&format!("decisions[{i}]"), path)?;
        let de = &mut serde_json::Deserializer::from_slice(&bytes);
        let mut ds: Vec<ReviewDecision> = serde_path_to_error::deserialize(de).map_err(|e| AppError::Config {
            path: format!("{}: {}", path.display(), e.path()),
            message: e.into_inner().to_string(),
        })?;
        decisions.append(&mut ds);
    }
    let vehicles = load_vehicles(ws, cfg)?;
    let base = load_pairs(ws, PAIRS, &vehicles)?;
    let filtered = load_pairs(ws, FILTERED, &vehicles)?;
    let ledger: FilterOutcome =
        serde_json::from_slice(&ws.read(FILTER_LEDGER)?).map_err(|e| runtime(format!("{FILTER_LEDGER}: {e}")))?;
    validate_decisions(&decisions, &base).map_err(|e| {
        let super::review::ReviewError::Invalid { path, message } = e;
        AppError::Config {
            path: format!("decisions{path}"),
            message,
        }
    })?;
    let (retained, records) =
        apply_decisions(&filtered, &decisions, cfg.pairing.min_duration, ledger.stages.len() + 1);
    ws.write_csv(RETAINED, |b| write_pair_index(&retained, b))?;
    ws.write_json(REVIEW_LEDGER, &ReviewLedger { records })?;
    Ok(format!(
        "{} decisions; {} of {} filtered pairs retained",
        decisions.len(),
        retained.len(),
        filtered.len()
    ))
}

fn cmd_synth(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let fd = cfg.fd_table();
    let params = fd.get(cfg.synth.class).map_err(runtime)?;
    let suite = gen_suite(&cfg.synth, params).map_err(runtime)?;
    ws.write_csv(SYNTH_TRAJECTORIES, |b| write_trajectories(&suite.vehicles, b))?;
    let mut labels = vec![];
    write_labels(&suite.labels, &mut labels).map_err(runtime)?;
    ws.write(SYNTH_LABELS, &labels)?;
    Ok(format!("{} labeled pairs", suite.labels.pairs.len()))
}

fn cmd_report(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let text = render_report(ws, cfg)?;
    ws.write(REPORT, text.as_bytes())?;
    Ok(format!("{}", ws.path(REPORT).display()))
}
