//! Acceleration-response regression used to score a pair set.
//!
//! The SV's acceleration one reaction time later is regressed on relative
//! speed, longitudinal gap and SV speed. Folds split by pair, so samples of
//! one pair never land on both sides of a split.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::fmt::{p_value, sig6};
use crate::pairing::{CandidatePair, Category};

pub const COLUMNS: [&str; 4] = ["intercept", "rel_vel", "gap_long", "sv_speed"];
pub const N_PREDICTORS: usize = 3;
const WEIGHT_EPS: f64 = 1e-6;
const GRID_TOL: f64 = 1e-9;
/// Relative pivot size below which a column counts as collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("tau = {tau} s is not a multiple of dt = {dt} s")]
    TauOffGrid { tau: f64, dt: f64 },
    #[error("need more than 4 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("design matrix is rank deficient: column '{0}' is collinear with earlier columns")]
    Collinear(&'static str),
    #[error("observed values have zero spread; NRMSE undefined")]
    ZeroSpread,
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("length mismatch: {0} observed vs {1} predicted")]
    LengthMismatch(usize, usize),
    #[error("need at least {k} pairs for {k}-fold evaluation, got {pairs}")]
    TooFewPairs { k: usize, pairs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    /// Reaction time, seconds.
    pub tau: f64,
    pub k: usize,
    pub seed: u64,
    /// Categories with fewer base pairs are skipped.
    pub min_pairs: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            tau: 0.5,
            k: 5,
            seed: 7,
            min_pairs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub pair: String,
    pub frame: i64,
    /// [rel_vel, gap_long, sv_speed]
    pub x: [f64; N_PREDICTORS],
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionDataset {
    pub tau: f64,
    pub rows: Vec<Row>,
}

impl RegressionDataset {
    pub fn y(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Pair ids in first-appearance order.
    pub fn pair_ids(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.pair.as_str()) && !out.contains(&r.pair.as_str()) {
                out.push(&r.pair);
            }
        }
        out
    }

    fn subset(&self, idx: &[usize]) -> RegressionDataset {
        RegressionDataset {
            tau: self.tau,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// One row per sample with a successor `tau` later in the same pair.
pub fn build_dataset(pairs: &[CandidatePair], tau: f64) -> Result<RegressionDataset, EvalError> {
    let mut rows = Vec::new();
    for p in pairs {
        let steps = tau / p.dt;
        if !(steps >= 0.0) || (steps - steps.round()).abs() > GRID_TOL * steps.max(1.0) {
            return Err(EvalError::TauOffGrid { tau, dt: p.dt });
        }
        let lag = steps.round() as usize;
        for (k, s) in p.samples.iter().enumerate() {
            let Some(next) = p.samples.get(k + lag) else {
                break;
            };
            rows.push(Row {
                pair: p.id.clone(),
                frame: p.window.start + k as i64,
                x: [s.rel_vel, s.gap_long, s.sv_speed],
                y: next.sv_accel,
            });
        }
    }
    Ok(RegressionDataset { tau, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ModelFit {
    pub beta: [f64; 4],
    pub std_err: [f64; 4],
    pub p_values: [f64; 4],
    pub r2: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl ModelFit {
    pub fn predict(&self, x: &[f64; N_PREDICTORS]) -> f64 {
        self.beta[0] + self.beta[1] * x[0] + self.beta[2] * x[1] + self.beta[3] * x[2]
    }
}

/// Ordinary least squares via modified Gram-Schmidt QR.
pub fn fit_ols(data: &RegressionDataset) -> Result<ModelFit, EvalError> {
    let n = data.rows.len();
    if n <= 4 {
        return Err(EvalError::TooFewRows(n));
    }
    let mut q: Vec<Vec<f64>> = (0..4)
        .map(|j| {
            data.rows
                .iter()
                .map(|r| if j == 0 { 1.0 } else { r.x[j - 1] })
                .collect()
        })
        .collect();
    let norms: Vec<f64> = q.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut r = [[0.0f64; 4]; 4];
    for j in 0..4 {
        for i in 0..j {
            let rij = dot(&q[i], &q[j]);
            r[i][j] = rij;
            let (head, tail) = q.split_at_mut(j);
            for (a, b) in tail[0].iter_mut().zip(&head[i]) {
                *a -= rij * b;
            }
        }
        let rjj = dot(&q[j], &q[j]).sqrt();
        if rjj <= RANK_TOL * norms[j].max(f64::MIN_POSITIVE) || rjj == 0.0 {
            return Err(EvalError::Collinear(COLUMNS[j]));
        }
        r[j][j] = rjj;
        for a in q[j].iter_mut() {
            *a /= rjj;
        }
    }
    let y = data.y();
    let qty: Vec<f64> = q.iter().map(|c| dot(c, &y)).collect();
    let mut beta = [0.0; 4];
    for i in (0..4).rev() {
        let s: f64 = (i + 1..4).map(|k| r[i][k] * beta[k]).sum();
        beta[i] = (qty[i] - s) / r[i][i];
    }
    // R^-1, upper triangular.
    let mut rinv = [[0.0f64; 4]; 4];
    for j in 0..4 {
        rinv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r[i][k] * rinv[k][j]).sum();
            rinv[i][j] = -s / r[i][i];
        }
    }
    let fit0 = ModelFit {
        beta,
        std_err: [0.0; 4],
        p_values: [1.0; 4],
        r2: 0.0,
        residuals: vec![],
    };
    let residuals: Vec<f64> = data.rows.iter().map(|row| row.y - fit0.predict(&row.x)).collect();
    let sse = dot(&residuals, &residuals);
    let dof = (n - 4) as f64;
    let sigma2 = sse / dof;
    let t_dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    let mut std_err = [0.0; 4];
    let mut p_values = [1.0; 4];
    for j in 0..4 {
        let var: f64 = (j..4).map(|k| rinv[j][k] * rinv[j][k]).sum::<f64>() * sigma2;
        std_err[j] = var.sqrt();
        p_values[j] = if std_err[j] == 0.0 {
            if beta[j] == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            let t = (beta[j] / std_err[j]).abs();
            (2.0 * (1.0 - t_dist.cdf(t))).clamp(0.0, 1.0)
        };
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r2 = if sst == 0.0 { 0.0 } else { 1.0 - sse / sst };
    Ok(ModelFit {
        beta,
        std_err,
        p_values,
        r2,
        residuals,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Metrics {
    pub r2: f64,
    pub adj_r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub nrmse: f64,
}

impl Metrics {
    pub fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Metrics {
            r2: avg(|m| m.r2),
            adj_r2: avg(|m| m.adj_r2),
            mae: avg(|m| m.mae),
            rmse: avg(|m| m.rmse),
            nrmse: avg(|m| m.nrmse),
        }
    }
}

/// Goodness of fit with `p` predictors; `nrmse` divides by the population
/// standard deviation of `y`.
pub fn metrics(y: &[f64], y_hat: &[f64], p: usize) -> Result<Metrics, EvalError> {
    let n = y.len();
    if n != y_hat.len() {
        return Err(EvalError::LengthMismatch(n, y_hat.len()));
    }
    if n < 2 {
        return Err(EvalError::TooFewObservations(n));
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(EvalError::ZeroSpread);
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / nf;
    let rmse = (sse / nf).sqrt();
    let sigma = (sst / nf).sqrt();
    let r2 = 1.0 - sse / sst;
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - p as f64 - 1.0);
    Ok(Metrics {
        r2,
        adj_r2,
        mae,
        rmse,
        nrmse: rmse / sigma,
    })
}

/// `1 / (|r| + 1e-6)` per residual.
pub fn wlr_weights(residuals: &[f64]) -> Vec<f64> {
    residuals.iter().map(|r| 1.0 / (r.abs() + WEIGHT_EPS)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    /// `None` for the open last bin.
    pub hi: Option<f64>,
    pub count: usize,
}

/// Counts in `[0, w), [w, 2w), ...`, with everything from `w·n_bins` up in a
/// final open bin.
pub fn histogram(values: &[f64], width: f64, n_bins: usize) -> Vec<HistogramBin> {
    let mut counts = vec![0usize; n_bins + 1];
    for &v in values {
        let b = ((v / width).floor().max(0.0) as usize).min(n_bins);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 * width,
            hi: (i < n_bins).then(|| (i + 1) as f64 * width),
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train: Metrics,
    pub test: Metrics,
    pub fit: ModelFit,
    pub test_pairs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KFoldReport {
    pub folds: Vec<FoldResult>,
    pub mean_train: Metrics,
    pub mean_test: Metrics,
    pub best_r2: usize,
    pub worst_r2: usize,
    pub best_nrmse: usize,
    pub worst_nrmse: usize,
}

/// Seeded shuffle of pair ids dealt round-robin into `k` folds.
pub fn fold_assignment(pairs: &[&str], k: usize, seed: u64) -> Vec<Vec<String>> {
    let mut order: Vec<String> = pairs.iter().map(|s| s.to_string()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, p) in order.into_iter().enumerate() {
        folds[i % k].push(p);
    }
    folds
}

pub fn kfold_eval(data: &RegressionDataset, k: usize, seed: u64) -> Result<KFoldReport, EvalError> {
    let ids = data.pair_ids();
    if k < 2 || ids.len() < k {
        return Err(EvalError::TooFewPairs { k, pairs: ids.len() });
    }
    let folds = fold_assignment(&ids, k, seed);
    let fold_of: BTreeMap<&str, usize> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, ps)| ps.iter().map(move |p| (p.as_str(), f)))
        .collect();
    let results: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..data.rows.len()).partition(|&i| fold_of[data.rows[i].pair.as_str()] == f);
            let train = data.subset(&train_idx);
            let test = data.subset(&test_idx);
            let fit = fit_ols(&train)?;
            let score = |d: &RegressionDataset| {
                let pred: Vec<f64> = d.rows.iter().map(|r| fit.predict(&r.x)).collect();
                metrics(&d.y(), &pred, N_PREDICTORS)
            };
            Ok(FoldResult {
                fold: f,
                train: score(&train)?,
                test: score(&test)?,
                test_pairs: folds[f].clone(),
                fit,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let by = |key: fn(&FoldResult) -> f64, max: bool| {
        let mut best = 0;
        for (i, r) in results.iter().enumerate() {
            let (a, b) = (key(r), key(&results[best]));
            if (max && a > b) || (!max && a < b) {
                best = i;
            }
        }
        best
    };
    Ok(KFoldReport {
        mean_train: Metrics::mean(&results.iter().map(|r| r.train).collect::<Vec<_>>()),
        mean_test: Metrics::mean(&results.iter().map(|r| r.test).collect::<Vec<_>>()),
        best_r2: by(|r| r.test.r2, true),
        worst_r2: by(|r| r.test.r2, false),
        best_nrmse: by(|r| r.test.nrmse, false),
        worst_nrmse: by(|r| r.test.nrmse, true),
        folds: results,
    })
}

/// Percentage change per metric; `None` where the before value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub nrmse: Option<f64>,
    pub outliers_removed_pct: Option<f64>,
}

pub fn improvement_report(before: &Metrics, after: &Metrics, removed_fraction: f64) -> Improvement {
    let pct = |b: f64, a: f64| (b != 0.0).then(|| 100.0 * (a - b) / b);
    Improvement {
        r2: pct(before.r2, after.r2),
        adj_r2: pct(before.adj_r2, after.adj_r2),
        mae: pct(before.mae, after.mae),
        rmse: pct(before.rmse, after.rmse),
        nrmse: pct(before.nrmse, after.nrmse),
        outliers_removed_pct: removed_fraction
            .is_finite()
            .then_some(100.0 * removed_fraction),
    }
}

/// Before/after evaluation of one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryEval {
    pub category: Category,
    pub before: KFoldReport,
    pub after: KFoldReport,
    pub improvement: Improvement,
    pub base_points: usize,
    pub retained_points: usize,
    /// WLR weights of the base fit, split by whether the sample survived.
    pub weights_retained: Vec<HistogramBin>,
    pub weights_removed: Vec<HistogramBin>,
}

pub const WEIGHT_BIN: f64 = 5.0;
pub const WEIGHT_BINS: usize = 20;

/// Evaluates each category with at least `min_pairs` base pairs and `k`
/// retained pairs.
pub fn evaluate_categories(
    base: &[CandidatePair],
    retained: &[CandidatePair],
    settings: &EvalSettings,
) -> Result<Vec<CategoryEval>, EvalError> {
    let group = |ps: &[CandidatePair]| {
        let mut m: BTreeMap<Category, Vec<CandidatePair>> = BTreeMap::new();
        for p in ps {
            m.entry(p.category).or_default().push(p.clone());
        }
        m
    };
    let base_g = group(base);
    let ret_g = group(retained);
    let mut out = Vec::new();
    for (cat, b) in &base_g {
        let Some(r) = ret_g.get(cat) else { continue };
        if b.len() < settings.min_pairs.max(settings.k) || r.len() < settings.k {
            log::info!("skipping {cat}: {} base / {} retained pairs", b.len(), r.len());
            continue;
        }
        let db = build_dataset(b, settings.tau)?;
        let dr = build_dataset(r, settings.tau)?;
        let before = kfold_eval(&db, settings.k, settings.seed)?;
        let after = kfold_eval(&dr, settings.k, settings.seed)?;
        let base_points: usize = b.iter().map(|p| p.n_samples()).sum();
        let retained_points: usize = r.iter().map(|p| p.n_samples()).sum();
        let removed = (base_points - retained_points) as f64 / base_points as f64;

        let full = fit_ols(&db)?;
        let kept: std::collections::HashSet<(&str, i64)> =
            dr.rows.iter().map(|row| (row.pair.as_str(), row.frame)).collect();
        let weights = wlr_weights(&full.residuals);
        let (mut w_ret, mut w_rem) = (Vec::new(), Vec::new());
        for (row, w) in db.rows.iter().zip(weights) {
            if kept.contains(&(row.pair.as_str(), row.frame)) {
                w_ret.push(w);
            } else {
                w_rem.push(w);
            }
        }
        out.push(CategoryEval {
            category: *cat,
            improvement: improvement_report(&before.mean_train, &after.mean_train, removed),
            before,
            after,
            base_points,
            retained_points,
            weights_retained: histogram(&w_ret, WEIGHT_BIN, WEIGHT_BINS),
            weights_removed: histogram(&w_rem, WEIGHT_BIN, WEIGHT_BINS),
        });
    }
    Ok(out)
}

fn metric_cells(m: &Metrics) -> [String; 5] {
    [sig6(m.r2), sig6(m.adj_r2), sig6(m.mae), sig6(m.rmse), sig6(m.nrmse)]
}

/// Fold-mean metrics, one row per (category, before/after, train/test).
pub fn write_metrics_csv<W: Write>(evals: &[CategoryEval], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["sv_class", "lf_pair", "sample", "split", "r2", "adj_r2", "mae", "rmse", "nrmse"])?;
    for e in sorted_by_sv(evals) {
        for (sample, rep) in [("before", &e.before), ("after", &e.after)] {
            for (split, m) in [("train", &rep.mean_train), ("test", &rep.mean_test)] {
                let mut rec = vec![
                    e.category.sv.to_string(),
                    e.category.to_string(),
                    sample.to_string(),
                    split.to_string(),
                ];
                rec.extend(metric_cells(m));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "undefined".to_string())
}

/// Percentage changes of the fold-mean training metrics.
pub fn write_improvement_csv<W: Write>(evals: &[CategoryEval], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "sv_class",
        "lf_pair",
        "r2_pct",
        "adj_r2_pct",
        "mae_pct",
        "rmse_pct",
        "nrmse_pct",
        "outliers_removed_pct",
    ])?;
    for e in sorted_by_sv(evals) {
        let i = &e.improvement;
        w.write_record([
            e.category.sv.to_string(),
            e.category.to_string(),
            opt(i.r2),
            opt(i.adj_r2),
            opt(i.mae),
            opt(i.rmse),
            opt(i.nrmse),
            opt(i.outliers_removed_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Coefficients and p-values of the best and worst folds.
pub fn write_coefficients_csv<W: Write>(evals: &[CategoryEval], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["sv_class", "lf_pair", "sample", "selection", "fold", "r2", "adj_r2", "mae", "rmse", "nrmse"];
    let beta_cols: Vec<String> = COLUMNS.iter().map(|c| format!("beta_{c}")).collect();
    let p_cols: Vec<String> = COLUMNS.iter().map(|c| format!("p_{c}")).collect();
    header.extend(beta_cols.iter().map(String::as_str));
    header.extend(p_cols.iter().map(String::as_str));
    w.write_record(&header)?;
    for e in sorted_by_sv(evals) {
        for (sample, rep) in [("before", &e.before), ("after", &e.after)] {
            for (sel, fold) in [
                ("best_r2", rep.best_r2),
                ("worst_r2", rep.worst_r2),
                ("best_nrmse", rep.best_nrmse),
                ("worst_nrmse", rep.worst_nrmse),
            ] {
                let f = &rep.folds[fold];
                let mut rec = vec![
                    e.category.sv.to_string(),
                    e.category.to_string(),
                    sample.to_string(),
                    sel.to_string(),
                    fold.to_string(),
                ];
                rec.extend(metric_cells(&f.test));
                rec.extend(f.fit.beta.iter().map(|&b| sig6(b)));
                rec.extend(f.fit.p_values.iter().map(|&p| p_value(p)));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_weight_histogram_csv<W: Write>(evals: &[CategoryEval], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["lf_pair", "group", "bin_lo", "bin_hi", "count"])?;
    for e in sorted_by_sv(evals) {
        for (group, bins) in [("retained", &e.weights_retained), ("removed", &e.weights_removed)] {
            for b in bins {
                w.write_record([
                    e.category.to_string(),
                    group.to_string(),
                    sig6(b.lo),
                    b.hi.map(sig6).unwrap_or_else(|| "inf".to_string()),
                    b.count.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn sorted_by_sv(evals: &[CategoryEval]) -> Vec<&CategoryEval> {
    let mut v: Vec<&CategoryEval> = evals.iter().collect();
    v.sort_by_key(|e| (e.category.sv, e.category.lv));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal, Uniform};

    fn dataset(n: usize, seed: u64, f: impl Fn([f64; 3]) -> f64, noise: f64) -> RegressionDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(-3.0, 3.0);
        let g = Uniform::new(2.0, 30.0);
        let v = Uniform::new(0.0, 15.0);
        let e = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let rows = (0..n)
            .map(|i| {
                let x = [u.sample(&mut rng), g.sample(&mut rng), v.sample(&mut rng)];
                let eps = if noise > 0.0 { e.sample(&mut rng) } else { 0.0 };
                Row {
                    pair: format!("p{}", i / 10),
                    frame: (i % 10) as i64,
                    x,
                    y: f(x) + eps,
                }
            })
            .collect();
        RegressionDataset { tau: 0.5, rows }
    }

    fn truth(x: [f64; 3]) -> f64 {
        0.3 * x[0] + 0.1 * x[1] - 0.2 * x[2]
    }

    #[test]
    fn recovers_coefficients() {
        let d = dataset(5000, 11, truth, 0.1);
        let fit = fit_ols(&d).unwrap();
        for (b, t) in fit.beta.iter().zip([0.0, 0.3, 0.1, -0.2]) {
            assert!((b - t).abs() < 0.05, "{b} vs {t}");
        }
        assert!(fit.p_values[1] < 1e-4);
    }

    #[test]
    fn constant_response() {
        let d = dataset(50, 3, |_| 2.5, 0.0);
        let fit = fit_ols(&d).unwrap();
        assert!((fit.beta[0] - 2.5).abs() < 1e-12);
        assert!(fit.beta[1..].iter().all(|b| b.abs() < 1e-12));
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn collinear_column_rejected() {
        let mut d = dataset(40, 5, truth, 0.1);
        for r in d.rows.iter_mut() {
            r.x[2] = r.x[0];
        }
        assert_eq!(fit_ols(&d).unwrap_err(), EvalError::Collinear("sv_speed"));
    }

    #[test]
    fn mean_predictor_and_perfect_predictor() {
        let y = [1.0, 4.0, -2.0, 0.5, 3.0];
        let m = y.iter().sum::<f64>() / 5.0;
        let r = metrics(&y, &[m; 5], 3).unwrap();
        assert!(r.r2.abs() < 1e-12);
        assert!((r.nrmse - 1.0).abs() < 1e-12);
        let p = metrics(&y, &y, 3).unwrap();
        assert_eq!((p.r2, p.mae, p.rmse, p.nrmse), (1.0, 0.0, 0.0, 0.0));
        assert_eq!(metrics(&[2.0; 4], &[2.0; 4], 3).unwrap_err(), EvalError::ZeroSpread);
    }

    #[test]
    fn weights() {
        let w = wlr_weights(&[0.0, 0.5, -0.5]);
        assert!((w[0] - 1e6).abs() < 1e-6);
        assert!((w[1] - 1.999996).abs() < 1e-6);
        assert_eq!(w[1], w[2]);
        let h = histogram(&[0.1, 4.9, 5.0, 1e6], 5.0, 20);
        assert_eq!(h[0].count, 2);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[20].count, 1);
        assert_eq!(h[20].hi, None);
    }

    #[test]
    fn improvement_examples() {
        let m = |r2, rmse| Metrics {
            r2,
            adj_r2: r2,
            mae: 0.5,
            rmse,
            nrmse: 0.8,
        };
        let i = improvement_report(&m(0.258, 0.774), &m(0.341, 0.595), 0.5193);
        assert!((i.r2.unwrap() - 32.17).abs() < 0.01);
        assert!((i.rmse.unwrap() + 23.13).abs() < 0.01);
        assert!((i.outliers_removed_pct.unwrap() - 51.93).abs() < 1e-9);
        let same = improvement_report(&m(0.3, 0.7), &m(0.3, 0.7), 0.0);
        assert_eq!(same.r2, Some(0.0));
        assert_eq!(same.mae, Some(0.0));
        assert_eq!(improvement_report(&m(0.0, 0.7), &m(0.3, 0.7), 0.0).r2, None);
    }

    #[test]
    fn ten_pairs_five_folds() {
        let d = dataset(100, 2, truth, 0.0);
        let rep = kfold_eval(&d, 5, 9).unwrap();
        let mut seen: Vec<String> = rep.folds.iter().flat_map(|f| f.test_pairs.clone()).collect();
        seen.sort();
        let mut ids: Vec<String> = d.pair_ids().iter().map(|s| s.to_string()).collect();
        ids.sort();
        assert_eq!(seen, ids);
        assert!(rep.folds.iter().all(|f| (f.test.r2 - 1.0).abs() < 1e-9));
        assert_eq!(rep, kfold_eval(&d, 5, 9).unwrap());
        assert!(matches!(kfold_eval(&d, 11, 9), Err(EvalError::TooFewPairs { .. })));
    }

    #[test]
    fn p_value_formatting() {
        assert_eq!(p_value(1e-7), "0");
        assert_eq!(p_value(0.1225), "0.1225");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn residuals_orthogonal_to_design(seed in 0u64..1000, noise in 0.01f64..2.0) {
            let d = dataset(200, seed, truth, noise);
            let fit = fit_ols(&d).unwrap();
            let y = d.y();
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..4 {
                let col: Vec<f64> = d.rows.iter().map(|r| if j == 0 { 1.0 } else { r.x[j - 1] }).collect();
                let xnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(dot(&col, &fit.residuals).abs() <= 1e-8 * xnorm * ynorm);
            }
            let sigma = crate::stats::population_std(&y);
            prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-6 * 200.0 * sigma);
        }

        #[test]
        fn r2_two_ways(seed in 0u64..1000, noise in 0.05f64..2.0) {
            let d = dataset(150, seed, truth, noise);
            let fit = fit_ols(&d).unwrap();
            let y = d.y();
            let yh: Vec<f64> = d.rows.iter().map(|r| fit.predict(&r.x)).collect();
            let (my, mh) = (crate::stats::mean(&y), crate::stats::mean(&yh));
            let cov: f64 = y.iter().zip(&yh).map(|(a, b)| (a - my) * (b - mh)).sum();
            let vy: f64 = y.iter().map(|a| (a - my).powi(2)).sum();
            let vh: f64 = yh.iter().map(|b| (b - mh).powi(2)).sum();
            prop_assert!((fit.r2 - cov * cov / (vy * vh)).abs() < 1e-9);
            let m = metrics(&y, &yh, 3).unwrap();
            prop_assert!(m.adj_r2 <= m.r2 && m.rmse >= 0.0 && m.nrmse >= 0.0);
        }

        #[test]
        fn noise_column_never_lowers_r2(seed in 0u64..1000) {
            // Replace sv_speed by noise and compare with a fit that drops it.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let mut d = dataset(120, seed, |x| 0.3 * x[0] + 0.1 * x[1], 0.3);
            let mut reduced = d.clone();
            for r in reduced.rows.iter_mut() {
                r.x[2] = 0.0;
            }
            for r in d.rows.iter_mut() {
                r.x[2] = Uniform::new(-1.0, 1.0).sample(&mut rng);
            }
            // The reduced model has a zero column; fit it as two predictors via metrics of an OLS on x1, x2.
            let two = fit_two(&reduced);
            let full = fit_ols(&d).unwrap();
            prop_assert!(full.r2 >= two - 1e-12);
        }

        #[test]
        fn folds_partition_pairs(n_pairs in 5usize..40, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n_pairs >= k);
            let ids: Vec<String> = (0..n_pairs).map(|i| format!("p{i}")).collect();
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let folds = fold_assignment(&refs, k, seed);
            let mut all: Vec<String> = folds.concat();
            all.sort();
            let mut want = ids.clone();
            want.sort();
            prop_assert_eq!(all, want);
        }
    }

    /// R² of OLS on intercept, rel_vel and gap only (normal equations, 3x3).
    fn fit_two(d: &RegressionDataset) -> f64 {
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for r in &d.rows {
            let x = [1.0, r.x[0], r.x[1]];
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] += x[i] * x[j];
                }
                b[i] += x[i] * r.y;
            }
        }
        // Gaussian elimination.
        for c in 0..3 {
            for r in c + 1..3 {
                let f = a[r][c] / a[c][c];
                for k in c..3 {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut beta = [0.0; 3];
        for i in (0..3).rev() {
            let s: f64 = (i + 1..3).map(|k| a[i][k] * beta[k]).sum();
            beta[i] = (b[i] - s) / a[i][i];
        }
        let y = d.y();
        let my = crate::stats::mean(&y);
        let sse: f64 = d.rows.iter().map(|r| (r.y - beta[0] - beta[1] * r.x[0] - beta[2] * r.x[1]).powi(2)).sum();
        let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
        1.0 - sse / sst
    }
}
