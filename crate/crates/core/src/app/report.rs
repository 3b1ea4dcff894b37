//! Markdown summary of the artifacts present in the output directory.

use std::fmt::Write as _;

use super::artifacts::*;
use super::config::RunConfig;
use super::AppError;

/// Renders a CSV as a Markdown table.
pub fn csv_to_markdown(bytes: &[u8]) -> Result<String, csv::Error> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for rec in r.records() {
        let rec = rec?;
        let cells: Vec<&str> = rec.iter().collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    Ok(out)
}

const SECTIONS: [(&str, &str); 7] = [
    (PAIR_SUMMARY, "Candidate pairs by category"),
    (STAGE_SUMMARY, "Pairs and points through the filter stages"),
    (STAGE_METRICS, "Model fit after each stage (fold means)"),
    (METRICS, "Model fit before and after filtering"),
    (IMPROVEMENT, "Relative change after filtering (%)"),
    (COEFFICIENTS, "Coefficients of the best and worst folds"),
    (GAP_TABLE, "Desirable gap by speed and class (m)"),
];

pub fn render_report(ws: &mut Workspace, cfg: &RunConfig) -> Result<String, AppError> {
    let mut out = String::new();
    let _ = writeln!(out, "# Leader-follower run report\n");
    let _ = writeln!(out, "Config digest: `{}`\n", cfg.digest());
    // The pair inventory is the minimum a report makes sense for.
    if !ws.exists(PAIR_SUMMARY) {
        return Err(AppError::MissingInput(ws.path(PAIR_SUMMARY)));
    }
    for (name, title) in SECTIONS {
        if !ws.exists(name) {
            continue;
        }
        let bytes = ws.read(name)?;
        let table = csv_to_markdown(&bytes).map_err(|e| AppError::Runtime(format!("{name}: {e}")))?;
        let _ = writeln!(out, "## {title}\n\nSource: [{name}]({name})\n\n{table}");
    }
    let mut extra = vec![];
    for name in [
        FILTER_LEDGER,
        CATEGORY_STATS,
        RETAINED,
        WAVELET,
        WEIGHT_HISTOGRAM,
        REVIEW_LEDGER,
        INGEST_REPORT,
    ] {
        if ws.exists(name) {
            extra.push(format!("- [{name}]({name})"));
        }
    }
    if ws.exists(&format!("{DOSSIERS}/index.json")) {
        extra.push(format!("- [{DOSSIERS}/index.json]({DOSSIERS}/index.json)"));
    }
    if !extra.is_empty() {
        let _ = writeln!(out, "## Other artifacts\n\n{}\n", extra.join("\n"));
    }
    Ok(out)
}
