//! Drives the CLI through synth, filter, dossier and a manual review, then
//! re-evaluates. Artifacts go to a temporary directory.

use lf_forge::app::run_cli;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let out = dir.path();
    let cfg = out.join("config.json");
    std::fs::write(&cfg, r#"{"input": "synthetic_trajectories.csv", "out_dir": "."}"#)?;
    let cli = |args: &[&str]| {
        let mut argv = vec!["lf-forge", "--config", cfg.to_str().unwrap()];
        argv.extend_from_slice(args);
        assert_eq!(run_cli(argv), 0, "{args:?}");
    };
    cli(&["synth"]);
    cli(&["all"]);

    let retained = std::fs::read_to_string(out.join("retained_pairs.csv"))?;
    let rows: Vec<Vec<&str>> = retained.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // Columns: pair_id, lv_id, sv_id, category, t0, ...
    let p = rows[0][0];
    let (q, q_t0) = (rows[1][0], rows[1][4].parse::<f64>()?);
    let decisions = serde_json::json!([
        {"pair_id": p, "action": "remove", "note": "looks like a lane change"},
        {"pair_id": q, "action": "trim", "trim": [{"t0": q_t0, "t1": q_t0 + 3.0}]}
    ]);
    let path = out.join("decisions.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&decisions)?)?;
    cli(&["review", "apply", "--decisions", path.to_str().unwrap()]);
    cli(&["eval"]);
    cli(&["dossier"]);
    println!("{}", std::fs::read_to_string(out.join("review_ledger.json"))?);
    println!("{}", std::fs::read_to_string(out.join("metrics.csv"))?);
    Ok(())
}
