//! Extracts candidate pairs from a small synthetic scene and summarizes them.

use lf_forge::fdgap::FdParams;
use lf_forge::pairing::{extract_pairs, summarize_pairs, write_summary_csv, PairingCriteria};
use lf_forge::synthgen::{gen_suite, ScenarioLabel, SynthConfig};
use lf_forge::trajmodel::VehicleClass;

fn main() {
    let cfg = SynthConfig {
        counts: ScenarioLabel::ALL.iter().map(|&l| (l, 3)).collect(),
        ..SynthConfig::default()
    };
    let suite = gen_suite(&cfg, &FdParams::default_for(VehicleClass::Car)).expect("valid config");
    let pairs = extract_pairs(&suite.vehicles, &PairingCriteria::default(), cfg.dt);
    for p in &pairs {
        println!("{:>12}  {}  {:5.1} s  {} samples", p.id, p.category, p.duration(), p.n_samples());
    }
    write_summary_csv(&summarize_pairs(&pairs, 20), std::io::stdout()).expect("stdout");
}
