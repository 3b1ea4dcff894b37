//! Runs a filter preset over the labeled synthetic suite and tallies the
//! verdict per label.

use std::collections::BTreeMap;

use lf_forge::fdgap::FdTable;
use lf_forge::filters::{run_pipeline, PipelineInput, Preset, Thresholds, Verdict};
use lf_forge::pairing::{extract_pairs, PairingCriteria};
use lf_forge::synthgen::{gen_suite, SynthConfig};
use lf_forge::trajmodel::VehicleClass;
use lf_forge::wavecorr::WaveletConfig;

fn main() {
    let preset: Preset = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "approach4".into())
        .parse()
        .expect("approach1..approach4");
    let fd = FdTable::default();
    let cfg = SynthConfig::default();
    let suite = gen_suite(&cfg, fd.get(VehicleClass::Car).unwrap()).unwrap();
    let criteria = PairingCriteria::default();
    let pairs = extract_pairs(&suite.vehicles, &criteria, cfg.dt);
    let input = PipelineInput {
        thresholds: &Thresholds::default(),
        fd: &fd,
        wavelet: &WaveletConfig::default(),
        min_duration: criteria.min_duration,
    };
    let res = run_pipeline(&pairs, &preset.stages(), &input).unwrap();

    let label_of: BTreeMap<String, _> = suite
        .labels
        .pairs
        .iter()
        .map(|t| (t.sv.to_string(), t.label))
        .collect();
    let mut tally: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (p, l) in pairs.iter().zip(&res.outcome.pairs) {
        let verdict = match &l.verdict {
            Verdict::Retained { .. } => "retained".to_string(),
            Verdict::Removed { stage, reason } => format!("removed@{stage} {reason:?}"),
        };
        *tally.entry((label_of[p.sv.as_str()].to_string(), verdict)).or_default() += 1;
    }
    for ((label, verdict), n) in tally {
        println!("{label:<14} {verdict:<32} {n}");
    }
    for s in res.outcome.summaries.iter().filter(|s| s.category == "ALL") {
        println!("stage {} {:<8} pairs {} -> {}", s.stage, s.step, s.pairs_in, s.pairs_out);
    }
}
