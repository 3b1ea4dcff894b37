//! Before/after regression evaluation on the synthetic suite.

use lf_forge::evalmod::{evaluate_categories, write_improvement_csv, write_metrics_csv, EvalSettings};
use lf_forge::fdgap::FdTable;
use lf_forge::filters::{run_pipeline, PipelineInput, Preset, Thresholds};
use lf_forge::pairing::{extract_pairs, PairingCriteria};
use lf_forge::synthgen::{gen_suite, SynthConfig};
use lf_forge::trajmodel::VehicleClass;
use lf_forge::wavecorr::WaveletConfig;

fn main() {
    let fd = FdTable::default();
    let cfg = SynthConfig::default();
    let suite = gen_suite(&cfg, fd.get(VehicleClass::Car).unwrap()).unwrap();
    let pairs = extract_pairs(&suite.vehicles, &PairingCriteria::default(), cfg.dt);
    let input = PipelineInput {
        thresholds: &Thresholds::default(),
        fd: &fd,
        wavelet: &WaveletConfig::default(),
        min_duration: 5.0,
    };
    let res = run_pipeline(&pairs, &Preset::Approach4.stages(), &input).unwrap();
    let evals = evaluate_categories(&pairs, &res.retained, &EvalSettings::default()).unwrap();
    for e in &evals {
        let f = &e.after.folds[e.after.best_r2].fit;
        println!(
            "{}: a = {:.4} rel_vel + {:.4} gap + {:.4} speed + {:.4}",
            e.category, f.beta[1], f.beta[2], f.beta[3], f.beta[0]
        );
    }
    write_metrics_csv(&evals, std::io::stdout()).unwrap();
    write_improvement_csv(&evals, std::io::stdout()).unwrap();
}
