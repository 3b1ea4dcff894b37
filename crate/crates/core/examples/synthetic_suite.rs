//! Writes a labeled synthetic suite to a directory (default `synthetic/`)
//! after checking each pair against its label.

use std::fs::File;
use std::path::PathBuf;

use lf_forge::fdgap::FdParams;
use lf_forge::synthgen::{gen_pair, gen_suite, pair_seed, validate_pair, write_labels, ScenarioLabel, SynthConfig};
use lf_forge::trajmodel::{write_trajectories, VehicleClass};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    std::fs::create_dir_all(&dir)?;
    let fd = FdParams::default_for(VehicleClass::Car);
    let cfg = SynthConfig::default();

    for (i, &label) in ScenarioLabel::ALL.iter().enumerate() {
        let pair = gen_pair(label, &fd, pair_seed(cfg.seed, i), cfg.dt)?;
        let verdict = validate_pair(&pair, &fd).err().unwrap_or_else(|| "ok".into());
        println!("{label:<14} {} samples: {verdict}", pair.sv.points.len());
    }

    let suite = gen_suite(&cfg, &fd)?;
    write_trajectories(&suite.vehicles, File::create(dir.join("trajectories.csv"))?)?;
    write_labels(&suite.labels, File::create(dir.join("labels.json"))?)?;
    println!("{} pairs written to {}", suite.labels.pairs.len(), dir.display());
    Ok(())
}
