//! Prints the desirable-gap table for every vehicle class.

use lf_forge::fdgap::{gap_threshold_table, standard_speeds, FdParams};
use lf_forge::trajmodel::VehicleClass;

fn main() {
    let params: Vec<FdParams> = VehicleClass::ALL.iter().map(|&c| FdParams::default_for(c)).collect();
    for p in &params {
        println!(
            "{:>4}: w = {:.3} km/h, k_j = {:.2} veh/km, s = {:.3} + {:.4} v",
            p.class.as_str(),
            p.w,
            p.k_j,
            p.intercept(),
            p.slope()
        );
    }
    let table = gap_threshold_table(&params, &standard_speeds()).expect("valid params");
    table.write_csv(std::io::stdout()).expect("stdout");
}
