//! Ingests a CSV with its own column names, a gap in the record, and no
//! kinematics, then prints what came out.

use lf_forge::trajmodel::{ingest, ColumnMap, IngestConfig};

const RAW: &str = "\
veh,type,time,x,y
7,Car,0.0,0.0,3.5
7,Car,0.5,6.0,3.5
7,Car,1.0,12.1,3.6
7,Car,2.0,24.0,3.6
7,Car,2.5,30.2,3.5
9,2W,0.0,20.0,2.0
9,2W,0.5,27.0,2.0
9,2W,oops,34.0,2.1
";

fn main() {
    let cfg = IngestConfig {
        columns: ColumnMap {
            id: "veh".into(),
            class: "type".into(),
            t: "time".into(),
            x_long: "x".into(),
            y_lat: "y".into(),
            v_long: None,
            v_lat: None,
            a_long: None,
            a_lat: None,
            length: None,
            width: None,
        },
        class_aliases: [("2W".to_string(), lf_forge::trajmodel::VehicleClass::Tw)].into(),
        ..IngestConfig::default()
    };
    let out = ingest(RAW.as_bytes(), &cfg).expect("header matches");
    for v in &out.vehicles {
        println!("vehicle {} ({}, {} x {} m)", v.id, v.class, v.length, v.width);
        for p in &v.points {
            println!("  t={:4.1} x={:6.2} v={:6.2} a={:6.2}", p.t, p.x_long, p.v_long, p.a_long);
        }
    }
    for e in &out.record_errors {
        println!("row {}: {}", e.row, e.message);
    }
    for e in &out.vehicle_errors {
        println!("vehicle {}: {}", e.vehicle, e.message);
    }
}
