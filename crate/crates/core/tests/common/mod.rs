#![allow(dead_code)]

use std::path::PathBuf;

use curekit::io::{ingest_csv, Columns};
use curekit::SurvivalSample;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

/// bmt with disease-free survival (t2, d3) and one covariate column.
pub fn bmt(x: &str) -> SurvivalSample {
    let categorical = matches!(x, "z3" | "z10");
    let cols = Columns {
        x: x.into(),
        t: "t2".into(),
        d: "d3".into(),
        categorical,
    };
    ingest_csv(&data_path("bmt.csv"), &cols).unwrap().sample
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
