#![allow(dead_code)]

use std::path::PathBuf;

use privcov::data::{load_csv, normalize, Dataset};
use serde::Deserialize;

pub const FEATURES: [&str; 2] = ["age", "education-num"];
pub const LABEL: &str = "income";
pub const POSITIVE: &str = ">50K";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// The 100-row, 2-feature Adult subset, normalized.
pub fn adult() -> Dataset {
    let features: Vec<String> = FEATURES.iter().map(|s| s.to_string()).collect();
    let raw = load_csv(fixture("adult_head100.csv"), &features, LABEL, POSITIVE).unwrap();
    normalize(&raw).unwrap()
}

#[derive(Debug, Deserialize)]
pub struct Golden {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub max_rel_deviation: f64,
    pub argmax: usize,
}

pub fn golden() -> Golden {
    let text = std::fs::read_to_string(fixture("adult_head100_golden.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn data_flags() -> Vec<String> {
    vec![
        "--data".into(),
        fixture("adult_head100.csv").to_string_lossy().into_owned(),
        "--features".into(),
        FEATURES.join(","),
        "--label".into(),
        LABEL.into(),
        "--positive-label".into(),
        POSITIVE.into(),
    ]
}
