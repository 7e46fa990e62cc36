mod common;

use std::path::Path;
use std::process::{Command, Stdio};

use privcov::erm::{train, ModelPoint, TrainOptions};
use privcov::mechanism::MechanismParams;
use privcov::neighbors::build_neighbor_set;

fn privcov(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_privcov"))
        .args(args)
        .args(common::data_flags())
        .arg("--out")
        .arg(out)
        .stderr(Stdio::null())
        .status()
        .unwrap();
    status.code().unwrap()
}

fn rerun(dir: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_privcov"))
        .arg("--config")
        .arg(dir.join("config.json"))
        .arg("--out")
        .arg(out)
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_writes_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("train");
    assert_eq!(privcov(&["train"], &out), 0);
    let model = json(&out.join("model.json"));
    let golden = common::golden();
    for (v, g) in model["theta"].as_array().unwrap().iter().zip(&golden.theta) {
        assert!((v.as_f64().unwrap() - g).abs() < 1e-10);
    }
    assert_eq!(model["n"], 100);
    assert_eq!(model["d"], 2);
    assert_eq!(model["lambda"], 1.0);
}

#[test]
fn missing_data_file_leaves_no_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("none");
    let code = Command::new(env!("CARGO_BIN_EXE_privcov"))
        .args(["train", "--data", "does-not-exist.csv", "--features", "a", "--label", "b", "--positive-label", "c"])
        .arg("--out")
        .arg(&out)
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap();
    assert_eq!(code, 3);
    assert!(!out.exists());
}

#[test]
fn unknown_column_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let code = Command::new(env!("CARGO_BIN_EXE_privcov"))
        .args(["train", "--features", "nope", "--label", "income", "--positive-label", ">50K", "--data"])
        .arg(common::fixture("adult_head100.csv"))
        .arg("--out")
        .arg(tmp.path())
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap();
    assert_eq!(code, 2);
}

#[test]
fn validate_respects_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    assert_eq!(privcov(&["validate"], &ok), 0);
    let summary = json(&ok.join("summary.json"));
    assert!(summary["max"].as_f64().unwrap() < 0.05);
    assert_eq!(csv_rows(&ok.join("validation.csv")).len(), 100);

    let strict = tmp.path().join("strict");
    assert_eq!(privcov(&["validate", "--bound", "0.01"], &strict), 5);
    assert!(strict.join("validation.csv").exists());
}

#[test]
fn neighbors_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("n");
    assert_eq!(privcov(&["neighbors", "--validate"], &out), 0);
    let mut rdr = csv::Reader::from_path(out.join("neighbors.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["i", "R_0", "R_1", "r", "A_wc_0", "A_wc_1", "A_exact_0", "A_exact_1", "rel_deviation"]);
    assert_eq!(rdr.records().count(), 100);
}

#[test]
fn conflicting_epsilon_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let code = privcov(&["sweep", "--epsilon", "1", "--eps-min", "0.1", "--eps-max", "10", "--seed", "1"], tmp.path());
    assert_eq!(code, 2);
}

#[test]
fn randomized_commands_require_seed() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(privcov(&["sample", "--epsilon", "1"], &tmp.path().join("a")), 2);
    assert_eq!(privcov(&["profile", "--epsilon", "1", "--model-point", "sample"], &tmp.path().join("b")), 2);
}

#[test]
fn sample_tags_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    assert_eq!(
        privcov(&["sample", "--epsilon", "0.5", "--samples", "7", "--neighbors", "3,9", "--seed", "5"], &out),
        0
    );
    let rows = csv_rows(&out.join("samples.csv"));
    assert_eq!(rows.len(), 21);
    assert_eq!(rows.iter().filter(|r| &r[0] == "base").count(), 7);
    assert_eq!(rows.iter().filter(|r| &r[1] == "9").count(), 7);
}

#[test]
fn scatter_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sc");
    let args = ["scatter", "--eps-min", "0.1", "--eps-max", "1", "--points-per-decade", "1", "--seed", "2", "--svg"];
    assert_eq!(privcov(&args, &out), 0);
    let rows = csv_rows(&out.join("scatter.csv"));
    assert_eq!(rows.len(), 2 * 51 * 20);
    assert!(out.join("scatter_000.svg").exists() && out.join("scatter_001.svg").exists());
}

/// At very large ε every distinct center's cloud stays within a radius far
/// smaller than the gap to the nearest other center.
#[test]
fn clusters_separate_at_large_epsilon() {
    let data = common::adult();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let set = build_neighbor_set(&base, &data).unwrap();
    let mut centers: Vec<&ModelPoint> = std::iter::once(&base.model).chain(set.wc_points.iter().take(50)).collect();
    centers.dedup_by(|a, b| a == b);
    let mut min_gap = f64::INFINITY;
    for (a, p) in centers.iter().enumerate() {
        for q in &centers[a + 1..] {
            let g = p.distance(q);
            if g > 0.0 {
                min_gap = min_gap.min(g);
            }
        }
    }
    let params = MechanismParams::new(1e9, 1.0, data.n(), data.d()).unwrap();
    // 99th percentile of Gamma(2, β) is below 6.7/β
    let p99 = 6.7 / params.beta;
    assert!(2.0 * p99 < min_gap, "p99 {p99}, gap {min_gap}");
}

#[test]
fn profile_at_center_is_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    assert_eq!(privcov(&["profile", "--epsilon", "1", "--heatmap-resolution", "20"], &out), 0);
    let rows = csv_rows(&out.join("profile.csv"));
    assert_eq!(rows.len(), 100);
    let abs: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(abs.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(csv_rows(&out.join("heatmap.csv")).len(), 400);
    assert_eq!(csv_rows(&out.join("heatmap_stars.csv")).len(), 100);
}

#[test]
fn sweep_reports_epsilon_range() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sw");
    let args = [
        "sweep",
        "--eps-min",
        "0.001",
        "--eps-max",
        "10000",
        "--points-per-decade",
        "4",
        "--samples",
        "300",
        "--seed",
        "1",
        "--ranks",
        "0,99",
        "--svg",
    ];
    assert_eq!(privcov(&args, &out), 0);
    let range = json(&out.join("range.json"));
    let (lo, hi) = (range["eps_low"].as_f64().unwrap(), range["eps_high"].as_f64().unwrap());
    assert!(lo < hi, "{range}");
    assert_eq!(csv_rows(&out.join("profiles.csv")).len(), 29 * 100);
    assert_eq!(csv_rows(&out.join("neighbors.csv")).len(), 29 * 100);
    assert_eq!(csv_rows(&out.join("onsets.csv")).len(), 100);
    assert_eq!(csv_rows(&out.join("ranks.csv")).len(), 2 * 29);
    assert!(out.join("ranks.svg").exists());
}

#[test]
fn reruns_from_config_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["train"],
        &["neighbors"],
        &["profile", "--epsilon", "2", "--model-point", "sample", "--seed", "9"],
        &[
            "sweep",
            "--eps-min",
            "0.01",
            "--eps-max",
            "100",
            "--points-per-decade",
            "2",
            "--samples",
            "50",
            "--seed",
            "3",
        ],
    ];
    for (k, args) in runs.iter().enumerate() {
        let first = tmp.path().join(format!("first{k}"));
        let second = tmp.path().join(format!("second{k}"));
        assert_eq!(privcov(args, &first), 0);
        assert_eq!(rerun(&first, &second), 0);
        for entry in std::fs::read_dir(&first).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(first.join(&name)).unwrap();
            let b = std::fs::read(second.join(&name)).unwrap();
            assert!(a == b, "{args:?}: {name:?} differs");
        }
    }
}
