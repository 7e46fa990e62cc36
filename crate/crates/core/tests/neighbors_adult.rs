mod common;

use std::time::Instant;

use privcov::data::{neighbor, Dataset, Rows};
use privcov::erm::{objective, train, TrainOptions};
use privcov::neighbors::{build_neighbor_set, exact_neighbor, validate_neighbor_set};

fn max_radius(data: &Dataset) -> f64 {
    let base = train(data, 1.0, TrainOptions::default()).unwrap();
    let set = build_neighbor_set(&base, data).unwrap();
    set.bounds.iter().map(|b| b.radius).fold(0.0, f64::max)
}

#[test]
fn validation_against_retraining() {
    let data = common::adult();
    let g = common::golden();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let set = build_neighbor_set(&base, &data).unwrap();
    let report = validate_neighbor_set(&set, &data, TrainOptions::default()).unwrap();
    assert_eq!(report.rows.len(), 100);
    assert!(report.max < 0.05, "max relative deviation {}", report.max);
    assert!((report.max - g.max_rel_deviation).abs() <= 1e-8, "{} vs golden {}", report.max, g.max_rel_deviation);
    assert_eq!(report.argmax, g.argmax);
}

#[test]
fn sphere_identities_on_every_row() {
    let data = common::adult();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let set = build_neighbor_set(&base, &data).unwrap();
    let a_norm = base.model.norm();
    let n = data.n() as f64;
    for (b, wc) in set.bounds.iter().zip(&set.wc_points) {
        let on_sphere = b.center.distance(&base.model);
        assert!((on_sphere - b.radius).abs() <= 1e-10 * b.radius, "row {}", b.index);
        assert!((wc.distance(&base.model) - 2.0 * b.radius).abs() <= 1e-10 * b.radius);
        assert!(b.radius <= (a_norm + 1.0) / (2.0 * (n - 1.0)) + 1e-15);
    }
}

#[test]
fn duplicating_rows_halves_the_radius() {
    let small = common::adult();
    let rows: Vec<Vec<f64>> = (0..2).flat_map(|_| (0..small.n()).map(|k| small.row(k).to_vec())).collect();
    let labels: Vec<f64> = (0..2).flat_map(|_| small.labels().to_vec()).collect();
    let doubled = Dataset::new(rows, labels).unwrap();
    let ratio = max_radius(&doubled) / max_radius(&small);
    assert!(ratio > 0.4 && ratio < 0.6, "ratio {ratio}");
}

#[test]
fn exact_neighbors_minimize_their_own_objective() {
    let data = common::adult();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    for i in 0..data.n() {
        let exact = exact_neighbor(&data, i, 1.0, TrainOptions::default()).unwrap();
        let view = neighbor(&data, i).unwrap();
        if exact.distance(&base.model) > 1e-9 {
            assert!(objective(&exact, &view, 1.0).unwrap() < objective(&base.model, &view, 1.0).unwrap());
        }
    }
}

#[test]
fn identical_rows_have_no_deviation() {
    let data = Dataset::new(vec![vec![0.6, -0.8]; 10], vec![1.0; 10]).unwrap();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let set = build_neighbor_set(&base, &data).unwrap();
    let report = validate_neighbor_set(&set, &data, TrainOptions::default()).unwrap();
    assert!(report.rows.iter().all(|r| r.rel_deviation == 0.0));
}

#[test]
fn bounds_are_cheaper_than_retraining() {
    let data = common::adult();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let t0 = Instant::now();
    let set = build_neighbor_set(&base, &data).unwrap();
    let fast = t0.elapsed();
    let t1 = Instant::now();
    for i in 0..data.n() {
        exact_neighbor(&data, i, 1.0, TrainOptions::default()).unwrap();
    }
    let slow = t1.elapsed();
    assert_eq!(set.len(), 100);
    assert!(fast < slow, "bounds {fast:?} vs retraining {slow:?}");
}
