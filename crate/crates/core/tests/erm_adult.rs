mod common;

use privcov::data::Rows;
use privcov::erm::{objective, train, TrainOptions};

/// Plain fixed-step gradient descent on the same objective, written out
/// longhand. Step `1/L` with `L = 1/4 + Λ` bounds the curvature since every
/// row lies in the unit ball.
fn gradient_descent(data: &impl Rows, lambda: f64, tol: f64) -> Vec<f64> {
    let d = data.dim();
    let m = data.len() as f64;
    let step = 1.0 / (0.25 + lambda);
    let mut theta = vec![0.0; d];
    for _ in 0..1_000_000 {
        let mut g: Vec<f64> = theta.iter().map(|t| lambda * t).collect();
        for (x, y) in data.iter() {
            let z: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let s = 1.0 / (1.0 + (y * z).exp());
            for j in 0..d {
                g[j] -= y * x[j] * s / m;
            }
        }
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol {
            return theta;
        }
        for j in 0..d {
            theta[j] -= step * g[j];
        }
    }
    panic!("gradient descent did not converge");
}

#[test]
fn matches_golden_solution() {
    let data = common::adult();
    let g = common::golden();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    for (a, b) in base.model.as_slice().iter().zip(&g.theta) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
    assert!((base.objective - g.objective).abs() <= 1e-12);
    assert!(base.grad_norm <= 1e-10);
    assert_eq!(base.n, 100);
}

#[test]
fn agrees_with_gradient_descent() {
    let data = common::adult();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let gd = gradient_descent(&data, 1.0, 1e-10);
    for (a, b) in base.model.as_slice().iter().zip(&gd) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn objective_is_recomputable_and_minimal() {
    let data = common::adult();
    let base = train(&data, 1.0, TrainOptions::default()).unwrap();
    let again = objective(&base.model, &data, 1.0).unwrap();
    assert!((again - base.objective).abs() <= 1e-12);
}

#[test]
fn training_is_bit_reproducible() {
    let data = common::adult();
    let a = train(&data, 1.0, TrainOptions::default()).unwrap();
    let b = train(&common::adult(), 1.0, TrainOptions::default()).unwrap();
    assert_eq!(a, b);
}
