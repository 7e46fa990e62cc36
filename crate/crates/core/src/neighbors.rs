//! Neighbor model points without retraining.
//!
//! For a dataset edited by adding `n_A` and removing `n_S` rows, the edited
//! minimizer lies in a sphere `|A(y) - R| <= r` built from the base solution
//! and the loss gradients of the edited rows:
//!
//! ```text
//! R  = (n0 + n1)/(2 n1) A(x) - (n_A + n_S)/(2 Λ n1) Δs
//! r  = |(n_A - n_S)/(2 n1) A(x) + (n_A + n_S)/(2 Λ n1) Δs|
//! Δs = (Σ_added ∇l[A(x)] - Σ_removed ∇l[A(x)]) / (n_A + n_S)
//! ```
//!
//! Only single-row removal is exposed. The base point always lies on this
//! sphere, and the point diametrically opposite it, `2R - A(x)`, is the
//! worst-case neighbor model used everywhere downstream in place of `A(y_i)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{neighbor, Dataset, Rows};
use crate::erm::{loss_gradient_row, train, BaseSolution, ModelPoint, TrainOptions};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereBound {
    pub index: usize,
    pub center: ModelPoint,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborSet {
    pub base: BaseSolution,
    pub bounds: Vec<SphereBound>,
    /// `wc_points[i] = 2 * bounds[i].center - base.model`.
    pub wc_points: Vec<ModelPoint>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// `|A_wc(y_i) - A(x)|` for every row.
    pub fn distances(&self) -> Vec<f64> {
        self.wc_points.iter().map(|p| p.distance(&self.base.model)).collect()
    }
}

/// Row counts of a dataset edit.
#[derive(Debug, Clone, Copy)]
struct EditCounts {
    original: usize,
    modified: usize,
    added: usize,
    removed: usize,
}

/// Center and radius of the general sphere bound.
fn general_sphere(base: &DVector<f64>, lambda: f64, c: EditCounts, delta_s: &DVector<f64>) -> (DVector<f64>, f64) {
    let n0 = c.original as f64;
    let n1 = c.modified as f64;
    let edits = (c.added + c.removed) as f64;
    let net = c.added as f64 - c.removed as f64;
    let center = base * ((n0 + n1) / (2.0 * n1)) - delta_s * (edits / (2.0 * lambda * n1));
    let radius = (base * (net / (2.0 * n1)) + delta_s * (edits / (2.0 * lambda * n1))).norm();
    (center, radius)
}

fn check_base(base: &BaseSolution, data: &Dataset) -> Result<()> {
    check_dim(data.d(), base.model.dim())?;
    if base.n != data.n() {
        return Err(Error::InvalidParameter(format!(
            "base solution was trained on {} rows but the dataset has {}",
            base.n,
            data.n()
        )));
    }
    if data.n() < 2 {
        return Err(Error::Data(format!("need at least 2 rows (found {})", data.n())));
    }
    Ok(())
}

/// Sphere bound for the neighbor with row `i` removed.
pub fn sphere_bound(base: &BaseSolution, data: &Dataset, i: usize) -> Result<SphereBound> {
    check_base(base, data)?;
    if i >= data.n() {
        return Err(Error::Index { index: i, len: data.n() });
    }
    let n = data.n();
    let grad = loss_gradient_row(&base.model, data.row(i), data.label(i))?;
    // One removed row, nothing added: Δs = -∇l_R[A(x)].
    let delta_s = -grad;
    let counts = EditCounts { original: n, modified: n - 1, added: 0, removed: 1 };
    let (center, radius) = general_sphere(base.model.vector(), base.lambda, counts, &delta_s);
    Ok(SphereBound { index: i, center: center.into(), radius })
}

/// `2R - A(x)`.
pub fn worst_case_point(bound: &SphereBound, base: &BaseSolution) -> ModelPoint {
    (bound.center.vector() * 2.0 - base.model.vector()).into()
}

/// Retrain from scratch on the dataset with row `i` removed.
pub fn exact_neighbor(data: &Dataset, i: usize, lambda: f64, opts: TrainOptions) -> Result<ModelPoint> {
    let view = neighbor(data, i)?;
    Ok(train(&view, lambda, opts)?.model)
}

/// All `n` bounds and worst-case points, `O(n d)`.
pub fn build_neighbor_set(base: &BaseSolution, data: &Dataset) -> Result<NeighborSet> {
    check_base(base, data)?;
    let bounds: Vec<SphereBound> =
        (0..data.n()).into_par_iter().map(|i| sphere_bound(base, data, i)).collect::<Result<_>>()?;
    let wc_points = bounds.iter().map(|b| worst_case_point(b, base)).collect();
    Ok(NeighborSet { base: base.clone(), bounds, wc_points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub index: usize,
    pub exact: ModelPoint,
    /// `|A_wc(y_i) - A(y_i)| / |A(y_i) - A(x)|`.
    pub rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub max: f64,
    pub mean: f64,
    pub argmax: usize,
}

/// Compare every worst-case point with a full retraining.
///
/// When both `|A(y_i) - A(x)|` and `|A_wc(y_i) - A(y_i)|` are within ten
/// times the oracle's parameter resolution (`tol / Λ`), the neighbor is
/// indistinguishable from the base and the deviation is reported as 0.
pub fn validate_neighbor_set(set: &NeighborSet, data: &Dataset, opts: TrainOptions) -> Result<ValidationReport> {
    check_base(&set.base, data)?;
    let lambda = set.base.lambda;
    let resolution = 10.0 * opts.tol / lambda;
    let rows: Vec<ValidationRow> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let exact = exact_neighbor(data, i, lambda, opts)?;
            let shift = exact.distance(&set.base.model);
            let miss = set.wc_points[i].distance(&exact);
            let rel_deviation = if shift <= resolution && miss <= resolution { 0.0 } else { miss / shift };
            Ok(ValidationRow { index: i, exact, rel_deviation })
        })
        .collect::<Result<_>>()?;
    let (argmax, max) = rows.iter().map(|r| r.rel_deviation).enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
        if v > acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    let devs: Vec<f64> = rows.iter().map(|r| r.rel_deviation).collect();
    let mean = crate::stats::pairwise_sum(&devs) / devs.len() as f64;
    Ok(ValidationReport { rows, max, mean, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm::DEFAULT_TOL;

    fn toy() -> (Dataset, BaseSolution) {
        let ds = Dataset::new(
            vec![
                vec![0.9, 0.1],
                vec![-0.3, 0.8],
                vec![0.2, -0.6],
                vec![-0.7, -0.4],
                vec![0.5, 0.5],
                vec![0.0, 0.0],
                vec![0.1, -0.9],
            ],
            vec![1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0],
        )
        .unwrap();
        let base = train(&ds, 1.0, TrainOptions::default()).unwrap();
        (ds, base)
    }

    #[test]
    fn closed_form_single_removal() {
        let (ds, base) = toy();
        let n = ds.n() as f64;
        for i in 0..ds.n() {
            let b = sphere_bound(&base, &ds, i).unwrap();
            let g = loss_gradient_row(&base.model, ds.row(i), ds.label(i)).unwrap();
            let a = base.model.vector();
            let r_expect = (a + &g / base.lambda).norm() / (2.0 * (n - 1.0));
            let c_expect = a * (1.0 + 1.0 / (2.0 * (n - 1.0))) + &g / (2.0 * base.lambda * (n - 1.0));
            assert!((b.radius - r_expect).abs() <= 1e-15 * r_expect.max(1e-300));
            assert!((b.center.vector() - c_expect).norm() <= 1e-15);
        }
    }

    #[test]
    fn base_lies_on_every_sphere() {
        let (ds, base) = toy();
        for i in 0..ds.n() {
            let b = sphere_bound(&base, &ds, i).unwrap();
            let dist = b.center.distance(&base.model);
            assert!((dist - b.radius).abs() <= 1e-10 * b.radius, "row {i}: {dist} vs {}", b.radius);
        }
    }

    #[test]
    fn degenerate_sphere_at_origin() {
        // x = 0 gives zero gradient; with A(x) = 0 the sphere collapses.
        let ds = Dataset::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, -1.0, 1.0]).unwrap();
        let base = train(&ds, 1.0, TrainOptions::default()).unwrap();
        assert_eq!(base.model.as_slice(), &[0.0, 0.0]);
        let b = sphere_bound(&base, &ds, 1).unwrap();
        assert_eq!(b.radius, 0.0);
        assert_eq!(b.center.as_slice(), &[0.0, 0.0]);
        assert_eq!(worst_case_point(&b, &base), base.model);
    }

    #[test]
    fn radius_times_n_minus_one_is_n_free() {
        let a = DVector::from_vec(vec![0.3, -0.2]);
        let grad = DVector::from_vec(vec![-0.4, 0.1]);
        let scaled: Vec<f64> = [10usize, 100, 1000]
            .iter()
            .map(|&n| {
                let c = EditCounts { original: n, modified: n - 1, added: 0, removed: 1 };
                let (_, r) = general_sphere(&a, 2.0, c, &(-&grad));
                r * (n - 1) as f64
            })
            .collect();
        assert!((scaled[0] - scaled[1]).abs() < 1e-15 && (scaled[1] - scaled[2]).abs() < 1e-15);
    }

    #[test]
    fn base_on_sphere_for_general_edits() {
        let a = DVector::from_vec(vec![0.3, -0.2, 0.05]);
        let ds = DVector::from_vec(vec![-0.4, 0.1, 0.7]);
        for (added, removed) in [(1usize, 0usize), (0, 1), (2, 1), (0, 3), (4, 4)] {
            let n0 = 50;
            let c = EditCounts { original: n0, modified: n0 + added - removed, added, removed };
            let (center, r) = general_sphere(&a, 0.7, c, &ds);
            assert!(((center - &a).norm() - r).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn worst_case_example() {
        let base = BaseSolution {
            model: ModelPoint::zeros(2),
            n: 2,
            lambda: 1.0,
            grad_norm: 0.0,
            objective: 0.0,
            iterations: 0,
        };
        let b = SphereBound { index: 0, center: ModelPoint::new(vec![1.0, 0.0]).unwrap(), radius: 1.0 };
        assert_eq!(worst_case_point(&b, &base).as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn neighbor_set_identities_and_radius_bound() {
        let (ds, base) = toy();
        let set = build_neighbor_set(&base, &ds).unwrap();
        assert_eq!(set.len(), ds.n());
        let n = ds.n() as f64;
        let cap = (base.model.norm() + 1.0 / base.lambda) / (2.0 * (n - 1.0));
        for (b, wc) in set.bounds.iter().zip(&set.wc_points) {
            assert_eq!(wc, &worst_case_point(b, &base));
            let d = wc.distance(&base.model);
            assert!((d - 2.0 * b.radius).abs() <= 1e-10 * b.radius.max(1e-300));
            assert!(b.radius <= cap + 1e-15);
        }
    }

    #[test]
    fn errors() {
        let (ds, base) = toy();
        assert!(matches!(sphere_bound(&base, &ds, 7), Err(Error::Index { .. })));
        let one = Dataset::new(vec![vec![0.5, 0.5]], vec![1.0]).unwrap();
        let b1 = train(&one, 1.0, TrainOptions::default()).unwrap();
        assert!(sphere_bound(&b1, &one, 0).is_err());
        let mut wrong = base.clone();
        wrong.n = 3;
        assert!(build_neighbor_set(&wrong, &ds).is_err());
    }

    #[test]
    fn removing_a_copy_of_a_constant_dataset_changes_nothing() {
        let ds = Dataset::new(vec![vec![0.4, -0.3]; 6], vec![1.0; 6]).unwrap();
        let base = train(&ds, 1.0, TrainOptions::default()).unwrap();
        let exact = exact_neighbor(&ds, 2, 1.0, TrainOptions::default()).unwrap();
        assert!(exact.distance(&base.model) <= 2.0 * DEFAULT_TOL);
        let set = build_neighbor_set(&base, &ds).unwrap();
        let report = validate_neighbor_set(&set, &ds, TrainOptions::default()).unwrap();
        assert!(report.rows.iter().all(|r| r.rel_deviation == 0.0));
    }
}
