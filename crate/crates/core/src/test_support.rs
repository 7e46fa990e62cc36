use crate::erm::{BaseSolution, ModelPoint};
use crate::neighbors::{NeighborSet, SphereBound};

pub(crate) fn pt(v: &[f64]) -> ModelPoint {
    ModelPoint::new(v.to_vec()).unwrap()
}

/// Neighbor set with prescribed worst-case points.
pub(crate) fn synthetic_set(base: &ModelPoint, wc: &[ModelPoint]) -> NeighborSet {
    let bounds = wc
        .iter()
        .enumerate()
        .map(|(i, p)| SphereBound {
            index: i,
            center: ((p.vector() + base.vector()) * 0.5).into(),
            radius: p.distance(base) / 2.0,
        })
        .collect();
    NeighborSet {
        base: BaseSolution {
            model: base.clone(),
            n: wc.len(),
            lambda: 1.0,
            grad_norm: 0.0,
            objective: 0.0,
            iterations: 0,
        },
        bounds,
        wc_points: wc.to_vec(),
    }
}
