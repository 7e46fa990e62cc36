//! Coverage-based privacy loss of a single model point.
//!
//! Coverage `C(y, M)` is the mechanism's pdf at `M` (the zero-radius limit of
//! the ball probability). With Laplace-norm noise the loss against neighbor
//! `y` reduces to
//!
//! ```text
//! l(x, y, M) = -log[C(y, M) / C(x, M)] = β (|A(y) - M| - |A(x) - M|)
//! ```
//!
//! positive when the neighbor's mechanism covers `M` less than the base one.
//! `d(x, y, M) = ||A(y) - M| - |A(x) - M||` is β-free and `|l| = β d`.
//! Normalizing constants are never evaluated.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::erm::ModelPoint;
use crate::error::{check_dim, Error, Result};
use crate::mechanism::{sample_model, MechanismParams};
use crate::neighbors::NeighborSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyLoss {
    pub neighbor_index: usize,
    /// Signed loss `l`.
    pub loss: f64,
    pub abs_loss: f64,
    pub d_xym: f64,
    pub beta: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")))
    }
}

/// Distance difference `|A(y) - M| - |A(x) - M|`.
fn signed_gap(base: &ModelPoint, nbr: &ModelPoint, m: &ModelPoint) -> f64 {
    nbr.distance(m) - base.distance(m)
}

fn loss_record(neighbor_index: usize, gap: f64, beta: f64) -> PrivacyLoss {
    let d_xym = gap.abs();
    PrivacyLoss { neighbor_index, loss: beta * gap, abs_loss: beta * d_xym, d_xym, beta }
}

/// `l(x, y, M)` for one neighbor. The index is recorded as 0.
pub fn privacy_loss(base: &ModelPoint, nbr: &ModelPoint, m: &ModelPoint, beta: f64) -> Result<PrivacyLoss> {
    check_dim(base.dim(), nbr.dim())?;
    check_dim(base.dim(), m.dim())?;
    check_beta(beta)?;
    Ok(loss_record(0, signed_gap(base, nbr, m), beta))
}

/// Ranked losses of every neighbor at one model point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyProfile {
    pub model_point: ModelPoint,
    pub beta: f64,
    /// Ascending in `abs_loss`, ties broken by neighbor index.
    pub ranked_losses: Vec<PrivacyLoss>,
    /// `ranking[r]` is the neighbor index at rank `r`.
    pub ranking: Vec<usize>,
}

impl PrivacyProfile {
    /// Most vulnerable neighbor and its `d_max`.
    pub fn most_vulnerable(&self) -> Option<&PrivacyLoss> {
        self.ranked_losses.last()
    }

    pub fn abs_losses(&self) -> Vec<f64> {
        self.ranked_losses.iter().map(|l| l.abs_loss).collect()
    }
}

/// Signed gaps of every neighbor at `m`, in neighbor order.
pub(crate) fn gaps(base: &ModelPoint, centers: &[ModelPoint], m: &ModelPoint) -> Vec<f64> {
    let self_dist = base.distance(m);
    centers.iter().map(|c| c.distance(m) - self_dist).collect()
}

/// Sort order used by profiles: by `d` (β-free) then by index, so the ranking
/// cannot depend on β.
pub(crate) fn rank_order(d: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

pub fn privacy_profile(base: &ModelPoint, set: &NeighborSet, m: &ModelPoint, beta: f64) -> Result<PrivacyProfile> {
    check_beta(beta)?;
    check_dim(set.base.model.dim(), base.dim())?;
    check_dim(base.dim(), m.dim())?;
    let gap = gaps(base, &set.wc_points, m);
    let d: Vec<f64> = gap.iter().map(|g| g.abs()).collect();
    let ranking = rank_order(&d);
    let ranked_losses = ranking.iter().map(|&i| loss_record(i, gap[i], beta)).collect();
    Ok(PrivacyProfile { model_point: m.clone(), beta, ranked_losses, ranking })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageEstimate {
    /// Fraction of samples within the cutoff.
    pub value: f64,
    /// Binomial standard error `sqrt(p(1-p)/K)`.
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
}

/// Ball-probability coverage `P(|𝒜(y) - M| < c)` estimated from `k` draws of
/// the mechanism centered at `center`.
pub fn empirical_coverage<R: Rng + ?Sized>(
    center: &ModelPoint,
    params: &MechanismParams,
    m: &ModelPoint,
    cutoff: f64,
    k: usize,
    rng: &mut R,
) -> Result<CoverageEstimate> {
    check_dim(center.dim(), m.dim())?;
    if cutoff.is_nan() || cutoff <= 0.0 {
        return Err(Error::InvalidParameter(format!("cutoff radius must be positive, got {cutoff}")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut hits = 0usize;
    for _ in 0..k {
        if sample_model(center, params, rng)?.distance(m) < cutoff {
            hits += 1;
        }
    }
    let p = hits as f64 / k as f64;
    Ok(CoverageEstimate { value: p, stderr: (p * (1.0 - p) / k as f64).sqrt(), hits, samples: k })
}

/// Axis-aligned rectangle sampled on a `resolution × resolution` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: usize,
}

impl HeatmapGrid {
    /// Square window around the base point and all neighbors, padded by 10%.
    pub fn around(base: &ModelPoint, set: &NeighborSet, m: &ModelPoint, resolution: usize) -> Self {
        let pts = set.wc_points.iter().chain([base, m]);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in pts {
            let s = p.as_slice();
            x0 = x0.min(s[0]);
            x1 = x1.max(s[0]);
            y0 = y0.min(s[1]);
            y1 = y1.max(s[1]);
        }
        let pad = 0.1 * (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
        Self { x_min: x0 - pad, x_max: x1 + pad, y_min: y0 - pad, y_max: y1 + pad, resolution }
    }
}

/// One neighbor marker of the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapStar {
    pub neighbor_index: usize,
    pub x: f64,
    pub y: f64,
    pub abs_loss: f64,
}

/// Background cell: the loss a neighbor placed at `(x, y)` would have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub x: f64,
    pub y: f64,
    pub abs_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub stars: Vec<HeatmapStar>,
    pub field: Vec<HeatmapCell>,
}

/// Two-dimensional loss map around `m`. Stars are in neighbor order.
pub fn heatmap_grid(
    base: &ModelPoint,
    set: &NeighborSet,
    grid: &HeatmapGrid,
    m: &ModelPoint,
    beta: f64,
) -> Result<Heatmap> {
    if base.dim() != 2 {
        return Err(Error::InvalidParameter(format!("heatmaps need a 2-dimensional model space, got {}", base.dim())));
    }
    check_dim(2, m.dim())?;
    check_beta(beta)?;
    if grid.resolution < 2
        || grid.x_max.partial_cmp(&grid.x_min) != Some(std::cmp::Ordering::Greater)
        || grid.y_max.partial_cmp(&grid.y_min) != Some(std::cmp::Ordering::Greater)
    {
        return Err(Error::InvalidParameter("heatmap grid needs a nonempty window and resolution >= 2".into()));
    }
    let gap = gaps(base, &set.wc_points, m);
    let stars = set
        .wc_points
        .iter()
        .zip(&gap)
        .enumerate()
        .map(|(i, (p, g))| HeatmapStar {
            neighbor_index: i,
            x: p.as_slice()[0],
            y: p.as_slice()[1],
            abs_loss: beta * g.abs(),
        })
        .collect();

    let res = grid.resolution;
    let self_dist = base.distance(m);
    let (mx, my) = (m.as_slice()[0], m.as_slice()[1]);
    let field = (0..res * res)
        .into_par_iter()
        .map(|cell| {
            let (iy, ix) = (cell / res, cell % res);
            let x = grid.x_min + (grid.x_max - grid.x_min) * ix as f64 / (res - 1) as f64;
            let y = grid.y_min + (grid.y_max - grid.y_min) * iy as f64 / (res - 1) as f64;
            let dist = ((x - mx).powi(2) + (y - my).powi(2)).sqrt();
            HeatmapCell { x, y, abs_loss: beta * (dist - self_dist).abs() }
        })
        .collect();
    Ok(Heatmap { stars, field })
}
