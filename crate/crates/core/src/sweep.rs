//! Monte Carlo analysis over model points `M ~ 𝒜(x)` and a log-spaced ε grid.
//!
//! For every grid point `g` the sweep draws `K` model points from the base
//! mechanism, sample `s` coming from stream `[g, s]` under the master seed.
//! From the same draws it builds
//!
//! * the typical profile: per-`M` sorted `|l|` averaged rank by rank,
//! * per-neighbor curves: the mean signed loss (a KL-divergence estimate) and
//!   the mean `|l|`.
//!
//! Plateau onsets are detected on `mean |l| / β` per neighbor, which is flat at
//! low β and rises once the noise scale resolves the neighbor's distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{gaps, rank_order};
use crate::erm::ModelPoint;
use crate::error::{check_dim, Error, Result};
use crate::mechanism::{derive_seed, perturb, sample_noise_seeded, MechanismParams};
use crate::neighbors::NeighborSet;
use crate::stats::{spearman, MeanEstimate};

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_PERSISTENCE: usize = 2;
pub const DEFAULT_BASELINE_POINTS: usize = 4;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_POINTS_PER_DECADE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauParams {
    /// Relative rise above the low-β level that counts as leaving it.
    pub tau: f64,
    /// Consecutive departing grid points required.
    pub persistence: usize,
    /// The low-β level is the mean of this many leading grid points.
    pub baseline_points: usize,
}

impl Default for PlateauParams {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, persistence: DEFAULT_PERSISTENCE, baseline_points: DEFAULT_BASELINE_POINTS }
    }
}

/// Grid cell `[lo, hi]` in which a curve leaves its plateau; the departure is
/// first observed at `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetBracket {
    pub lo: f64,
    pub hi: f64,
}

impl OnsetBracket {
    pub fn beta(&self) -> f64 {
        self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epsilon_grid: Vec<f64>,
    pub samples_per_eps: usize,
    pub seed: u64,
    /// Ranks whose normalized values are tracked across the grid.
    pub rank_indices_of_interest: Vec<usize>,
    /// Neighbors that get a curve; all of them when `None`.
    pub neighbor_indices: Option<Vec<usize>>,
    pub plateau: PlateauParams,
}

impl SweepConfig {
    pub fn new(epsilon_grid: Vec<f64>, samples_per_eps: usize, seed: u64) -> Self {
        Self {
            epsilon_grid,
            samples_per_eps,
            seed,
            rank_indices_of_interest: Vec::new(),
            neighbor_indices: None,
            plateau: PlateauParams::default(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.epsilon_grid.is_empty() {
            return Err(Error::InvalidParameter("epsilon grid is empty".into()));
        }
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter("epsilon grid values must be positive".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("epsilon grid must be strictly increasing".into()));
        }
        if self.samples_per_eps < 2 {
            return Err(Error::InvalidParameter("need at least 2 samples per grid point".into()));
        }
        if let Some(&r) = self.rank_indices_of_interest.iter().find(|&&r| r >= n) {
            return Err(Error::Index { index: r, len: n });
        }
        if let Some(idx) = &self.neighbor_indices {
            if let Some(&i) = idx.iter().find(|&&i| i >= n) {
                return Err(Error::Index { index: i, len: n });
            }
        }
        Ok(())
    }
}

/// Rank-averaged privacy profile at one ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypicalProfile {
    pub epsilon: f64,
    pub beta: f64,
    pub mean_abs_loss_by_rank: Vec<f64>,
    /// `mean_abs_loss_by_rank / β`.
    pub normalized: Vec<f64>,
    pub stderr_by_rank: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborCurvePoint {
    pub epsilon: f64,
    pub beta: f64,
    /// Mean signed loss, a Monte Carlo estimate of the KL divergence.
    pub mean_loss: f64,
    pub stderr: f64,
    pub mean_abs_loss: f64,
    pub abs_stderr: f64,
    /// `mean_abs_loss / β`.
    pub normalized_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborCurve {
    pub neighbor_index: usize,
    /// `|A(x) - A_wc(y_i)|`.
    pub distance: f64,
    pub points: Vec<NeighborCurvePoint>,
    pub plateau_onset: Option<OnsetBracket>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub profiles: Vec<TypicalProfile>,
    pub neighbors: Vec<NeighborCurve>,
}

/// Normalized value and its standard error at one rank across the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankPoint {
    pub rank: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub normalized: f64,
    pub normalized_stderr: f64,
}

impl SweepResult {
    pub fn betas(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.beta).collect()
    }

    pub fn rank_curve(&self, rank: usize) -> Vec<RankPoint> {
        self.profiles
            .iter()
            .map(|p| RankPoint {
                rank,
                epsilon: p.epsilon,
                beta: p.beta,
                normalized: p.normalized[rank],
                normalized_stderr: p.stderr_by_rank[rank] / p.beta,
            })
            .collect()
    }

    pub fn epsilon_range(&self) -> Result<EpsilonRange> {
        epsilon_range(&self.profiles, self.config.plateau.tau)
    }

    pub fn scaling_collapse(&self) -> CollapseReport {
        scaling_collapse(&self.neighbors)
    }
}

/// Signed gap vectors `|c_i - M| - |A(x) - M|` for `k` draws of `M`.
fn draw_gaps(
    base: &ModelPoint,
    centers: &[ModelPoint],
    params: &MechanismParams,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..k as u64)
        .into_par_iter()
        .map(|s| {
            let m = perturb(base, &sample_noise_seeded(params, seed, &[s]))?;
            Ok(gaps(base, centers, &m))
        })
        .collect()
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn profile_from_gaps(params: &MechanismParams, draws: &[Vec<f64>]) -> TypicalProfile {
    let beta = params.beta;
    let sorted: Vec<Vec<f64>> = draws
        .iter()
        .map(|g| {
            let d: Vec<f64> = g.iter().map(|v| v.abs()).collect();
            rank_order(&d).into_iter().map(|i| beta * d[i]).collect()
        })
        .collect();
    let n = draws.first().map_or(0, Vec::len);
    let (mut mean, mut stderr) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let e = MeanEstimate::from_samples(&column(&sorted, j));
        mean.push(e.mean);
        stderr.push(e.stderr);
    }
    let normalized = mean.iter().map(|m| m / beta).collect();
    TypicalProfile { epsilon: params.epsilon, beta, mean_abs_loss_by_rank: mean, normalized, stderr_by_rank: stderr }
}

fn check_set(base: &ModelPoint, set: &NeighborSet, params: &MechanismParams) -> Result<()> {
    check_dim(params.d, base.dim())?;
    check_dim(set.base.model.dim(), base.dim())?;
    if set.is_empty() {
        return Err(Error::InvalidParameter("neighbor set is empty".into()));
    }
    Ok(())
}

/// Typical profile from `k` model points; sample `s` uses stream `[s]` under `seed`.
pub fn typical_profile(
    base: &ModelPoint,
    set: &NeighborSet,
    params: &MechanismParams,
    k: usize,
    seed: u64,
) -> Result<TypicalProfile> {
    check_set(base, set, params)?;
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let draws = draw_gaps(base, &set.wc_points, params, k, seed)?;
    Ok(profile_from_gaps(params, &draws))
}

/// `E_{M ~ 𝒜(x)}[l(x, y, M)]` with its standard error.
pub fn neighbor_mean_loss(
    base: &ModelPoint,
    nbr: &ModelPoint,
    params: &MechanismParams,
    k: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    check_dim(params.d, base.dim())?;
    check_dim(base.dim(), nbr.dim())?;
    if k < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let draws = draw_gaps(base, std::slice::from_ref(nbr), params, k, seed)?;
    let losses: Vec<f64> = draws.iter().map(|g| params.beta * g[0]).collect();
    Ok(MeanEstimate::from_samples(&losses))
}

/// Full sweep. Grid point `g` uses seed `derive_seed(config.seed, [g])`.
pub fn run_sweep(set: &NeighborSet, config: &SweepConfig) -> Result<SweepResult> {
    let n = set.len();
    config.validate(n)?;
    let base = &set.base.model;
    let (lambda, rows, d) = (set.base.lambda, set.base.n, base.dim());
    let selected: Vec<usize> = config.neighbor_indices.clone().unwrap_or_else(|| (0..n).collect());
    let k = config.samples_per_eps;

    let per_grid: Vec<(TypicalProfile, Vec<NeighborCurvePoint>)> = config
        .epsilon_grid
        .par_iter()
        .enumerate()
        .map(|(g, &eps)| {
            let params = MechanismParams::new(eps, lambda, rows, d)?;
            check_set(base, set, &params)?;
            let draws = draw_gaps(base, &set.wc_points, &params, k, derive_seed(config.seed, &[g as u64]))?;
            let profile = profile_from_gaps(&params, &draws);
            let points = selected
                .iter()
                .map(|&i| {
                    let signed: Vec<f64> = draws.iter().map(|r| params.beta * r[i]).collect();
                    let abs: Vec<f64> = signed.iter().map(|v| v.abs()).collect();
                    let s = MeanEstimate::from_samples(&signed);
                    let a = MeanEstimate::from_samples(&abs);
                    NeighborCurvePoint {
                        epsilon: eps,
                        beta: params.beta,
                        mean_loss: s.mean,
                        stderr: s.stderr,
                        mean_abs_loss: a.mean,
                        abs_stderr: a.stderr,
                        normalized_abs: a.mean / params.beta,
                    }
                })
                .collect();
            Ok((profile, points))
        })
        .collect::<Result<_>>()?;

    let betas: Vec<f64> = per_grid.iter().map(|(p, _)| p.beta).collect();
    let distances = set.distances();
    let neighbors = selected
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let points: Vec<NeighborCurvePoint> = per_grid.iter().map(|(_, pts)| pts[slot]).collect();
            let values: Vec<f64> = points.iter().map(|p| p.normalized_abs).collect();
            let plateau_onset = if betas.len() >= 4 { detect_plateau(&values, &betas, &config.plateau)? } else { None };
            Ok(NeighborCurve { neighbor_index: i, distance: distances[i], points, plateau_onset })
        })
        .collect::<Result<_>>()?;

    Ok(SweepResult { config: config.clone(), profiles: per_grid.into_iter().map(|(p, _)| p).collect(), neighbors })
}

fn relative_gap(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((value - reference) / reference).abs()
    }
}

/// First grid cell where `values` rises above its low-β level by more than a
/// relative `tau` for `persistence` consecutive points. Dips below the level
/// are not onsets.
pub fn detect_plateau(values: &[f64], betas: &[f64], plateau: &PlateauParams) -> Result<Option<OnsetBracket>> {
    if values.len() != betas.len() {
        return Err(Error::InvalidParameter(format!("{} values for {} grid points", values.len(), betas.len())));
    }
    if betas.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "plateau detection needs at least 4 grid points, got {}",
            betas.len()
        )));
    }
    if plateau.persistence == 0 || plateau.baseline_points == 0 {
        return Err(Error::InvalidParameter("persistence and baseline_points must be positive".into()));
    }
    let nb = plateau.baseline_points.min(values.len());
    let level = values[..nb].iter().sum::<f64>() / nb as f64;
    let departed: Vec<bool> = values.iter().map(|&v| v > level && relative_gap(v, level) > plateau.tau).collect();
    for k in 1..values.len() {
        let end = k + plateau.persistence;
        if end <= values.len() && departed[k..end].iter().all(|&d| d) {
            return Ok(Some(OnsetBracket { lo: betas[k - 1], hi: betas[k] }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseRow {
    pub neighbor_index: usize,
    pub onset_lo: f64,
    pub onset_hi: f64,
    pub distance: f64,
    /// `onset_hi * distance`.
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub rows: Vec<CollapseRow>,
    /// Neighbors without a detected onset.
    pub excluded: Vec<usize>,
    /// `max(product) / min(product)`; NaN when no onset was found.
    pub product_ratio: f64,
    /// Spearman correlation between onset β and distance.
    pub spearman: f64,
}

/// Onset times distance for every curve with a detected onset.
pub fn scaling_collapse(curves: &[NeighborCurve]) -> CollapseReport {
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for c in curves {
        match c.plateau_onset {
            Some(b) => rows.push(CollapseRow {
                neighbor_index: c.neighbor_index,
                onset_lo: b.lo,
                onset_hi: b.hi,
                distance: c.distance,
                product: b.beta() * c.distance,
            }),
            None => excluded.push(c.neighbor_index),
        }
    }
    let products: Vec<f64> = rows.iter().map(|r| r.product).collect();
    let product_ratio = if products.is_empty() {
        f64::NAN
    } else {
        products.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            / products.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let onsets: Vec<f64> = rows.iter().map(|r| r.onset_hi).collect();
    let dists: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let spearman = spearman(&onsets, &dists);
    CollapseReport { rows, excluded, product_ratio, spearman }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonRange {
    pub eps_low: f64,
    pub eps_high: f64,
}

fn profiles_match(p: &[f64], reference: &[f64], tau: f64) -> bool {
    p.len() == reference.len() && p.iter().zip(reference).all(|(&v, &r)| relative_gap(v, r) <= tau)
}

/// Edges of the transition band.
///
/// `eps_low` is the largest ε (other than the first) whose normalized profile
/// matches the lowest-ε profile within `tau` at every rank; `eps_high` is the
/// smallest ε (other than the last) matching the highest-ε profile.
pub fn epsilon_range(profiles: &[TypicalProfile], tau: f64) -> Result<EpsilonRange> {
    if profiles.len() < 3 {
        return Err(Error::Regime("need at least 3 grid points to locate a transition".into()));
    }
    let low_ref = &profiles[0].normalized;
    let high_ref = &profiles[profiles.len() - 1].normalized;
    let eps_low = profiles[1..]
        .iter()
        .rev()
        .find(|p| profiles_match(&p.normalized, low_ref, tau))
        .map(|p| p.epsilon)
        .ok_or_else(|| {
        Error::Regime("low-epsilon plateau not reached; extend the grid to smaller epsilon".into())
    })?;
    let eps_high = profiles[..profiles.len() - 1]
        .iter()
        .find(|p| profiles_match(&p.normalized, high_ref, tau))
        .map(|p| p.epsilon)
        .ok_or_else(|| Error::Regime("high-epsilon plateau not reached; extend the grid to larger epsilon".into()))?;
    if eps_low >= eps_high {
        return Err(Error::Regime(format!(
            "no transition band resolved (eps_low {eps_low} >= eps_high {eps_high}); extend the grid"
        )));
    }
    Ok(EpsilonRange { eps_low, eps_high })
}
