//! L2-regularized logistic regression without intercept, solved exactly.
//!
//! The objective over `m` logical rows is
//! `J(θ) = (1/m) Σ ln(1 + exp(-y θᵀx)) + (Λ/2)|θ|²`, which is Λ-strongly
//! convex, so the minimizer is unique. [`train`] runs a damped Newton method
//! from the origin and only returns once `|∇J| <= tol`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Rows;
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// A point in model parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct ModelPoint(DVector<f64>);

impl ModelPoint {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParameter("model point must have at least one coordinate".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("model point has non-finite entries".into()));
        }
        Ok(Self(DVector::from_vec(theta)))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Euclidean distance. Panics on a dimension mismatch; callers validate
    /// dimensions at their API boundary.
    pub fn distance(&self, other: &ModelPoint) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl From<DVector<f64>> for ModelPoint {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl From<ModelPoint> for Vec<f64> {
    fn from(p: ModelPoint) -> Self {
        p.0.as_slice().to_vec()
    }
}

impl TryFrom<Vec<f64>> for ModelPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ModelPoint::new(v)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSolution {
    pub model: ModelPoint,
    /// Logical row count the model was trained on.
    pub n: usize,
    pub lambda: f64,
    pub grad_norm: f64,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Stop once the gradient norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// `ln(1 + e^z)` without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + e^-z)`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-row logistic loss `ln(1 + exp(-y θᵀx))`.
pub fn row_loss(theta: &[f64], x: &[f64], y: f64) -> f64 {
    log1p_exp(-y * dot(theta, x))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

pub fn objective(theta: &ModelPoint, data: &impl Rows, lambda: f64) -> Result<f64> {
    check_dim(data.dim(), theta.dim())?;
    Ok(objective_unchecked(theta.as_slice(), data, lambda))
}

fn objective_unchecked(theta: &[f64], data: &impl Rows, lambda: f64) -> f64 {
    let m = data.len() as f64;
    let loss: f64 = data.iter().map(|(x, y)| row_loss(theta, x, y)).sum();
    loss / m + 0.5 * lambda * dot(theta, theta)
}

/// Gradient of the single-row loss: `-y · x · σ(-y θᵀx)`.
pub fn loss_gradient_row(theta: &ModelPoint, x: &[f64], y: f64) -> Result<DVector<f64>> {
    check_dim(theta.dim(), x.len())?;
    let s = -y * sigmoid(-y * dot(theta.as_slice(), x));
    Ok(DVector::from_iterator(x.len(), x.iter().map(|v| s * v)))
}

/// `∇J(θ)`.
pub fn gradient(theta: &ModelPoint, data: &impl Rows, lambda: f64) -> Result<DVector<f64>> {
    check_dim(data.dim(), theta.dim())?;
    Ok(gradient_unchecked(theta, data, lambda))
}

fn gradient_unchecked(theta: &ModelPoint, data: &impl Rows, lambda: f64) -> DVector<f64> {
    let d = theta.dim();
    let mut g = DVector::zeros(d);
    for (x, y) in data.iter() {
        let s = -y * sigmoid(-y * dot(theta.as_slice(), x));
        for j in 0..d {
            g[j] += s * x[j];
        }
    }
    g /= data.len() as f64;
    g + theta.vector() * lambda
}

/// `∇²J(θ) = (1/m) Σ σ(m_i)σ(-m_i) x_i x_iᵀ + Λ I` with margins `m_i = y_i θᵀx_i`.
pub fn hessian(theta: &ModelPoint, data: &impl Rows, lambda: f64) -> Result<DMatrix<f64>> {
    check_dim(data.dim(), theta.dim())?;
    let d = theta.dim();
    let mut h = DMatrix::zeros(d, d);
    for (x, y) in data.iter() {
        let margin = y * dot(theta.as_slice(), x);
        let w = sigmoid(margin) * sigmoid(-margin);
        for a in 0..d {
            for b in 0..d {
                h[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    h /= data.len() as f64;
    for a in 0..d {
        h[(a, a)] += lambda;
    }
    Ok(h)
}

/// Minimize `J` over `data` starting at the origin.
pub fn train(data: &impl Rows, lambda: f64, opts: TrainOptions) -> Result<BaseSolution> {
    check_lambda(lambda)?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    if data.is_empty() {
        return Err(Error::Data("cannot train on zero rows".into()));
    }
    let d = data.dim();
    let mut theta = ModelPoint::zeros(d);
    let mut f = objective_unchecked(theta.as_slice(), data, lambda);
    let mut g = gradient_unchecked(&theta, data, lambda);
    let mut gn = g.norm();

    for it in 0..opts.max_iter {
        if gn <= opts.tol {
            return Ok(BaseSolution {
                objective: objective_unchecked(theta.as_slice(), data, lambda),
                model: theta,
                n: data.len(),
                lambda,
                grad_norm: gn,
                iterations: it,
            });
        }

        let h = hessian(&theta, data, lambda)?;
        let mut dir = match h.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -&g,
        };
        let mut slope = g.dot(&dir);
        if slope.is_nan() || slope >= 0.0 || dir.iter().any(|v| !v.is_finite()) {
            // Hessian solve unusable; steepest descent.
            dir = -&g;
            slope = g.dot(&dir);
        }

        let mut step = 1.0;
        let accepted = loop {
            let cand = ModelPoint::from(theta.vector() + &dir * step);
            let fc = objective_unchecked(cand.as_slice(), data, lambda);
            if fc <= f + 1e-4 * step * slope {
                break Some((cand, fc));
            }
            // Near the optimum the decrease drops below the rounding floor of
            // J; fall back on the gradient norm to judge progress.
            if (fc - f).abs() <= 8.0 * f64::EPSILON * f.abs() {
                let gc = gradient_unchecked(&cand, data, lambda);
                if gc.norm() < gn {
                    break Some((cand, fc));
                }
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((cand, fc)) = accepted else {
            return Err(Error::NoConvergence { iterations: it + 1, grad_norm: gn });
        };
        theta = cand;
        f = fc;
        g = gradient_unchecked(&theta, data, lambda);
        gn = g.norm();
    }
    if gn <= opts.tol {
        return Ok(BaseSolution {
            objective: objective_unchecked(theta.as_slice(), data, lambda),
            model: theta,
            n: data.len(),
            lambda,
            grad_norm: gn,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, grad_norm: gn })
}
