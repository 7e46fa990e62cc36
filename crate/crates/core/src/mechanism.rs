//! Output perturbation with Laplace-norm noise.
//!
//! The mechanism releases `A(x) + b` where `b` has density proportional to
//! `exp(-β|b|)` and `β = nΛε/2`. In `d` dimensions this is sampled as a
//! uniform direction times a `Gamma(shape = d, rate = β)` radius. Densities
//! are only ever used up to their normalizing constant, which cancels in every
//! ratio computed by this crate.
//!
//! Seeds: a master seed is split into independent streams with
//! [`derive_seed`]; stream `(a, b, ...)` is seeded from the master by a
//! SplitMix64 chain over the path elements, and each stream drives its own
//! `ChaCha8Rng`. Results therefore do not depend on thread scheduling.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::erm::ModelPoint;
use crate::error::{check_dim, Error, Result};

/// Random generator used for every derived stream.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream at `path` under `master`:
/// `s = master; for p in path { s = splitmix64(s ^ splitmix64(p)) }`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &p| splitmix64(s ^ splitmix64(p)))
}

pub fn stream_rng(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// `β = nΛε/2`.
pub fn beta_of(epsilon: f64, n: usize, lambda: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(n as f64 * lambda * epsilon / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub n: usize,
    pub d: usize,
    pub beta: f64,
}

impl MechanismParams {
    pub fn new(epsilon: f64, lambda: f64, n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let beta = beta_of(epsilon, n, lambda)?;
        Ok(Self { epsilon, lambda, n, d, beta })
    }

    /// Mechanism with a prescribed noise scale. Encoded as `n = 2, Λ = 1,
    /// ε = β`, for which `nΛε/2` reproduces `β` exactly.
    pub fn with_beta(beta: f64, d: usize) -> Result<Self> {
        let p = Self::new(beta, 1.0, 2, d)?;
        debug_assert_eq!(p.beta, beta);
        Ok(p)
    }

    /// Same dataset and regularization, different ε.
    pub fn at_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.lambda, self.n, self.d)
    }

    /// Mean noise radius `d / β`.
    pub fn mean_radius(&self) -> f64 {
        self.d as f64 / self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub b: DVector<f64>,
    pub radius: f64,
    /// Derived stream seed, when the sample came from a seeded stream.
    pub seed_id: Option<u64>,
}

impl NoiseSample {
    pub fn from_vector(b: DVector<f64>) -> Self {
        let radius = b.norm();
        Self { b, radius, seed_id: None }
    }
}

fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_iterator(d, (0..d).map(|_| rng.sample(StandardNormal)));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// One draw of `b` with density `∝ exp(-β|b|)`.
pub fn sample_noise<R: Rng + ?Sized>(params: &MechanismParams, rng: &mut R) -> NoiseSample {
    let dir = unit_direction(params.d, rng);
    let gamma = Gamma::new(params.d as f64, 1.0 / params.beta).expect("validated shape and scale");
    let radius: f64 = gamma.sample(rng);
    NoiseSample { b: dir * radius, radius, seed_id: None }
}

/// Noise drawn from stream `path` under `master`.
pub fn sample_noise_seeded(params: &MechanismParams, master: u64, path: &[u64]) -> NoiseSample {
    let seed = derive_seed(master, path);
    let mut rng = StreamRng::seed_from_u64(seed);
    let mut s = sample_noise(params, &mut rng);
    s.seed_id = Some(seed);
    s
}

/// `center + b`.
pub fn perturb(center: &ModelPoint, noise: &NoiseSample) -> Result<ModelPoint> {
    check_dim(center.dim(), noise.b.len())?;
    Ok((center.vector() + &noise.b).into())
}

/// One output of the mechanism centered at `center`.
pub fn sample_model<R: Rng + ?Sized>(center: &ModelPoint, params: &MechanismParams, rng: &mut R) -> Result<ModelPoint> {
    check_dim(params.d, center.dim())?;
    perturb(center, &sample_noise(params, rng))
}

/// `k` outputs; sample `s` uses stream `[s]` under `seed`.
pub fn sample_models(center: &ModelPoint, params: &MechanismParams, seed: u64, k: usize) -> Result<Vec<ModelPoint>> {
    check_dim(params.d, center.dim())?;
    (0..k as u64).into_par_iter().map(|s| perturb(center, &sample_noise_seeded(params, seed, &[s]))).collect()
}

/// `-β |center - m|`; the normalizing constant is omitted.
pub fn log_pdf_unnormalized(center: &ModelPoint, m: &ModelPoint, beta: f64) -> Result<f64> {
    check_dim(center.dim(), m.dim())?;
    Ok(-beta * center.distance(m))
}
