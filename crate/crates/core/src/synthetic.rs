//! Seeded synthetic data.
//!
//! All randomness is derived from a master seed; [`derive_seed`] turns a
//! master seed and a stream index (trial number, chunk number, ...) into an
//! independent child seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Dataset, Label, LabeledSample};
use crate::error::{Error, Result};
use crate::norm::NormSpec;

/// SplitMix64 finalizer applied to `master ⊕ stream`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labels alternate `+1, −1, …`, so even `m` gives balanced classes.
fn label_for(i: usize) -> Label {
    if i % 2 == 0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Source of labeled samples for repeated experiments.
pub trait SampleGenerator: Send + Sync {
    fn dim(&self) -> usize;
    fn draw(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<Dataset>;
}

/// Two isotropic Gaussian classes with means `±(separation/2)·e₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture {
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
}

impl SampleGenerator for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        if self.dim == 0 || m == 0 || !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian mixture needs dim ≥ 1, m ≥ 1, sigma ≥ 0 (got {}, {m}, {})",
                self.dim, self.sigma
            )));
        }
        let noise = Normal::new(0.0, self.sigma)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let samples = (0..m)
            .map(|i| {
                let y = label_for(i);
                let mut x: Vec<f64> = (0..self.dim).map(|_| noise.sample(rng)).collect();
                x[0] += y.value() * self.separation / 2.0;
                LabeledSample::new(x, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }
}

/// Both classes uniform on `[0, 1]^dim`: labels carry no information about
/// the features, so every classifier has expected error 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformNoise {
    pub dim: usize,
}

impl SampleGenerator for UniformNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let samples = (0..m)
            .map(|i| LabeledSample::new((0..self.dim).map(|_| rng.random::<f64>()).collect(), label_for(i)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }
}

/// Every positive sample sits at `positive`, every negative one at `negative`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPoints {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl SampleGenerator for TwoPoints {
    fn dim(&self) -> usize {
        self.positive.len()
    }

    fn draw(&self, m: usize, _rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let samples = (0..m)
            .map(|i| {
                let y = label_for(i);
                let x = match y {
                    Label::Positive => self.positive.clone(),
                    Label::Negative => self.negative.clone(),
                };
                LabeledSample::new(x, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }
}

/// Balanced two-class Gaussian blobs (see [`GaussianMixture`]).
pub fn gaussian_blobs(m: usize, dim: usize, separation: f64, sigma: f64, seed: u64) -> Result<Dataset> {
    GaussianMixture {
        dim,
        separation,
        sigma,
    }
    .draw(m, &mut rng_from(seed))
}

/// A copy of `base` with i.i.d. `N(0, noise²)` added to every feature.
pub fn replicated_with_noise(base: &Dataset, noise: f64, seed: u64) -> Result<Dataset> {
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidParameter(format!("noise scale must be nonnegative, got {noise}")));
    }
    let mut rng = rng_from(seed);
    let samples = base
        .iter()
        .map(|s| {
            let x = s
                .x
                .iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + noise * z
                })
                .collect();
            LabeledSample::new(x, s.y)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}

/// Splits a dataset into its first and second halves (odd `m` drops the
/// last sample). Treating the second half as a disturbed copy of the first
/// gives an empirical look at the disturbance.
pub fn split_halves(ds: &Dataset) -> Result<(Dataset, Dataset)> {
    let half = ds.len() / 2;
    if half == 0 {
        return Err(Error::InvalidParameter("need at least two samples to split".into()));
    }
    let s = ds.samples();
    Ok((
        Dataset::new(s[..half].to_vec())?,
        Dataset::new(s[half..2 * half].to_vec())?,
    ))
}

/// Total disturbance `Σᵢ ‖x'ᵢ − xᵢ‖` between a dataset and its disturbed copy.
pub fn disturbance_budget(base: &Dataset, copy: &Dataset, norm: &NormSpec) -> Result<f64> {
    if base.len() != copy.len() {
        return Err(Error::SizeMismatch(format!("{} vs {} samples", base.len(), copy.len())));
    }
    base.iter()
        .zip(copy)
        .map(|(a, b)| {
            let d: Vec<f64> = b.x.iter().zip(&a.x).map(|(u, v)| u - v).collect();
            norm.value(&d)
        })
        .sum()
}
