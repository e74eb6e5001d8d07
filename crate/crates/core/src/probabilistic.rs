//! Choosing the disturbance budget from probabilistic information.
//!
//! Two routes: a Monte-Carlo quantile `c*` of the total disturbance
//! `Σᵢ‖δᵢ‖*`, which turns regularized training into an upper bound for the
//! chance-constrained classifier, and the prior mean `c̄` of the total
//! disturbance in a Bayesian setup.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::LinearClassifier;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::norm::NormSpec;
use crate::synthetic::{derive_seed, rng_from};
use crate::uncertainty::perturbed_hinge;

/// Draws one joint disturbance `(δ₁, …, δ_m)` in `R^n`.
pub trait DisturbanceSampler: Send + Sync {
    fn sample(&self, m: usize, n: usize, norm: &NormSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>>;
}

/// Built-in disturbance laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BuiltinDisturbance {
    /// No disturbance at all.
    Zero,
    /// Every coordinate i.i.d. `N(0, σ²)`.
    Gaussian { sigma: f64 },
    /// Each `δᵢ` independent and uniform in the Euclidean ball of this radius.
    UniformInBall { radius: f64 },
    /// Total budget `Σ‖δᵢ‖` uniform on `[0, max_total]`, split across samples
    /// uniformly on the simplex, random directions.
    UniformBudget { max_total: f64 },
    /// The same fixed disturbance on every draw (one row per sample).
    PointMass { deltas: Vec<Vec<f64>> },
}

fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let len = crate::norm::l2(&v);
        if len > 0.0 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

impl DisturbanceSampler for BuiltinDisturbance {
    fn sample(&self, m: usize, n: usize, norm: &NormSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        match self {
            BuiltinDisturbance::Zero => vec![vec![0.0; n]; m],
            BuiltinDisturbance::Gaussian { sigma } => {
                let d = Normal::new(0.0, *sigma).expect("validated sigma");
                (0..m).map(|_| (0..n).map(|_| d.sample(rng)).collect()).collect()
            }
            BuiltinDisturbance::UniformInBall { radius } => (0..m)
                .map(|_| {
                    let u = random_direction(n, rng);
                    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                    u.into_iter().map(|x| r * x).collect()
                })
                .collect(),
            BuiltinDisturbance::UniformBudget { max_total } => {
                let total = max_total * rng.random::<f64>();
                let weights: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
                let sum: f64 = weights.iter().sum();
                weights
                    .iter()
                    .map(|w| {
                        let u = random_direction(n, rng);
                        let size = norm.value(&u).expect("dimension matches");
                        let scale = total * w / sum / size;
                        u.into_iter().map(|x| scale * x).collect()
                    })
                    .collect()
            }
            BuiltinDisturbance::PointMass { deltas } => deltas.clone(),
        }
    }
}

impl BuiltinDisturbance {
    fn validate(&self, m: usize, n: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match self {
            BuiltinDisturbance::Gaussian { sigma } if !(*sigma >= 0.0) || !sigma.is_finite() => {
                bad("gaussian sigma must be finite and nonnegative")
            }
            BuiltinDisturbance::UniformInBall { radius } if !(*radius >= 0.0) || !radius.is_finite() => {
                bad("ball radius must be finite and nonnegative")
            }
            BuiltinDisturbance::UniformBudget { max_total }
                if !(*max_total >= 0.0) || !max_total.is_finite() =>
            {
                bad("maximum budget must be finite and nonnegative")
            }
            BuiltinDisturbance::PointMass { deltas }
                if deltas.len() != m || deltas.iter().any(|d| d.len() != n) =>
            {
                bad("point-mass disturbance must have one n-vector per sample")
            }
            _ => Ok(()),
        }
    }
}

/// A joint disturbance law together with the norm `‖·‖*` in which budgets
/// are measured. The matching regularizer is the dual of that norm.
pub struct DisturbanceModel {
    pub sampler: Box<dyn DisturbanceSampler>,
    pub norm: NormSpec,
    pub dim: usize,
}

impl DisturbanceModel {
    pub fn builtin(law: BuiltinDisturbance, norm: NormSpec, m: usize, dim: usize) -> Result<Self> {
        law.validate(m, dim)?;
        Ok(Self {
            sampler: Box::new(law),
            norm,
            dim,
        })
    }

    pub fn custom(sampler: Box<dyn DisturbanceSampler>, norm: NormSpec, dim: usize) -> Self {
        Self { sampler, norm, dim }
    }

    /// `n_draws` joint draws, reproducible from `seed` regardless of thread count.
    pub fn draws(&self, m: usize, n_draws: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
        self.map_draws(m, n_draws, seed, |d| d)
    }

    fn map_draws<T: Send>(
        &self,
        m: usize,
        n_draws: usize,
        seed: u64,
        f: impl Fn(Vec<Vec<f64>>) -> T + Sync,
    ) -> Vec<T> {
        const CHUNK: usize = 1024;
        let chunks = n_draws.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = rng_from(derive_seed(seed, c as u64));
                let len = CHUNK.min(n_draws - c * CHUNK);
                (0..len)
                    .map(|_| f(self.sampler.sample(m, self.dim, &self.norm, &mut rng)))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn total_size(&self, deltas: &[Vec<f64>]) -> f64 {
        deltas
            .iter()
            .map(|d| self.norm.value(d).expect("dimension matches"))
            .sum()
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")))
    }
}

/// Lower empirical quantile: the `k`-th smallest value with `k = ⌈level·n⌉`.
pub fn lower_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let k = ((level * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[k - 1]
}

/// Monte-Carlo estimate of `c* = inf{α : μ(Σᵢ‖δᵢ‖* ≤ α) ≥ 1 − η}`.
pub fn calibrate_chance(dm: &DisturbanceModel, m: usize, eta: f64, n_draws: usize, seed: u64) -> Result<f64> {
    check_eta(eta)?;
    if n_draws < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 draws, got {n_draws}")));
    }
    let mut totals = dm.map_draws(m, n_draws, seed, |d| dm.total_size(&d));
    totals.sort_by(|a, b| a.total_cmp(b));
    Ok(lower_quantile(&totals, 1.0 - eta))
}

/// Quantiles at several levels from one draw set (so they are comparable).
pub fn calibrate_chance_levels(
    dm: &DisturbanceModel,
    m: usize,
    etas: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    for eta in etas {
        check_eta(*eta)?;
    }
    let mut totals = dm.map_draws(m, n_draws, seed, |d| dm.total_size(&d));
    totals.sort_by(|a, b| a.total_cmp(b));
    Ok(etas.iter().map(|eta| lower_quantile(&totals, 1.0 - eta)).collect())
}

/// Fraction of disturbance draws on which the realized hinge loss of the
/// perturbed data stays below `c*·‖w‖ + Σ hinge`.
pub fn chance_bound_check(
    clf: &LinearClassifier,
    ds: &Dataset,
    dm: &DisturbanceModel,
    c_star: f64,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    let bound = c_star * dm.norm.dual(&clf.w)? + clf.empirical_hinge(ds)?;
    let slack = 1e-12 * (1.0 + bound.abs());
    let covered = dm
        .map_draws(ds.len(), n_draws, seed, |d| perturbed_hinge(clf, ds, &d))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .filter(|realized| *realized <= bound + slack)
        .count();
    Ok(covered as f64 / n_draws as f64)
}

/// Prior on the total disturbance budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BudgetPrior {
    PointMass { c: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
    Mixture { components: Vec<(BudgetPrior, f64)> },
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in weights {
        if !(p >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative probability {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl BudgetPrior {
    pub fn validate(&self) -> Result<()> {
        let support = |c: f64| {
            if c >= 0.0 && c.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("budget support must be nonnegative, got {c}")))
            }
        };
        match self {
            BudgetPrior::PointMass { c } => support(*c),
            BudgetPrior::Discrete { atoms } => {
                atoms.iter().try_for_each(|(c, _)| support(*c))?;
                check_weights(atoms.iter().map(|(_, p)| *p))
            }
            BudgetPrior::Uniform { lo, hi } => {
                support(*lo)?;
                support(*hi)?;
                if lo > hi {
                    return Err(Error::InvalidParameter(format!("uniform prior has lo {lo} > hi {hi}")));
                }
                Ok(())
            }
            BudgetPrior::Mixture { components } => {
                components.iter().try_for_each(|(p, _)| p.validate())?;
                check_weights(components.iter().map(|(_, w)| *w))
            }
        }
    }

    fn mean(&self) -> f64 {
        match self {
            BudgetPrior::PointMass { c } => *c,
            BudgetPrior::Discrete { atoms } => atoms.iter().map(|(c, p)| c * p).sum(),
            BudgetPrior::Uniform { lo, hi } => (lo + hi) / 2.0,
            BudgetPrior::Mixture { components } => components.iter().map(|(p, w)| w * p.mean()).sum(),
        }
    }
}

/// `c̄ = ∫ c dρ(c)`, in closed form.
pub fn bayes_regularizer(prior: &BudgetPrior) -> Result<f64> {
    prior.validate()?;
    Ok(prior.mean())
}
