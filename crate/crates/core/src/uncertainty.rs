//! Disturbance geometries and worst-case hinge losses.
//!
//! An atomic set `N₀` bounds the disturbance on a single sample. A sublinear
//! aggregated set couples the disturbances of all `m` samples and is
//! sandwiched between `N⁻` (only one sample perturbed, anywhere in `N₀`) and
//! `N⁺` (a convex-combination split of one `N₀` budget). A box set perturbs
//! every sample independently at full budget.
//!
//! The closed forms here go through the support function
//! `σ(w) = sup_{δ∈N₀} wᵀδ`; [`brute_force_worst_case`] searches a grid of
//! feasible disturbances without using it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::{dot, LinearClassifier};
use crate::data::Dataset;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::norm::{l2, Ellipsoidal, NormSpec};

/// A bounded symmetric set containing the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomicSet {
    /// `{δ : ‖δ‖ ≤ radius}`.
    NormBall { norm: NormSpec, radius: f64 },
    /// `{δ : δᵀΣ⁻¹δ ≤ 1}`.
    Ellipsoid(Ellipsoidal),
}

impl AtomicSet {
    pub fn norm_ball(norm: NormSpec, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(AtomicSet::NormBall { norm, radius })
    }

    pub fn ellipsoid(shape: Ellipsoidal) -> Self {
        AtomicSet::Ellipsoid(shape)
    }

    /// Minkowski gauge `inf{t ≥ 0 : δ ∈ t·N₀}` scaled so that the set is
    /// `{gauge ≤ budget}`. Returns `(‖δ‖, budget)`.
    fn measure(&self, delta: &[f64]) -> Result<(f64, f64)> {
        match self {
            AtomicSet::NormBall { norm, radius } => Ok((norm.value(delta)?, *radius)),
            AtomicSet::Ellipsoid(e) => {
                check_dim(e.dim(), delta.len())?;
                Ok((e.value(delta), 1.0))
            }
        }
    }

    /// The budget in units of the set's own norm (the radius, or 1 for an ellipsoid).
    pub fn budget(&self) -> f64 {
        match self {
            AtomicSet::NormBall { radius, .. } => *radius,
            AtomicSet::Ellipsoid(_) => 1.0,
        }
    }

    /// The norm whose ball of radius [`budget`](Self::budget) is this set.
    pub fn norm(&self) -> NormSpec {
        match self {
            AtomicSet::NormBall { norm, .. } => norm.clone(),
            AtomicSet::Ellipsoid(e) => NormSpec::Ellipsoidal(e.clone()),
        }
    }

    /// `sup_{δ∈N₀} wᵀδ`.
    pub fn support(&self, w: &[f64]) -> Result<f64> {
        check_finite(w, "support direction")?;
        match self {
            AtomicSet::NormBall { norm, radius } => Ok(radius * norm.dual(w)?),
            AtomicSet::Ellipsoid(e) => {
                check_dim(e.dim(), w.len())?;
                Ok(e.dual(w))
            }
        }
    }

    /// A subgradient of the support function (a maximizer `δ*` of `wᵀδ`).
    pub fn support_subgradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            AtomicSet::NormBall { norm, radius } => Ok(norm
                .dual_subgradient(w)?
                .into_iter()
                .map(|g| radius * g)
                .collect()),
            AtomicSet::Ellipsoid(e) => {
                check_dim(e.dim(), w.len())?;
                Ok(e.dual_subgradient(w))
            }
        }
    }

    pub fn contains(&self, delta: &[f64]) -> Result<bool> {
        let (size, budget) = self.measure(delta)?;
        Ok(size <= budget * (1.0 + 1e-12) + 1e-15)
    }

    /// Rescales a nonzero direction onto the boundary of the set.
    fn boundary_point(&self, direction: &[f64]) -> Result<Vec<f64>> {
        let (size, budget) = self.measure(direction)?;
        if size == 0.0 {
            return Ok(vec![0.0; direction.len()]);
        }
        Ok(direction.iter().map(|d| d * budget / size).collect())
    }

    /// `(κ, c)` with `‖w‖₂ ≤ κ·σ(w)/c`, when the budget `c` is positive.
    pub(crate) fn support_l2_factor(&self, n: usize) -> Option<(f64, f64)> {
        match self {
            AtomicSet::NormBall { norm, radius } if *radius > 0.0 => {
                Some((norm.dual_l2_bound_factor(n), *radius))
            }
            AtomicSet::NormBall { .. } => None,
            AtomicSet::Ellipsoid(e) => Some((1.0 / e.min_eigenvalue().sqrt(), 1.0)),
        }
    }
}

/// Anything that can be checked against the atomic-set axioms.
pub trait DisturbanceSet {
    fn contains(&self, delta: &[f64]) -> Result<bool>;
    fn support(&self, w: &[f64]) -> Result<f64>;
}

impl DisturbanceSet for AtomicSet {
    fn contains(&self, delta: &[f64]) -> Result<bool> {
        AtomicSet::contains(self, delta)
    }

    fn support(&self, w: &[f64]) -> Result<f64> {
        AtomicSet::support(self, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicReport {
    pub passed: bool,
    pub contains_origin: bool,
    pub trials: usize,
    pub counterexample: Option<Vec<f64>>,
    pub reason: Option<String>,
}

/// Checks that the origin belongs to the set and that the support function
/// is finite and symmetric along `trials` random directions in `R^dim`.
pub fn validate_atomic<S: DisturbanceSet + ?Sized>(
    set: &S,
    dim: usize,
    trials: usize,
    seed: u64,
) -> AtomicReport {
    let origin = vec![0.0; dim];
    let fail = |reason: String, counterexample: Option<Vec<f64>>, contains_origin| AtomicReport {
        passed: false,
        contains_origin,
        trials,
        counterexample,
        reason: Some(reason),
    };
    match set.contains(&origin) {
        Ok(true) => {}
        Ok(false) => return fail("origin is not in the set".into(), Some(origin), false),
        Err(e) => return fail(e.to_string(), None, false),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let minus: Vec<f64> = w.iter().map(|v| -v).collect();
        let (up, down) = match (set.support(&w), set.support(&minus)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return fail(e.to_string(), Some(w), true),
        };
        if !up.is_finite() || !down.is_finite() {
            return fail("support function is unbounded".into(), Some(w), true);
        }
        if (up - down).abs() > 1e-12 * (1.0 + up.abs().max(down.abs())) {
            return fail(
                format!("asymmetric support: σ(w) = {up}, σ(−w) = {down}"),
                Some(w),
                true,
            );
        }
    }
    AtomicReport {
        passed: true,
        contains_origin: true,
        trials,
        counterexample: None,
        reason: None,
    }
}

/// How per-sample disturbances are coupled across the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// `Σᵢ ‖δᵢ‖ ≤ c`.
    SumBudget,
    /// One sample perturbed within `N₀`, all others untouched.
    SingleShift,
    /// `Σᵢ √(c‖δᵢ‖) ≤ c`.
    SqrtBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SublinearSet {
    pub atomic: AtomicSet,
    pub aggregation: Aggregation,
}

impl SublinearSet {
    pub fn new(atomic: AtomicSet, aggregation: Aggregation) -> Self {
        Self {
            atomic,
            aggregation,
        }
    }

    fn sizes(&self, deltas: &[Vec<f64>]) -> Result<Vec<f64>> {
        deltas
            .iter()
            .map(|d| self.atomic.measure(d).map(|(s, _)| s))
            .collect()
    }

    pub fn contains(&self, deltas: &[Vec<f64>]) -> Result<bool> {
        let c = self.atomic.budget();
        let sizes = self.sizes(deltas)?;
        let slack = 1e-12 * (1.0 + c);
        Ok(match self.aggregation {
            Aggregation::SumBudget => sizes.iter().sum::<f64>() <= c + slack,
            Aggregation::SingleShift => {
                sizes.iter().filter(|s| **s > 0.0).count() <= 1
                    && sizes.iter().all(|s| *s <= c + slack)
            }
            Aggregation::SqrtBudget => {
                sizes.iter().map(|s| (c * s).sqrt()).sum::<f64>() <= c + slack
            }
        })
    }

    /// Membership in `N⁻`: at most one nonzero disturbance, inside `N₀`.
    pub fn in_lower_envelope(&self, deltas: &[Vec<f64>]) -> Result<bool> {
        let c = self.atomic.budget();
        let sizes = self.sizes(deltas)?;
        Ok(sizes.iter().filter(|s| **s > 0.0).count() <= 1
            && sizes.iter().all(|s| *s <= c * (1.0 + 1e-12) + 1e-15))
    }

    /// Membership in `N⁺`: `δᵢ = αᵢδ̂ᵢ` with `α` on the simplex and `δ̂ᵢ ∈ N₀`.
    /// For a norm ball this is exactly `Σ‖δᵢ‖ ≤ c`.
    pub fn in_upper_envelope(&self, deltas: &[Vec<f64>]) -> Result<bool> {
        let c = self.atomic.budget();
        let sizes = self.sizes(deltas)?;
        Ok(sizes.iter().sum::<f64>() <= c * (1.0 + 1e-12) + 1e-15)
    }
}

/// Cartesian product of per-sample atomic sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub per_sample: Vec<AtomicSet>,
}

impl BoxSet {
    pub fn new(per_sample: Vec<AtomicSet>) -> Self {
        Self { per_sample }
    }

    pub fn replicate(atomic: &AtomicSet, m: usize) -> Self {
        Self {
            per_sample: vec![atomic.clone(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.per_sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_sample.is_empty()
    }

    pub fn contains(&self, deltas: &[Vec<f64>]) -> Result<bool> {
        if deltas.len() != self.per_sample.len() {
            return Err(Error::SizeMismatch(format!(
                "{} disturbances for a box over {} samples",
                deltas.len(),
                self.per_sample.len()
            )));
        }
        for (a, d) in self.per_sample.iter().zip(deltas) {
            if !a.contains(d)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn support_function(a: &AtomicSet, w: &[f64]) -> Result<f64> {
    a.support(w)
}

fn hinge_arguments(clf: &LinearClassifier, ds: &Dataset) -> Result<Vec<f64>> {
    check_dim(clf.dim(), ds.dim())?;
    ds.iter().map(|s| clf.hinge_argument(s)).collect()
}

/// Total hinge loss on `ds` after subtracting `deltas[i]` from each sample.
pub fn perturbed_hinge(clf: &LinearClassifier, ds: &Dataset, deltas: &[Vec<f64>]) -> Result<f64> {
    if deltas.len() != ds.len() {
        return Err(Error::SizeMismatch(format!(
            "{} disturbances for {} samples",
            deltas.len(),
            ds.len()
        )));
    }
    let mut total = 0.0;
    for (s, d) in ds.iter().zip(deltas) {
        check_dim(ds.dim(), d.len())?;
        let shifted: Vec<f64> = s.x.iter().zip(d).map(|(x, d)| x - d).collect();
        total += (1.0 - s.y.value() * clf.decision(&shifted)?).max(0.0);
    }
    Ok(total)
}

/// Exact supremum of the total hinge loss over `N⁻`: one sample at a time
/// receives the whole atomic set.
pub fn worst_case_loss_lower(clf: &LinearClassifier, ds: &Dataset, s: &SublinearSet) -> Result<f64> {
    let args = hinge_arguments(clf, ds)?;
    let sigma = s.atomic.support(&clf.w)?;
    let base: f64 = args.iter().map(|a| a.max(0.0)).sum();
    Ok(args
        .iter()
        .map(|a| base - a.max(0.0) + (a + sigma).max(0.0))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// `Σ hinge + σ(w)`.
    pub value: f64,
    /// Some sample is strictly misclassified, so the bound is attained.
    pub is_exact: bool,
}

/// `Σ hinge + σ(w)`, an upper bound on the worst case over `N⁺` that is
/// attained whenever the classifier strictly misclassifies some sample.
pub fn worst_case_loss_upper(
    clf: &LinearClassifier,
    ds: &Dataset,
    s: &SublinearSet,
) -> Result<UpperBound> {
    let args = hinge_arguments(clf, ds)?;
    let sigma = s.atomic.support(&clf.w)?;
    let hinge: f64 = args.iter().map(|a| a.max(0.0)).sum();
    Ok(UpperBound {
        value: hinge + sigma,
        is_exact: args.iter().any(|a| *a > 1.0),
    })
}

/// Disturbance set searched by [`brute_force_worst_case`].
#[derive(Debug, Clone, Copy)]
pub enum WorstCaseSet<'a> {
    Sublinear(&'a SublinearSet),
    Box(&'a BoxSet),
}

/// Cap on grid evaluations performed by [`brute_force_worst_case`].
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

fn fibonacci_sphere(points: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..points)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / points as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * k as f64;
            vec![r * theta.cos(), r * theta.sin(), z]
        })
        .collect()
}

/// Candidate disturbance directions: a covering of the unit sphere, the
/// coordinate axes, the sign vectors (vertices of the cube) and `±w/‖w‖`.
/// Closed under negation.
fn candidate_directions(n: usize, w: &[f64], resolution: usize) -> Result<Vec<Vec<f64>>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    match n {
        1 => dirs.push(vec![1.0]),
        2 => {
            let count = 4 * resolution;
            for k in 0..count {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                dirs.push(vec![t.cos(), t.sin()]);
            }
        }
        3 => dirs.extend(fibonacci_sphere(8 * resolution)),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "brute-force search supports dimensions 1 to 3, got {n}"
            )))
        }
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        dirs.push(e);
    }
    for mask in 0..(1usize << n) {
        dirs.push((0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect());
    }
    let wn = l2(w);
    if wn > 0.0 {
        dirs.push(w.iter().map(|v| v / wn).collect());
    }
    let negated: Vec<Vec<f64>> = dirs.iter().map(|d| d.iter().map(|v| -v).collect()).collect();
    dirs.extend(negated);
    Ok(dirs)
}

/// Largest `yᵢ·wᵀδ` over candidate boundary points `δ` of `atomic`.
fn best_shift(atomic: &AtomicSet, dirs: &[Vec<f64>], w: &[f64], y: f64) -> Result<f64> {
    let mut best = 0.0_f64;
    for d in dirs {
        let p = atomic.boundary_point(d)?;
        best = best.max(y * dot(w, &p));
    }
    Ok(best)
}

/// Maximizes the total hinge loss over a deterministic grid of feasible
/// disturbances: per-sample boundary directions from
/// a sphere covering plus axis, cube-vertex and `±w` directions, and budget
/// allocations `kᵢ/R` on a uniform simplex grid (`Σkᵢ ≤ R`). For a given
/// allocation the samples decouple, so the maximum over the allocation grid
/// is found exactly by dynamic programming over the budget index.
pub fn brute_force_worst_case(
    clf: &LinearClassifier,
    ds: &Dataset,
    set: WorstCaseSet<'_>,
    resolution: usize,
) -> Result<f64> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let args = hinge_arguments(clf, ds)?;
    let m = ds.len();
    let n = ds.dim();
    let dirs = candidate_directions(n, &clf.w, resolution)?;
    let r = resolution;
    let work = m as u128 * ((r as u128 + 1).pow(2) + dirs.len() as u128);
    if work > BRUTE_FORCE_CAP {
        return Err(Error::SearchSpaceTooLarge {
            size: work,
            cap: BRUTE_FORCE_CAP,
        });
    }

    let atomics: Vec<&AtomicSet> = match set {
        WorstCaseSet::Sublinear(s) => vec![&s.atomic; m],
        WorstCaseSet::Box(b) => {
            if b.len() != m {
                return Err(Error::SizeMismatch(format!(
                    "box over {} samples, dataset has {m}",
                    b.len()
                )));
            }
            b.per_sample.iter().collect()
        }
    };
    let shifts = ds
        .iter()
        .zip(&atomics)
        .map(|(s, a)| best_shift(a, &dirs, &clf.w, s.y.value()))
        .collect::<Result<Vec<f64>>>()?;

    // loss of sample i when it receives the fraction f of the full set
    let loss = |i: usize, f: f64| (args[i] + f * shifts[i]).max(0.0);
    let linear_fraction = |k: usize| k as f64 / r as f64;
    let sqrt_fraction = |k: usize| {
        let s = k as f64 / r as f64;
        s * s
    };

    let value = match set {
        WorstCaseSet::Box(_) => (0..m)
            .map(|i| (0..=r).map(|k| loss(i, linear_fraction(k))).fold(0.0, f64::max))
            .sum(),
        WorstCaseSet::Sublinear(s) => match s.aggregation {
            Aggregation::SingleShift => {
                let base: Vec<f64> = (0..m).map(|i| loss(i, 0.0)).collect();
                let total: f64 = base.iter().sum();
                (0..m)
                    .flat_map(|t| (0..=r).map(move |k| (t, k)))
                    .map(|(t, k)| total - base[t] + loss(t, linear_fraction(k)))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Aggregation::SumBudget => allocate(m, r, |i, k| loss(i, linear_fraction(k))),
            // Σ√(c·c·fᵢ) ≤ c  ⟺  Σ√fᵢ ≤ 1, gridded as √fᵢ = kᵢ/R
            Aggregation::SqrtBudget => allocate(m, r, |i, k| loss(i, sqrt_fraction(k))),
        },
    };
    Ok(value)
}

/// `max Σᵢ gain(i, kᵢ)` over integer allocations with `Σkᵢ ≤ budget`.
fn allocate(m: usize, budget: usize, gain: impl Fn(usize, usize) -> f64) -> f64 {
    let mut best = vec![0.0_f64; budget + 1];
    for i in 0..m {
        let table: Vec<f64> = (0..=budget).map(|k| gain(i, k)).collect();
        let mut next = vec![f64::NEG_INFINITY; budget + 1];
        for used in 0..=budget {
            for k in 0..=used {
                next[used] = next[used].max(best[used - k] + table[k]);
            }
        }
        best = next;
    }
    best[budget]
}
