//! Projected subgradient descent for `penalty(w) + Σ max(1 − yᵢ(⟨w,xᵢ⟩+b), 0)`.
//!
//! Steps are normalized subgradients scaled by `η/√t`. The run is split into
//! windows; each window restarts from the incumbent with `η` halved. The incumbent (best
//! objective seen) is returned, so the result never does worse than the
//! starting point `(w, b) = 0` whose objective is `m`. When the penalty is a
//! positive multiple of a norm, `w` is projected onto the Euclidean ball that
//! must contain every point with objective at most `m`.

use serde::{Deserialize, Serialize};

use crate::classifier::{dot, LinearClassifier};
use crate::data::Dataset;
use crate::error::{check_finite, Error, Result};
use crate::norm::{l2, NormSpec};
use crate::reduction::{robustify, BaseRegularizer, RegularizedProblem};
use crate::uncertainty::SublinearSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// `η₀` in the step schedule `η₀/√t`.
    pub initial_step: f64,
    /// Stop once the incumbent improves by less than this over a window.
    pub tolerance: f64,
    /// Also try the average of each window's iterates.
    pub averaging: bool,
    /// Recorded for reproducibility; the full-batch method draws no randomness.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            initial_step: 1.0,
            tolerance: 1e-10,
            averaging: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial step must be positive, got {}",
                self.initial_step
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    pub(crate) fn window(&self) -> usize {
        (self.max_iters / 20).max(1000)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub classifier: LinearClassifier,
    pub objective: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Whether the training set is strictly linearly separable. The robust
    /// and regularized problems coincide only when this is false.
    pub separable: bool,
}

/// A convex objective over `(w, b)` with a closed-form subgradient.
pub trait ConvexObjective {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64], b: f64) -> f64;
    fn subgradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64);
    /// Euclidean radius known to contain `w` at every point whose objective
    /// does not exceed that of the origin.
    fn weight_radius(&self) -> Option<f64>;
}

/// Hinge sum and one of its subgradients (margin exactly 1 takes the zero branch).
pub(crate) fn hinge_with_subgradient(ds: &Dataset, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
    let mut total = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for s in ds {
        let y = s.y.value();
        let arg = 1.0 - y * (dot(w, &s.x) + b);
        if arg > 0.0 {
            total += arg;
            for (g, x) in gw.iter_mut().zip(&s.x) {
                *g -= y * x;
            }
            gb -= y;
        }
    }
    (total, gw, gb)
}

fn hinge_sum(ds: &Dataset, w: &[f64], b: f64) -> f64 {
    ds.iter()
        .map(|s| (1.0 - s.y.value() * (dot(w, &s.x) + b)).max(0.0))
        .sum()
}

/// `c·‖w‖ + Σ hinge`.
#[derive(Debug, Clone, Copy)]
pub struct NormRegularized<'a> {
    pub dataset: &'a Dataset,
    pub norm: &'a NormSpec,
    pub c: f64,
}

impl ConvexObjective for NormRegularized<'_> {
    fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn value(&self, w: &[f64], b: f64) -> f64 {
        self.c * self.norm.value(w).expect("dimension checked") + hinge_sum(self.dataset, w, b)
    }

    fn subgradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let (_, mut gw, gb) = hinge_with_subgradient(self.dataset, w, b);
        if self.c > 0.0 {
            let gn = self.norm.value_subgradient(w).expect("dimension checked");
            for (g, n) in gw.iter_mut().zip(gn) {
                *g += self.c * n;
            }
        }
        (gw, gb)
    }

    fn weight_radius(&self) -> Option<f64> {
        (self.c > 0.0).then(|| {
            self.norm.l2_bound_factor(self.dim()) * self.dataset.len() as f64 / self.c
        })
    }
}

impl ConvexObjective for RegularizedProblem {
    fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn value(&self, w: &[f64], b: f64) -> f64 {
        self.penalty(w).expect("dimension checked") + hinge_sum(&self.dataset, w, b)
    }

    fn subgradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let (_, mut gw, gb) = hinge_with_subgradient(&self.dataset, w, b);
        let gp = self.penalty_subgradient(w).expect("dimension checked");
        for (g, p) in gw.iter_mut().zip(gp) {
            *g += p;
        }
        (gw, gb)
    }

    fn weight_radius(&self) -> Option<f64> {
        let (factor, budget) = self.atomic.support_l2_factor(self.dim())?;
        Some(factor * self.dataset.len() as f64 / budget)
    }
}

fn project(w: &mut [f64], radius: Option<f64>) {
    if let Some(r) = radius {
        let n = l2(w);
        if n > r {
            for v in w.iter_mut() {
                *v *= r / n;
            }
        }
    }
}

pub(crate) struct Minimum {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs the subgradient scheme from the origin. `stop` is consulted after
/// every step with the new iterate and may end the run early.
pub(crate) fn minimize<O: ConvexObjective + ?Sized>(
    obj: &O,
    cfg: &SolverConfig,
    mut stop: impl FnMut(&[f64], f64) -> bool,
) -> Minimum {
    let n = obj.dim();
    let radius = obj.weight_radius();
    let window = cfg.window();

    let mut w = vec![0.0; n];
    let mut b = 0.0;
    let mut best = Minimum {
        w: w.clone(),
        b,
        objective: obj.value(&w, b),
        iterations: 0,
        converged: false,
    };
    let mut checkpoint = best.objective;
    let mut scale = cfg.initial_step;
    let mut local = 0usize;
    let mut avg_w = vec![0.0; n];
    let mut avg_b = 0.0;
    let mut avg_count = 0usize;

    for t in 1..=cfg.max_iters {
        best.iterations = t;
        local += 1;
        let (gw, gb) = obj.subgradient(&w, b);
        let gnorm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if gnorm == 0.0 {
            // zero subgradient: the current point is optimal
            best.converged = true;
            break;
        }
        let step = scale / (local as f64).sqrt() / gnorm;
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= step * gi;
        }
        b -= step * gb;
        project(&mut w, radius);

        let f = obj.value(&w, b);
        if f < best.objective {
            best.objective = f;
            best.w.clone_from(&w);
            best.b = b;
        }
        if stop(&w, b) {
            break;
        }

        if cfg.averaging {
            for (a, wi) in avg_w.iter_mut().zip(&w) {
                *a += wi;
            }
            avg_b += b;
            avg_count += 1;
        }
        if t % window == 0 {
            if cfg.averaging && avg_count > 0 {
                let k = avg_count as f64;
                let mean_w: Vec<f64> = avg_w.iter().map(|a| a / k).collect();
                let mean_b = avg_b / k;
                let f = obj.value(&mean_w, mean_b);
                if f < best.objective {
                    best.objective = f;
                    best.w = mean_w;
                    best.b = mean_b;
                }
                avg_w.iter_mut().for_each(|a| *a = 0.0);
                avg_b = 0.0;
                avg_count = 0;
            }
            // restart from the incumbent with half the step scale
            let gain = checkpoint - best.objective;
            checkpoint = best.objective;
            if gain < cfg.tolerance && scale < cfg.initial_step * 1e-3 {
                best.converged = true;
                break;
            }
            scale *= 0.5;
            local = 0;
            w.clone_from(&best.w);
            b = best.b;
        }
    }
    best
}

fn validate_inputs(ds: &Dataset, c: f64, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularization coefficient must be finite and nonnegative, got {c}"
        )));
    }
    for s in ds {
        check_finite(&s.x, "training data")?;
    }
    Ok(())
}

fn into_result(min: Minimum, separable: bool) -> Result<TrainResult> {
    Ok(TrainResult {
        classifier: LinearClassifier::new(min.w, min.b)?,
        objective: min.objective,
        iterations_used: min.iterations,
        converged: min.converged,
        separable,
    })
}

/// Minimizes `c·‖w‖ + Σ hinge`.
pub fn train_regularized(
    ds: &Dataset,
    norm: &NormSpec,
    c: f64,
    cfg: &SolverConfig,
) -> Result<TrainResult> {
    validate_inputs(ds, c, cfg)?;
    norm.value(&vec![0.0; ds.dim()])?;
    let obj = NormRegularized {
        dataset: ds,
        norm,
        c,
    };
    let min = minimize(&obj, cfg, |_, _| false);
    into_result(min, check_separability(ds))
}

/// Minimizes the objective of an already reduced problem.
pub fn train_problem(p: &RegularizedProblem, cfg: &SolverConfig) -> Result<TrainResult> {
    validate_inputs(&p.dataset, 0.0, cfg)?;
    let min = minimize(p, cfg, |_, _| false);
    into_result(min, check_separability(&p.dataset))
}

/// Minimizes the worst-case hinge loss over `s` through its regularized
/// equivalent. If the data turn out separable the result minimizes an
/// upper bound on the robust objective, which `separable` records.
pub fn train_robust(ds: &Dataset, s: &SublinearSet, cfg: &SolverConfig) -> Result<TrainResult> {
    let p = robustify(ds, s, BaseRegularizer::Zero)?;
    train_problem(&p, cfg)
}

fn strictly_separates(ds: &Dataset, w: &[f64], b: f64) -> bool {
    ds.iter().all(|s| s.y.value() * (dot(w, &s.x) + b) > 0.0)
}

// Some `b` separates the projections iff every negative projects strictly
// below every positive.
fn separated_along(ds: &Dataset, u: &[f64]) -> bool {
    let mut max_neg = f64::NEG_INFINITY;
    let mut min_pos = f64::INFINITY;
    for s in ds {
        let p = dot(u, &s.x);
        if s.y.value() > 0.0 {
            min_pos = min_pos.min(p);
        } else {
            max_neg = max_neg.max(p);
        }
    }
    max_neg < min_pos
}

/// Exact test for `n ≤ 2`: the set of separating directions is open on the
/// circle and bounded by directions orthogonal to pairwise differences, so
/// testing one direction between each pair of consecutive critical angles
/// decides separability.
fn separable_exhaustive(ds: &Dataset) -> bool {
    let pts = ds.samples();
    if ds.dim() == 1 {
        return separated_along(ds, &[1.0]) || separated_along(ds, &[-1.0]);
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut angles = Vec::new();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let dx = pts[i].x[0] - pts[j].x[0];
            let dy = pts[i].x[1] - pts[j].x[1];
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let base = dy.atan2(dx) + std::f64::consts::FRAC_PI_2;
            angles.push(base.rem_euclid(tau));
            angles.push((base + std::f64::consts::PI).rem_euclid(tau));
        }
    }
    if angles.is_empty() {
        return separated_along(ds, &[1.0, 0.0]);
    }
    angles.sort_by(|a, b| a.total_cmp(b));
    angles.dedup();
    (0..angles.len()).any(|k| {
        let lo = angles[k];
        let hi = if k + 1 < angles.len() {
            angles[k + 1]
        } else {
            angles[0] + tau
        };
        let mid = 0.5 * (lo + hi);
        separated_along(ds, &[mid.cos(), mid.sin()])
    })
}

/// Whether some `(w, b)` has `yᵢ(⟨w,xᵢ⟩+b) > 0` for every sample.
pub fn check_separability(ds: &Dataset) -> bool {
    let positives = ds.iter().filter(|s| s.y.value() > 0.0).count();
    if positives == 0 || positives == ds.len() {
        return true;
    }
    if ds.dim() <= 2 && ds.len() <= 20 {
        return separable_exhaustive(ds);
    }
    let norm = NormSpec::L2;
    let obj = NormRegularized {
        dataset: ds,
        norm: &norm,
        c: 0.0,
    };
    let cfg = SolverConfig {
        max_iters: 20_000,
        ..SolverConfig::default()
    };
    let mut found = false;
    let min = minimize(&obj, &cfg, |w, b| {
        found = strictly_separates(ds, w, b);
        found
    });
    found || strictly_separates(ds, &min.w, min.b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub classifier: LinearClassifier,
    pub objective: f64,
}

/// Cap on the number of grid points per level of [`grid_oracle`].
pub const GRID_CAP: u128 = 100_000_000;

fn check_grid(ds: &Dataset, bounds: &[(f64, f64)], resolution: usize) -> Result<()> {
    let n = ds.dim();
    if n > 3 {
        return Err(Error::InvalidParameter(format!(
            "grid oracle supports at most 3 features, got {n}"
        )));
    }
    if bounds.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: bounds.len(),
        });
    }
    if bounds.iter().any(|(lo, hi)| !(*lo <= 0.0 && 0.0 <= *hi)) {
        return Err(Error::InvalidParameter("grid bounds must contain the origin".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    let size = (resolution as u128).pow(n as u32 + 1);
    if size > GRID_CAP {
        return Err(Error::SearchSpaceTooLarge {
            size,
            cap: GRID_CAP,
        });
    }
    Ok(())
}

fn grid_level(
    ds: &Dataset,
    norm: &NormSpec,
    c: f64,
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Result<(Vec<f64>, f64)> {
    let d = bounds.len();
    let axis = |k: usize, i: usize| {
        let (lo, hi) = bounds[k];
        lo + (hi - lo) * i as f64 / (resolution - 1) as f64
    };
    let mut idx = vec![0usize; d];
    let mut best_point = vec![0.0; d];
    let mut best = f64::INFINITY;
    loop {
        let p: Vec<f64> = (0..d).map(|k| axis(k, idx[k])).collect();
        let clf = LinearClassifier {
            w: p[..d - 1].to_vec(),
            b: p[d - 1],
        };
        let f = c * norm.value(&clf.w)? + clf.empirical_hinge(ds)?;
        if f < best {
            best = f;
            best_point = p;
        }
        let mut k = 0;
        loop {
            if k == d {
                return Ok((best_point, best));
            }
            idx[k] += 1;
            if idx[k] < resolution {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Exhaustive minimum of `c·‖w‖ + Σ hinge` over a uniform grid on the box
/// `bounds` (one interval per weight, then one for the offset). Test oracle.
pub fn grid_oracle(
    ds: &Dataset,
    norm: &NormSpec,
    c: f64,
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Result<GridOptimum> {
    grid_oracle_refined(ds, norm, c, bounds, resolution, 0)
}

/// [`grid_oracle`] followed by `levels` zoom passes, each re-gridding a
/// window of ±3 cells around the previous minimizer (clipped to `bounds`).
pub fn grid_oracle_refined(
    ds: &Dataset,
    norm: &NormSpec,
    c: f64,
    bounds: &[(f64, f64)],
    resolution: usize,
    levels: usize,
) -> Result<GridOptimum> {
    check_grid(ds, bounds, resolution)?;
    let mut window = bounds.to_vec();
    let (mut point, mut value) = grid_level(ds, norm, c, &window, resolution)?;
    for _ in 0..levels {
        window = window
            .iter()
            .zip(bounds)
            .zip(&point)
            .map(|(((lo, hi), (blo, bhi)), p)| {
                let cell = (hi - lo) / (resolution - 1) as f64;
                ((p - 3.0 * cell).max(*blo), (p + 3.0 * cell).min(*bhi))
            })
            .collect();
        let (p, v) = grid_level(ds, norm, c, &window, resolution)?;
        if v <= value {
            point = p;
            value = v;
        }
    }
    let d = point.len();
    Ok(GridOptimum {
        classifier: LinearClassifier::new(point[..d - 1].to_vec(), point[d - 1])?,
        objective: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_blobs;

    fn ds(rows: Vec<Vec<f64>>, labels: &[f64]) -> Dataset {
        Dataset::from_rows(rows, labels).unwrap()
    }

    #[test]
    fn separability_examples() {
        assert!(check_separability(&ds(vec![vec![-1.0], vec![1.0]], &[-1.0, 1.0])));
        assert!(!check_separability(&ds(vec![vec![0.0], vec![0.0]], &[1.0, -1.0])));
        let xor = ds(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            &[1.0, 1.0, -1.0, -1.0],
        );
        assert!(!check_separability(&xor));
        assert!(check_separability(&ds(vec![vec![3.0, 1.0]], &[1.0])));
    }

    #[test]
    fn separability_matches_exhaustive_on_random_sets() {
        for seed in 0..40 {
            let data = gaussian_blobs(14, 2, 1.0, 0.8, seed).unwrap();
            let exact = separable_exhaustive(&data);
            // the subgradient route on the same data (lifted to 3-D so the
            // exhaustive branch is skipped)
            let lifted = Dataset::new(
                data.iter()
                    .map(|s| {
                        let mut x = s.x.clone();
                        x.push(0.0);
                        crate::data::LabeledSample::new(x, s.y).unwrap()
                    })
                    .collect(),
            )
            .unwrap();
            if !exact {
                assert!(!check_separability(&lifted), "seed {seed}");
            }
        }
    }

    #[test]
    fn identical_opposite_points_give_objective_two() {
        let d = ds(vec![vec![0.0], vec![0.0]], &[1.0, -1.0]);
        for norm in [NormSpec::L1, NormSpec::L2, NormSpec::Linf] {
            for c in [0.0, 0.5, 3.0] {
                let r = train_regularized(&d, &norm, c, &SolverConfig::default()).unwrap();
                assert!((r.objective - 2.0).abs() < 1e-12);
                assert!(!r.separable);
            }
        }
        let g = grid_oracle(&d, &NormSpec::L2, 1.0, &[(-2.0, 2.0), (-2.0, 2.0)], 101).unwrap();
        assert_eq!(g.objective, 2.0);
    }

    #[test]
    fn separable_unregularized_drives_hinge_to_zero() {
        let d = ds(vec![vec![-1.0], vec![1.0]], &[-1.0, 1.0]);
        let r = train_regularized(&d, &NormSpec::L2, 0.0, &SolverConfig::default()).unwrap();
        assert!(r.objective < 1e-6, "{}", r.objective);
        assert!(r.separable);
    }

    #[test]
    fn robust_and_regularized_share_the_problem() {
        let d = gaussian_blobs(12, 2, 0.6, 1.0, 5).unwrap();
        let cfg = SolverConfig::default();
        let a = train_regularized(&d, &NormSpec::L2, 0.5, &cfg).unwrap();
        let s = SublinearSet::new(
            crate::uncertainty::AtomicSet::norm_ball(NormSpec::L2, 0.5).unwrap(),
            crate::uncertainty::Aggregation::SumBudget,
        );
        let b = train_robust(&d, &s, &cfg).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-9);
    }

    #[test]
    fn rejects_bad_config() {
        let d = ds(vec![vec![0.0]], &[1.0]);
        let bad = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(train_regularized(&d, &NormSpec::L2, 1.0, &bad).is_err());
        assert!(train_regularized(&d, &NormSpec::L2, -1.0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn grid_oracle_guards() {
        let d = ds(vec![vec![0.0]], &[1.0]);
        assert!(grid_oracle(&d, &NormSpec::L2, 1.0, &[(1.0, 2.0), (-1.0, 1.0)], 11).is_err());
        assert!(grid_oracle(&d, &NormSpec::L2, 1.0, &[(-1.0, 2.0)], 11).is_err());
        assert!(matches!(
            grid_oracle(&d, &NormSpec::L2, 1.0, &[(-1.0, 1.0), (-1.0, 1.0)], 20_000),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
    }
}
