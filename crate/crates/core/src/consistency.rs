//! Robustness implies generalization: sample pairing and the bounds built on it.
//!
//! A training sample and a test sample form a pair when they share a label
//! and lie within distance `c`. With `M` disjoint pairs out of `m`, any
//! classifier's test error is at most `γ + c‖w‖ + average training hinge`
//! where `γ = 1 − M/m`.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::LinearClassifier;
use crate::data::{Dataset, Label};
use crate::error::{check_dim, Error, Result};
use crate::kernel::{feature_distance, kernel_eval, train_kernel_regularized, KernelClassifier, KernelSpec};
use crate::norm::l2;
use crate::solver::{train_regularized, SolverConfig};
use crate::synthetic::{derive_seed, rng_from, SampleGenerator};
use crate::NormSpec;

/// Slack for the bound inequalities, which hold exactly given an exact `M`.
pub const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMethod {
    Exact,
    Brick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub m: usize,
    /// Number of disjoint pairs `M`.
    pub matched: usize,
    pub gamma: f64,
    pub method: PairingMethod,
}

impl PairingResult {
    fn new(m: usize, matched: usize, method: PairingMethod) -> Self {
        Self {
            m,
            matched,
            gamma: 1.0 - matched as f64 / m as f64,
            method,
        }
    }
}

/// How distances between samples are measured when pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairingMetric {
    SampleL2,
    /// `‖Φ(x) − Φ(x′)‖_ℋ` under the given kernel.
    Feature(KernelSpec),
}

impl PairingMetric {
    fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        match self {
            PairingMetric::SampleL2 => {
                let d: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
                Ok(l2(&d))
            }
            PairingMetric::Feature(spec) => feature_distance(spec, x, z),
        }
    }
}

fn check_pair_sets(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.len() != test.len() {
        return Err(Error::SizeMismatch(format!(
            "train has {} samples, test has {}",
            train.len(),
            test.len()
        )));
    }
    check_dim(train.dim(), test.dim())
}

fn check_radius(c: f64) -> Result<()> {
    if c >= 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("pairing radius must be finite and nonnegative, got {c}")))
    }
}

/// Maximum bipartite matching (Hopcroft–Karp) where `adj[u]` lists the right
/// vertices adjacent to left vertex `u`.
pub fn maximum_matching(adj: &[Vec<usize>], right: usize) -> usize {
    const FREE: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];
    let mut total = 0;

    loop {
        // BFS layers from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return total;
        }
        // DFS along the layers, iteratively to keep deep graphs off the stack
        let mut next = vec![0usize; left];
        for root in 0..left {
            if match_l[root] != FREE {
                continue;
            }
            let mut path = vec![root];
            while let Some(&u) = path.last() {
                if next[u] == adj[u].len() {
                    dist[u] = usize::MAX;
                    path.pop();
                    continue;
                }
                let v = adj[u][next[u]];
                next[u] += 1;
                let w = match_r[v];
                if w == FREE {
                    // augment along the stack
                    let mut v = v;
                    for &u in path.iter().rev() {
                        let prev = match_l[u];
                        match_l[u] = v;
                        match_r[v] = u;
                        v = prev;
                    }
                    total += 1;
                    break;
                }
                if dist[w] == dist[u] + 1 {
                    path.push(w);
                }
            }
        }
    }
}

/// Largest number of disjoint same-label train/test pairs within distance `c`.
pub fn max_pairings_exact(
    train: &Dataset,
    test: &Dataset,
    c: f64,
    metric: &PairingMetric,
) -> Result<PairingResult> {
    check_pair_sets(train, test)?;
    check_radius(c)?;
    if let PairingMetric::Feature(spec) = metric {
        spec.validate()?;
    }
    let adj = train
        .samples()
        .par_iter()
        .map(|s| {
            let mut row = Vec::new();
            for (j, t) in test.iter().enumerate() {
                if s.y == t.y && metric.distance(&s.x, &t.x)? <= c {
                    row.push(j);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let matched = maximum_matching(&adj, test.len());
    Ok(PairingResult::new(train.len(), matched, PairingMethod::Exact))
}

/// Axis-aligned box containing every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("domain box needs finite lower ≤ upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Tightest box around the samples of both sets.
    pub fn enclosing(a: &Dataset, b: &Dataset) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        let n = a.dim();
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        for s in a.iter().chain(b.iter()) {
            for k in 0..n {
                lower[k] = lower[k].min(s.x[k]);
                upper[k] = upper[k].max(s.x[k]);
            }
        }
        Self::new(lower, upper)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, l), u)| l <= v && v <= u)
    }
}

/// Cell index of `x` in the grid of side `side` anchored at `bx.lower`.
/// Cells are half-open `[α, α + side)`; a sample on the upper face of the
/// box joins the last cell.
fn brick_cell(x: &[f64], bx: &DomainBox, side: f64) -> Vec<i64> {
    x.iter()
        .zip(&bx.lower)
        .zip(&bx.upper)
        .map(|((v, l), u)| {
            let last = (((u - l) / side).ceil() as i64 - 1).max(0);
            (((v - l) / side).floor() as i64).min(last)
        })
        .collect()
}

/// Lower bound on `M` from a partition of the box into cells of side `c/√n`:
/// any two samples in the same cell are within distance `c`.
pub fn brick_pairing_lower_bound(
    train: &Dataset,
    test: &Dataset,
    c: f64,
    domain: &DomainBox,
) -> Result<PairingResult> {
    check_pair_sets(train, test)?;
    check_dim(domain.lower.len(), train.dim())?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("brick radius must be positive, got {c}")));
    }
    let side = c / (train.dim() as f64).sqrt();
    let mut cells: HashMap<(Label, Vec<i64>), (usize, usize)> = HashMap::new();
    for (s, which) in train.iter().map(|s| (s, 0)).chain(test.iter().map(|s| (s, 1))) {
        if !domain.contains(&s.x) {
            return Err(Error::OutsideDomain(format!("sample {:?} lies outside the domain box", s.x)));
        }
        let entry = cells.entry((s.y, brick_cell(&s.x, domain, side))).or_default();
        if which == 0 {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    let matched = cells.values().map(|(a, b)| *a.min(b)).sum();
    Ok(PairingResult::new(train.len(), matched, PairingMethod::Brick))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub test_error: f64,
    pub error_bound: f64,
    pub test_avg_hinge: f64,
    pub hinge_bound: f64,
    /// Bound on the sample norm (or on `‖Φ(x)‖_ℋ` for kernels).
    pub k: f64,
    pub gamma: f64,
    /// `c‖w‖`.
    pub norm_term: f64,
    pub train_avg_hinge: f64,
    pub offset_abs: f64,
}

impl BoundReport {
    pub fn error_bound_holds(&self) -> bool {
        self.test_error <= self.error_bound + BOUND_TOLERANCE
    }

    pub fn hinge_bound_holds(&self) -> bool {
        self.test_avg_hinge <= self.hinge_bound + BOUND_TOLERANCE
    }

    pub fn holds(&self) -> bool {
        self.error_bound_holds() && self.hinge_bound_holds()
    }
}

struct BoundInputs {
    gamma: f64,
    weight_norm: f64,
    c: f64,
    k: f64,
    offset: f64,
    train_avg_hinge: f64,
    test_error: f64,
    test_avg_hinge: f64,
}

fn assemble(inp: BoundInputs) -> BoundReport {
    let norm_term = inp.c * inp.weight_norm;
    BoundReport {
        test_error: inp.test_error,
        error_bound: inp.gamma + norm_term + inp.train_avg_hinge,
        test_avg_hinge: inp.test_avg_hinge,
        hinge_bound: inp.gamma * (1.0 + inp.k * inp.weight_norm + inp.offset.abs())
            + norm_term
            + inp.train_avg_hinge,
        k: inp.k,
        gamma: inp.gamma,
        norm_term,
        train_avg_hinge: inp.train_avg_hinge,
        offset_abs: inp.offset.abs(),
    }
}

fn check_pairing(pairing: &PairingResult, train: &Dataset, test: &Dataset) -> Result<()> {
    check_pair_sets(train, test)?;
    if pairing.m != train.len() || pairing.matched > pairing.m {
        return Err(Error::SizeMismatch(format!(
            "pairing covers {} samples ({} matched), data have {}",
            pairing.m,
            pairing.matched,
            train.len()
        )));
    }
    Ok(())
}

/// Largest Euclidean sample norm over both sets.
pub fn empirical_k(train: &Dataset, test: &Dataset) -> f64 {
    train.max_l2_norm().max(test.max_l2_norm())
}

/// Both finite-sample bounds for a linear classifier, with `test_error`
/// and `test_avg_hinge` measured on `test`.
pub fn generalization_bound(
    clf: &LinearClassifier,
    train: &Dataset,
    test: &Dataset,
    c: f64,
    pairing: &PairingResult,
    k: f64,
) -> Result<BoundReport> {
    check_pairing(pairing, train, test)?;
    check_radius(c)?;
    let needed = empirical_k(train, test);
    if !(k >= needed) {
        return Err(Error::InvalidParameter(format!(
            "K = {k} is below the largest sample norm {needed}"
        )));
    }
    Ok(assemble(BoundInputs {
        gamma: pairing.gamma,
        weight_norm: l2(&clf.w),
        c,
        k,
        offset: clf.b,
        train_avg_hinge: clf.average_hinge(train)?,
        test_error: clf.classification_error(test)?,
        test_avg_hinge: clf.average_hinge(test)?,
    }))
}

/// Largest `max(k(x,x), √k(x,x))` over both sets. The hinge bound needs
/// `K ≥ ‖Φ(x)‖_ℋ = √k(x,x)`, which `max k(x,x)` alone misses when `k(x,x) < 1`.
pub fn empirical_kernel_k(spec: &KernelSpec, train: &Dataset, test: &Dataset) -> Result<f64> {
    let mut k: f64 = 0.0;
    for s in train.iter().chain(test.iter()) {
        let d = kernel_eval(spec, &s.x, &s.x)?;
        k = k.max(d).max(d.max(0.0).sqrt());
    }
    Ok(k)
}

/// [`generalization_bound`] with `‖w‖_ℋ` and a feature-space pairing.
pub fn kernel_generalization_bound(
    kc: &KernelClassifier,
    train: &Dataset,
    test: &Dataset,
    c_feature: f64,
    pairing: &PairingResult,
    k_kernel: f64,
) -> Result<BoundReport> {
    check_pairing(pairing, train, test)?;
    check_radius(c_feature)?;
    let needed = empirical_kernel_k(&kc.spec, train, test)?;
    if !(k_kernel >= needed) {
        return Err(Error::InvalidParameter(format!(
            "K = {k_kernel} is below max(k(x,x), √k(x,x)) = {needed}"
        )));
    }
    Ok(assemble(BoundInputs {
        gamma: pairing.gamma,
        weight_norm: kc.rkhs_norm()?,
        c: c_feature,
        k: k_kernel,
        offset: kc.b,
        train_avg_hinge: kc.average_hinge(train)?,
        test_error: kc.classification_error(test)?,
        test_avg_hinge: kc.average_hinge(test)?,
    }))
}

/// `c(m) = max(scale·m^(−exponent), floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    pub scale: f64,
    pub exponent: f64,
    pub floor: f64,
}

impl PowerSchedule {
    pub fn c(&self, m: usize) -> f64 {
        (self.scale * (m as f64).powf(-self.exponent)).max(self.floor)
    }
}

impl Default for PowerSchedule {
    fn default() -> Self {
        Self {
            scale: 1.0,
            exponent: 0.125,
            floor: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub m: usize,
    pub trial: usize,
    pub c: f64,
    pub matched: usize,
    pub bound: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub m: usize,
    pub c: f64,
    pub median_gamma: f64,
    pub median_error_bound: f64,
    pub median_test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// Sorted by `(m, trial)`.
    pub trials: Vec<TrialRecord>,
    pub summaries: Vec<SizeSummary>,
    pub gamma_nonincreasing: bool,
    pub bounds_hold: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// One trial: independent train and test sets of size `m`, a classifier
/// fitted to `c‖w‖₂ + average hinge`, exact pairing at radius `c`.
pub fn consistency_trial(
    generator: &dyn SampleGenerator,
    m: usize,
    c: f64,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<TrialRecord> {
    let train = generator.draw(m, &mut rng_from(derive_seed(seed, 0)))?;
    let test = generator.draw(m, &mut rng_from(derive_seed(seed, 1)))?;
    // c‖w‖ + (1/m)Σ hinge has the same minimizers as (c·m)‖w‖ + Σ hinge
    let fit = train_regularized(&train, &NormSpec::L2, c * m as f64, cfg)?;
    let pairing = max_pairings_exact(&train, &test, c, &PairingMetric::SampleL2)?;
    let bound = generalization_bound(&fit.classifier, &train, &test, c, &pairing, empirical_k(&train, &test))?;
    Ok(TrialRecord {
        m,
        trial: 0,
        c,
        matched: pairing.matched,
        bound,
    })
}

/// Runs `trials` independent trials at every size and summarizes by median.
pub fn run_consistency_experiment(
    generator: &dyn SampleGenerator,
    sizes: &[usize],
    c_schedule: impl Fn(usize) -> f64 + Sync,
    trials: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<TrendReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::InvalidParameter("sizes must be positive and strictly increasing".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let jobs: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&m| (0..trials).map(move |t| (m, t)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(m, t)| {
            let c = c_schedule(m);
            let mut r = consistency_trial(generator, m, c, cfg, derive_seed(derive_seed(seed, m as u64), t as u64))?;
            r.trial = t;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.m, r.trial));

    let summaries: Vec<SizeSummary> = sizes
        .iter()
        .map(|&m| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.m == m).collect();
            let pick = |f: fn(&TrialRecord) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            SizeSummary {
                m,
                c: c_schedule(m),
                median_gamma: pick(|r| r.bound.gamma),
                median_error_bound: pick(|r| r.bound.error_bound),
                median_test_error: pick(|r| r.bound.test_error),
            }
        })
        .collect();
    let gamma_nonincreasing = summaries
        .windows(2)
        .all(|w| w[1].median_gamma <= w[0].median_gamma);
    let bounds_hold = records.iter().all(|r| r.bound.holds());
    Ok(TrendReport {
        trials: records,
        summaries,
        gamma_nonincreasing,
        bounds_hold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologicalTrial {
    pub trial: usize,
    pub train_avg_hinge: f64,
    pub train_error: f64,
    pub test_error: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologicalReport {
    pub m: usize,
    pub c: f64,
    pub trials: Vec<PathologicalTrial>,
    pub median_test_error: f64,
    pub max_train_avg_hinge: f64,
}

/// Trains with the exact-equality kernel: training samples are fitted, yet
/// off the training set the decision collapses to `sgn(b)`.
pub fn pathological_demo(
    generator: &dyn SampleGenerator,
    m: usize,
    c: f64,
    trials: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<PathologicalReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let train = generator.draw(m, &mut rng_from(derive_seed(s, 0)))?;
            let test = generator.draw(m, &mut rng_from(derive_seed(s, 1)))?;
            let fit = train_kernel_regularized(&train, &KernelSpec::Indicator, c, cfg)?;
            let kc = fit.classifier;
            Ok(PathologicalTrial {
                trial: t,
                train_avg_hinge: kc.average_hinge(&train)?,
                train_error: kc.classification_error(&train)?,
                test_error: kc.classification_error(&test)?,
                offset: kc.b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.trial);
    let median_test_error = median(&rows.iter().map(|r| r.test_error).collect::<Vec<_>>());
    let max_train_avg_hinge = rows.iter().map(|r| r.train_avg_hinge).fold(0.0, f64::max);
    Ok(PathologicalReport {
        m,
        c,
        trials: rows,
        median_test_error,
        max_train_avg_hinge,
    })
}
