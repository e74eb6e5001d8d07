//! Kernel classifiers in representer form.
//!
//! Feature vectors are never built: every quantity in the feature space `ℋ`
//! goes through kernel evaluations and Gram algebra, so the Gaussian kernel's
//! infinite-dimensional `ℋ` costs nothing extra.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::dot;
use crate::data::{Dataset, Label};
use crate::error::{check_dim, Error, Result};
use crate::solver::SolverConfig;

/// Gram eigenvalues and quadratic forms may dip this far below zero (relative
/// to the largest entry) before being treated as an error.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    Linear,
    /// `⟨x, x′⟩^degree`.
    Polynomial { degree: u32 },
    /// `exp(−γ‖x − x′‖²)`.
    Gaussian { gamma: f64 },
    /// 1 when `x` and `x′` agree bit for bit, else 0.
    Indicator,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Polynomial { degree } if *degree == 0 => Err(Error::InvalidParameter(
                "polynomial degree must be at least 1".into(),
            )),
            KernelSpec::Gaussian { gamma } if !(*gamma > 0.0) || !gamma.is_finite() => Err(
                Error::InvalidParameter(format!("gaussian gamma must be positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Polynomial { degree } => dot(x, z).powi(*degree as i32),
            KernelSpec::Gaussian { gamma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Indicator => {
                let same = x.iter().zip(z).all(|(a, b)| a.to_bits() == b.to_bits());
                if same {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `f` with `k(x, x′) = f(‖x − x′‖₂)`, for kernels of that form.
    pub fn radial_profile(&self) -> Option<impl Fn(f64) -> f64> {
        match self {
            KernelSpec::Gaussian { gamma } => {
                let g = *gamma;
                Some(move |t: f64| (-g * t * t).exp())
            }
            _ => None,
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_dim(x.len(), z.len())?;
    Ok(spec.eval_unchecked(x, z))
}

fn gram_rows(spec: &KernelSpec, rows: &[&[f64]]) -> DMatrix<f64> {
    let m = rows.len();
    let entries: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| spec.eval_unchecked(rows[i], rows[j]))
        .collect();
    DMatrix::from_row_slice(m, m, &entries)
}

/// The Gram matrix `Kᵢⱼ = k(xᵢ, xⱼ)`.
pub fn gram(spec: &KernelSpec, ds: &Dataset) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let rows: Vec<&[f64]> = ds.iter().map(|s| s.x.as_slice()).collect();
    Ok(gram_rows(spec, &rows))
}

pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    k.clone().symmetric_eigen().eigenvalues.min()
}

fn psd_slack(k: &DMatrix<f64>) -> f64 {
    PSD_TOLERANCE * k.amax().max(1.0)
}

/// [`gram`] plus a check that no eigenvalue is meaningfully negative.
pub fn checked_gram(spec: &KernelSpec, ds: &Dataset) -> Result<DMatrix<f64>> {
    let k = gram(spec, ds)?;
    let low = min_eigenvalue(&k);
    if low < -psd_slack(&k) {
        return Err(Error::NotPositiveSemidefinite(low));
    }
    Ok(k)
}

/// `√(αᵀKα)`, with slightly negative quadratic forms clipped to zero.
pub fn rkhs_norm(alphas: &[f64], k: &DMatrix<f64>) -> Result<f64> {
    check_dim(k.nrows(), alphas.len())?;
    let q = quadratic_form(alphas, k);
    if q < -psd_slack(k) {
        return Err(Error::NotPositiveSemidefinite(q));
    }
    Ok(q.max(0.0).sqrt())
}

fn quadratic_form(alphas: &[f64], k: &DMatrix<f64>) -> f64 {
    let m = alphas.len();
    (0..m)
        .map(|i| alphas[i] * (0..m).map(|j| k[(i, j)] * alphas[j]).sum::<f64>())
        .sum()
}

fn mat_vec(k: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let m = v.len();
    (0..m)
        .map(|i| (0..m).map(|j| k[(i, j)] * v[j]).sum())
        .collect()
}

/// `x ↦ sgn(Σ αᵢ k(x, xᵢ) + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelClassifier {
    pub alphas: Vec<f64>,
    pub b: f64,
    pub anchors: Vec<Vec<f64>>,
    pub spec: KernelSpec,
}

impl KernelClassifier {
    pub fn new(alphas: Vec<f64>, b: f64, anchors: Vec<Vec<f64>>, spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        if alphas.len() != anchors.len() {
            return Err(Error::SizeMismatch(format!(
                "{} coefficients for {} anchors",
                alphas.len(),
                anchors.len()
            )));
        }
        if let Some(first) = anchors.first() {
            for a in &anchors {
                check_dim(first.len(), a.len())?;
            }
        }
        Ok(Self {
            alphas,
            b,
            anchors,
            spec,
        })
    }

    /// `⟨w, Φ(x)⟩` without the offset.
    pub fn feature_inner(&self, x: &[f64]) -> Result<f64> {
        if let Some(a) = self.anchors.first() {
            check_dim(a.len(), x.len())?;
        }
        Ok(self
            .alphas
            .iter()
            .zip(&self.anchors)
            .map(|(a, z)| a * self.spec.eval_unchecked(z, x))
            .sum())
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        Ok(self.feature_inner(x)? + self.b)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_decision(self.decision(x)?))
    }

    pub fn rkhs_norm(&self) -> Result<f64> {
        let rows: Vec<&[f64]> = self.anchors.iter().map(Vec::as_slice).collect();
        rkhs_norm(&self.alphas, &gram_rows(&self.spec, &rows))
    }

    pub fn empirical_hinge(&self, ds: &Dataset) -> Result<f64> {
        ds.iter()
            .map(|s| Ok((1.0 - s.y.value() * self.decision(&s.x)?).max(0.0)))
            .sum()
    }

    pub fn average_hinge(&self, ds: &Dataset) -> Result<f64> {
        Ok(self.empirical_hinge(ds)? / ds.len() as f64)
    }

    pub fn classification_error(&self, ds: &Dataset) -> Result<f64> {
        let mut wrong = 0usize;
        for s in ds {
            if self.predict(&s.x)? != s.y {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / ds.len() as f64)
    }

    /// `c‖w‖_ℋ + Σ hinge`.
    pub fn objective(&self, ds: &Dataset, c: f64) -> Result<f64> {
        Ok(c * self.rkhs_norm()? + self.empirical_hinge(ds)?)
    }
}

/// Worst-case hinge total when one sample at a time may move by an
/// `ℋ`-vector of norm at most `c`, evaluated through decision values:
/// the adversary shifts `Φ(xⱼ)` by `−c·yⱼ·w/‖w‖_ℋ`. When some hinge is
/// active this equals [`KernelClassifier::objective`].
pub fn feature_ball_worst_case(kc: &KernelClassifier, ds: &Dataset, c: f64) -> Result<f64> {
    let norm = kc.rkhs_norm()?;
    let mut hinges = Vec::with_capacity(ds.len());
    let mut shifted = Vec::with_capacity(ds.len());
    for s in ds {
        let y = s.y.value();
        let d = kc.decision(&s.x)?;
        hinges.push((1.0 - y * d).max(0.0));
        let moved = if norm > 0.0 { d - c * y * norm } else { d };
        shifted.push((1.0 - y * moved).max(0.0));
    }
    let total: f64 = hinges.iter().sum();
    Ok(hinges
        .iter()
        .zip(&shifted)
        .map(|(h, s)| total - h + s)
        .fold(total, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrainResult {
    pub classifier: KernelClassifier,
    pub objective: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

struct HState {
    alphas: Vec<f64>,
    b: f64,
    /// `Kα`
    f: Vec<f64>,
    /// `αᵀKα`
    q: f64,
}

impl HState {
    fn resync(&mut self, k: &DMatrix<f64>) {
        self.f = mat_vec(k, &self.alphas);
        self.q = dot(&self.alphas, &self.f);
    }

    fn value(&self, y: &[f64], c: f64) -> f64 {
        let hinge: f64 = y
            .iter()
            .zip(&self.f)
            .map(|(y, f)| (1.0 - y * (f + self.b)).max(0.0))
            .sum();
        c * self.q.max(0.0).sqrt() + hinge
    }
}

/// Minimizes `c‖w‖_ℋ + Σ hinge` over `w = Σ αᵢΦ(xᵢ)` and `b`.
///
/// This runs exactly the scheme of [`crate::solver::train_regularized`]
/// with the L2 norm, carried out in `ℋ`: the subgradient
/// `c·w/‖w‖ − Σ_active yᵢΦ(xᵢ)` stays in the span of the training features,
/// so each step only rescales `α` and adds `yᵢ` to the active coordinates.
pub fn train_kernel_regularized(
    ds: &Dataset,
    spec: &KernelSpec,
    c: f64,
    cfg: &SolverConfig,
) -> Result<KernelTrainResult> {
    cfg.validate()?;
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularization coefficient must be finite and nonnegative, got {c}"
        )));
    }
    let k = checked_gram(spec, ds)?;
    let m = ds.len();
    let y: Vec<f64> = ds.iter().map(|s| s.y.value()).collect();
    let radius = (c > 0.0).then(|| m as f64 / c);
    let window = cfg.window();

    let mut st = HState {
        alphas: vec![0.0; m],
        b: 0.0,
        f: vec![0.0; m],
        q: 0.0,
    };
    let mut best_alphas = st.alphas.clone();
    let mut best_b = 0.0;
    let mut best_value = st.value(&y, c);
    let mut iterations = 0;
    let mut converged = false;
    let mut checkpoint = best_value;
    let mut scale = cfg.initial_step;
    let mut local = 0usize;
    let mut avg_alphas = vec![0.0; m];
    let mut avg_b = 0.0;
    let mut avg_count = 0usize;
    let mut v = vec![0.0; m];

    for t in 1..=cfg.max_iters {
        iterations = t;
        local += 1;
        let active: Vec<usize> = (0..m)
            .filter(|&i| 1.0 - y[i] * (st.f[i] + st.b) > 0.0)
            .collect();
        let norm = st.q.max(0.0).sqrt();
        let s = if c > 0.0 && norm > 0.0 { c / norm } else { 0.0 };
        // v = K·(y ⊙ active)
        v.iter_mut().for_each(|x| *x = 0.0);
        for &i in &active {
            for (j, vj) in v.iter_mut().enumerate() {
                *vj += k[(j, i)] * y[i];
            }
        }
        let gb: f64 = -active.iter().map(|&i| y[i]).sum::<f64>();
        let cross = dot(&st.alphas, &v);
        let tail: f64 = active.iter().map(|&i| y[i] * v[i]).sum();
        let gw2 = (s * s * st.q - 2.0 * s * cross + tail).max(0.0);
        let gnorm = (gw2 + gb * gb).sqrt();
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let step = scale / (local as f64).sqrt() / gnorm;
        let shrink = 1.0 - step * s;
        for a in st.alphas.iter_mut() {
            *a *= shrink;
        }
        for &i in &active {
            st.alphas[i] += step * y[i];
        }
        for (fj, vj) in st.f.iter_mut().zip(&v) {
            *fj = shrink * *fj + step * vj;
        }
        st.q = dot(&st.alphas, &st.f);
        st.b -= step * gb;
        if let Some(r) = radius {
            let n = st.q.max(0.0).sqrt();
            if n > r {
                let ratio = r / n;
                st.alphas.iter_mut().for_each(|a| *a *= ratio);
                st.f.iter_mut().for_each(|f| *f *= ratio);
                st.q *= ratio * ratio;
            }
        }

        let value = st.value(&y, c);
        if value < best_value {
            best_value = value;
            best_alphas.clone_from(&st.alphas);
            best_b = st.b;
        }

        if cfg.averaging {
            for (a, x) in avg_alphas.iter_mut().zip(&st.alphas) {
                *a += x;
            }
            avg_b += st.b;
            avg_count += 1;
        }
        if t % window == 0 {
            if cfg.averaging && avg_count > 0 {
                let n = avg_count as f64;
                let mut mean = HState {
                    alphas: avg_alphas.iter().map(|a| a / n).collect(),
                    b: avg_b / n,
                    f: Vec::new(),
                    q: 0.0,
                };
                mean.resync(&k);
                let value = mean.value(&y, c);
                if value < best_value {
                    best_value = value;
                    best_alphas = mean.alphas;
                    best_b = mean.b;
                }
                avg_alphas.iter_mut().for_each(|a| *a = 0.0);
                avg_b = 0.0;
                avg_count = 0;
            }
            let gain = checkpoint - best_value;
            checkpoint = best_value;
            if gain < cfg.tolerance && scale < cfg.initial_step * 1e-3 {
                converged = true;
                break;
            }
            scale *= 0.5;
            local = 0;
            st.alphas.clone_from(&best_alphas);
            st.b = best_b;
            st.resync(&k);
        }
    }

    let mut best = HState {
        alphas: best_alphas,
        b: best_b,
        f: Vec::new(),
        q: 0.0,
    };
    best.resync(&k);
    let objective = best.value(&y, c);
    let anchors = ds.iter().map(|s| s.x.clone()).collect();
    Ok(KernelTrainResult {
        classifier: KernelClassifier::new(best.alphas, best.b, anchors, spec.clone())?,
        objective,
        iterations_used: iterations,
        converged,
    })
}

/// `‖Φ(x) − Φ(x′)‖_ℋ = √max(0, k(x,x) + k(x′,x′) − 2k(x,x′))`.
pub fn feature_distance(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    Ok(squared_feature_distance(spec, x, z)?.max(0.0).sqrt())
}

fn squared_feature_distance(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    Ok(kernel_eval(spec, x, x)? + kernel_eval(spec, z, z)? - 2.0 * kernel_eval(spec, x, z)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub checked: usize,
    /// Indices of probe pairs where the squared feature distance exceeds `f`.
    pub violations: Vec<usize>,
    /// Largest `d²_ℋ − f(‖x − x′‖²)` seen (negative when every pair passes with room).
    pub max_excess: f64,
}

impl SmoothnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `k(x,x) + k(x′,x′) − 2k(x,x′) ≤ f(‖x − x′‖₂²)` on every probe pair.
pub fn verify_smoothness_condition(
    spec: &KernelSpec,
    probe_pairs: &[(Vec<f64>, Vec<f64>)],
    f: impl Fn(f64) -> f64,
    rho: f64,
) -> Result<SmoothnessReport> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let f0 = f(0.0);
    if f0 != 0.0 {
        return Err(Error::InvalidParameter(format!("f(0) must be 0, got {f0}")));
    }
    let mut report = SmoothnessReport {
        checked: 0,
        violations: Vec::new(),
        max_excess: f64::NEG_INFINITY,
    };
    for (idx, (x, z)) in probe_pairs.iter().enumerate() {
        check_dim(x.len(), z.len())?;
        let t: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if t.sqrt() > rho {
            return Err(Error::OutsideDomain(format!(
                "probe pair {idx} is {} apart, beyond rho = {rho}",
                t.sqrt()
            )));
        }
        let excess = squared_feature_distance(spec, x, z)? - f(t);
        report.checked += 1;
        report.max_excess = report.max_excess.max(excess);
        if excess > 1e-12 {
            report.violations.push(idx);
        }
    }
    Ok(report)
}

/// `√(2f(0) − 2f(c))`: the feature-space radius reached by moving a sample
/// by at most `c` under a kernel `k(x, x′) = f(‖x − x′‖)` with `f` decreasing.
pub fn rbf_feature_radius(f: impl Fn(f64) -> f64, c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {c}")));
    }
    let (f0, fc) = (f(0.0), f(c));
    if fc > f0 {
        return Err(Error::InvalidParameter(format!(
            "profile increases: f({c}) = {fc} > f(0) = {f0}"
        )));
    }
    Ok((2.0 * f0 - 2.0 * fc).max(0.0).sqrt())
}

/// Cap on grid points times anchors for [`sample_space_sup`].
pub const SUP_GRID_CAP: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpaceSup {
    /// Largest `⟨w, Φ(x − δ)⟩` over the grid.
    pub value: f64,
    pub argmax: Vec<f64>,
    /// `⟨w, Φ(x)⟩`.
    pub center: f64,
    /// `⟨w, Φ(x)⟩ + ‖w‖_ℋ·√(2f(0) − 2f(c))` for radial kernels.
    pub feature_ball_bound: Option<f64>,
}

/// Grid search of `sup_{‖δ‖₂ ≤ c} ⟨w, Φ(x − δ)⟩` in one or two dimensions.
///
/// In 1D the grid is `2·resolution + 1` evenly spaced points of `[−c, c]`;
/// in 2D it is a polar grid of `resolution + 1` radii and `4·resolution`
/// angles.
pub fn sample_space_sup(
    kc: &KernelClassifier,
    x: &[f64],
    c: f64,
    resolution: usize,
) -> Result<SampleSpaceSup> {
    let n = x.len();
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "sample-space search supports 1 or 2 features, got {n}"
        )));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be finite and nonnegative, got {c}")));
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let points = if n == 1 {
        2 * resolution as u128 + 1
    } else {
        (resolution as u128 + 1) * 4 * resolution as u128
    };
    let size = points * kc.anchors.len().max(1) as u128;
    if size > SUP_GRID_CAP {
        return Err(Error::SearchSpaceTooLarge {
            size,
            cap: SUP_GRID_CAP,
        });
    }
    let deltas: Vec<Vec<f64>> = if n == 1 {
        (0..=2 * resolution)
            .map(|k| vec![c * (k as f64 / resolution as f64 - 1.0)])
            .collect()
    } else {
        let angles = 4 * resolution;
        (0..=resolution)
            .flat_map(|j| {
                let r = c * j as f64 / resolution as f64;
                (0..angles).map(move |a| {
                    let th = std::f64::consts::TAU * a as f64 / angles as f64;
                    vec![r * th.cos(), r * th.sin()]
                })
            })
            .collect()
    };
    let center = kc.feature_inner(x)?;
    let mut value = center;
    let mut argmax = vec![0.0; n];
    for d in deltas {
        let moved: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
        let v = kc.feature_inner(&moved)?;
        if v > value {
            value = v;
            argmax = d;
        }
    }
    let feature_ball_bound = match kc.spec.radial_profile() {
        Some(f) => Some(center + kc.rkhs_norm()? * rbf_feature_radius(f, c)?),
        None => None,
    };
    Ok(SampleSpaceSup {
        value,
        argmax,
        center,
        feature_ball_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::train_regularized;
    use crate::synthetic::gaussian_blobs;
    use crate::NormSpec;
    use proptest::prelude::*;

    fn rbf(gamma: f64) -> KernelSpec {
        KernelSpec::Gaussian { gamma }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(kernel_eval(&rbf(1.0), &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(kernel_eval(&KernelSpec::Indicator, &[1.0], &[1.0 + 1e-15]).unwrap(), 0.0);
        assert_eq!(
            kernel_eval(&KernelSpec::Polynomial { degree: 2 }, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            121.0
        );
        assert!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
        assert!(kernel_eval(&rbf(0.0), &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn gram_examples() {
        let ds = Dataset::from_rows(vec![vec![1.0], vec![2.0]], &[1.0, -1.0]).unwrap();
        let k = gram(&KernelSpec::Linear, &ds).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        let blobs = gaussian_blobs(7, 3, 1.0, 1.0, 5).unwrap();
        assert_eq!(gram(&KernelSpec::Indicator, &blobs).unwrap(), DMatrix::identity(7, 7));
        let k = gram(&rbf(0.7), &blobs).unwrap();
        assert!(k.diagonal().iter().all(|d| *d == 1.0));
    }

    #[test]
    fn linear_kernel_matches_linear_solver() {
        let ds = gaussian_blobs(12, 2, 1.0, 1.0, 3).unwrap();
        let cfg = SolverConfig::default();
        let lin = train_regularized(&ds, &NormSpec::L2, 1.0, &cfg).unwrap();
        let ker = train_kernel_regularized(&ds, &KernelSpec::Linear, 1.0, &cfg).unwrap();
        assert!((lin.objective - ker.objective).abs() < 1e-6);
        for s in &ds {
            let a = lin.classifier.decision(&s.x).unwrap();
            let b = ker.classifier.decision(&s.x).unwrap();
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn separable_features_drive_hinge_to_zero() {
        let ds = gaussian_blobs(10, 2, 6.0, 0.3, 1).unwrap();
        let r = train_kernel_regularized(&ds, &rbf(0.5), 0.0, &SolverConfig::default()).unwrap();
        assert!(r.classifier.empirical_hinge(&ds).unwrap() < 1e-6);
    }

    #[test]
    fn indicator_kernel_memorizes() {
        let ds = gaussian_blobs(20, 2, 0.0, 1.0, 9).unwrap();
        // the construction αᵢ = yᵢ(1 + ε) already has zero hinge
        let alphas: Vec<f64> = ds.iter().map(|s| 1.1 * s.y.value()).collect();
        let anchors = ds.iter().map(|s| s.x.clone()).collect();
        let manual = KernelClassifier::new(alphas, 0.0, anchors, KernelSpec::Indicator).unwrap();
        assert_eq!(manual.empirical_hinge(&ds).unwrap(), 0.0);

        let r = train_kernel_regularized(&ds, &KernelSpec::Indicator, 0.01, &SolverConfig::default())
            .unwrap();
        assert!(r.classifier.empirical_hinge(&ds).unwrap() < 0.1);
        assert!(r.objective <= ds.len() as f64);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = gaussian_blobs(4, 2, 1.0, 1.0, 0).unwrap();
        let cfg = SolverConfig::default();
        assert!(train_kernel_regularized(&ds, &rbf(1.0), -1.0, &cfg).is_err());
        assert!(train_kernel_regularized(&ds, &KernelSpec::Polynomial { degree: 0 }, 1.0, &cfg).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(rkhs_norm(&[1.0, -1.0], &bad).is_err());
    }

    #[test]
    fn feature_distance_examples() {
        assert_eq!(feature_distance(&rbf(1.0), &[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        let d = feature_distance(&rbf(1.0), &[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!((d - (2.0 - 2.0 * (-1.0f64).exp()).sqrt()).abs() < 1e-15);
        let d = feature_distance(&KernelSpec::Indicator, &[0.0], &[1e-300]).unwrap();
        assert_eq!(d, 2f64.sqrt());
    }

    #[test]
    fn smoothness_examples() {
        let g = 0.8;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..50)
            .map(|i| {
                let t = i as f64 / 50.0;
                (vec![t, -t], vec![t * t, 0.3 * t])
            })
            .collect();
        let exact = verify_smoothness_condition(&rbf(g), &pairs, |t| 2.0 - 2.0 * (-g * t).exp(), 2.0)
            .unwrap();
        assert!(exact.passed());
        let linear = verify_smoothness_condition(&rbf(g), &pairs, |t| 2.0 * g * t, 2.0).unwrap();
        assert!(linear.passed());
        let tiny = vec![(vec![0.0, 0.0], vec![1e-9, 0.0])];
        let ind = verify_smoothness_condition(&KernelSpec::Indicator, &tiny, |t| 2.0 * t, 1.0).unwrap();
        assert!(!ind.passed());
        assert!(verify_smoothness_condition(&rbf(g), &pairs, |t| t + 1.0, 2.0).is_err());
        assert!(verify_smoothness_condition(&rbf(g), &pairs, |t| t, 0.1).is_err());
    }

    #[test]
    fn feature_radius_examples() {
        let f = |t: f64| (-t * t).exp();
        assert_eq!(rbf_feature_radius(f, 0.0).unwrap(), 0.0);
        assert_eq!(rbf_feature_radius(f, 100.0).unwrap(), 2f64.sqrt());
        assert!((rbf_feature_radius(f, 1.0).unwrap() - 1.1243).abs() < 1e-4);
        assert!(rbf_feature_radius(|t: f64| t, 1.0).is_err());
    }

    #[test]
    fn sample_space_sup_examples() {
        let spec = rbf(1.0);
        let z = vec![0.0];
        let kc = KernelClassifier::new(vec![1.0], 0.5, vec![z.clone()], spec.clone()).unwrap();
        let at_zero = sample_space_sup(&kc, &[2.0], 0.0, 10).unwrap();
        assert!((at_zero.value - (kc.decision(&[2.0]).unwrap() - 0.5)).abs() < 1e-15);
        // moving x = 2 toward z = 0 by 1 gives k at distance 1
        let moved = sample_space_sup(&kc, &[2.0], 1.0, 100).unwrap();
        assert!((moved.value - (-1.0f64).exp()).abs() < 1e-12);
        assert!(moved.value <= moved.feature_ball_bound.unwrap());

        let own = KernelClassifier::new(vec![1.0], 0.0, vec![vec![0.3, -0.2]], spec).unwrap();
        let r = sample_space_sup(&own, &[0.3, -0.2], 1.0, 60).unwrap();
        assert_eq!(r.value, 1.0);
        let bound = r.feature_ball_bound.unwrap();
        assert!((bound - (1.0 + (2.0 - 2.0 * (-1.0f64).exp()).sqrt())).abs() < 1e-12);
        assert!(r.value < bound - 0.5);
        assert!(sample_space_sup(&own, &[0.0, 0.0, 0.0], 1.0, 10).is_err());
    }

    #[test]
    fn feature_ball_identity() {
        let ds = gaussian_blobs(15, 2, 1.0, 1.0, 2).unwrap();
        let r = train_kernel_regularized(&ds, &rbf(0.5), 0.7, &SolverConfig::default()).unwrap();
        let direct = r.classifier.objective(&ds, 0.7).unwrap();
        let worst = feature_ball_worst_case(&r.classifier, &ds, 0.7).unwrap();
        assert!((direct - worst).abs() < 1e-9);
        assert!((direct - r.objective).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn linear_rkhs_norm_is_euclidean(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..8),
            seed in prop::collection::vec(-2.0f64..2.0, 8),
        ) {
            let labels = vec![1.0; rows.len()];
            let ds = Dataset::from_rows(rows.clone(), &labels).unwrap();
            let alphas = &seed[..rows.len()];
            let k = gram(&KernelSpec::Linear, &ds).unwrap();
            let mut w = [0.0; 3];
            for (a, x) in alphas.iter().zip(&rows) {
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi += a * xi;
                }
            }
            let direct = crate::norm::l2(&w);
            prop_assert!((rkhs_norm(alphas, &k).unwrap() - direct).abs() <= 1e-10 * (1.0 + direct));
        }

        #[test]
        fn gram_is_psd(
            rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..12),
            kind in 0usize..4,
        ) {
            let spec = [KernelSpec::Linear, KernelSpec::Polynomial { degree: 3 }, rbf(0.9), KernelSpec::Indicator][kind].clone();
            let labels = vec![1.0; rows.len()];
            let ds = Dataset::from_rows(rows, &labels).unwrap();
            let k = gram(&spec, &ds).unwrap();
            prop_assert_eq!(k.clone(), k.transpose());
            prop_assert!(min_eigenvalue(&k) >= -PSD_TOLERANCE * k.amax().max(1.0));
        }

        #[test]
        fn rbf_feature_distance_within_lemma_bound(
            x in prop::collection::vec(-2.0f64..2.0, 2),
            d in prop::collection::vec(-0.5f64..0.5, 2),
            gamma in 0.1f64..3.0,
        ) {
            let z: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let t: f64 = d.iter().map(|v| v * v).sum();
            let dist = feature_distance(&rbf(gamma), &x, &z).unwrap();
            prop_assert!(dist <= (2.0 * gamma * t).sqrt() + 1e-12);
        }
    }
}
