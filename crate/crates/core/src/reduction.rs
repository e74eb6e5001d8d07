//! From robust min-max classification to regularized hinge minimization.
//!
//! For any sublinear aggregated set with atomic set `N₀`, the worst-case total
//! hinge loss at `(w, b)` equals `σ(w) + Σ hinge` whenever some sample is
//! strictly misclassified, where `σ` is the support function of `N₀`. Slack
//! variables are eliminated: at a fixed `(w, b)` the optimal slacks are the
//! hinge values.

use crate::classifier::LinearClassifier;
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::norm::NormSpec;
use crate::uncertainty::{validate_atomic, AtomicSet, BoxSet, SublinearSet};

/// Trials used by [`robustify`] when validating the atomic set.
const VALIDATION_TRIALS: usize = 64;

/// The `r(w, b)` term that the robust problem carries alongside the loss.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BaseRegularizer {
    #[default]
    Zero,
    /// `coefficient · ‖w‖`.
    Norm { norm: NormSpec, coefficient: f64 },
}

impl BaseRegularizer {
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        match self {
            BaseRegularizer::Zero => Ok(0.0),
            BaseRegularizer::Norm { norm, coefficient } => Ok(coefficient * norm.value(w)?),
        }
    }

    pub fn subgradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            BaseRegularizer::Zero => Ok(vec![0.0; w.len()]),
            BaseRegularizer::Norm { norm, coefficient } => Ok(norm
                .value_subgradient(w)?
                .into_iter()
                .map(|g| coefficient * g)
                .collect()),
        }
    }
}

/// `min r(w,b) + σ(w) + Σ max(1 − yᵢ(⟨w,xᵢ⟩+b), 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedProblem {
    pub dataset: Dataset,
    pub atomic: AtomicSet,
    pub base: BaseRegularizer,
}

impl RegularizedProblem {
    /// The combined penalty `r(w) + σ(w)`.
    pub fn penalty(&self, w: &[f64]) -> Result<f64> {
        Ok(self.base.value(w)? + self.atomic.support(w)?)
    }

    pub fn penalty_subgradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.atomic.support_subgradient(w)?;
        if let BaseRegularizer::Norm { .. } = self.base {
            for (gi, ri) in g.iter_mut().zip(self.base.subgradient(w)?) {
                *gi += ri;
            }
        }
        Ok(g)
    }

    pub fn objective(&self, clf: &LinearClassifier) -> Result<f64> {
        check_dim(self.dataset.dim(), clf.dim())?;
        Ok(self.penalty(&clf.w)? + clf.empirical_hinge(&self.dataset)?)
    }
}

/// Rewrites the robust problem over `s` as its regularized equivalent. The
/// aggregation kind does not matter, only the atomic set does.
pub fn robustify(ds: &Dataset, s: &SublinearSet, r: BaseRegularizer) -> Result<RegularizedProblem> {
    let report = validate_atomic(&s.atomic, ds.dim(), VALIDATION_TRIALS, 0);
    if !report.passed {
        return Err(Error::InvalidAtomicSet(
            report.reason.unwrap_or_else(|| "validation failed".into()),
        ));
    }
    if let BaseRegularizer::Norm { coefficient, .. } = &r {
        if !(*coefficient >= 0.0) || !coefficient.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularizer coefficient must be finite and nonnegative, got {coefficient}"
            )));
        }
    }
    Ok(RegularizedProblem {
        dataset: ds.clone(),
        atomic: s.atomic.clone(),
        base: r,
    })
}

pub fn robust_objective(clf: &LinearClassifier, p: &RegularizedProblem) -> Result<f64> {
    p.objective(clf)
}

/// Worst case over a box: every sample absorbs its own full disturbance,
/// `Σᵢ max(1 − yᵢ(⟨w,xᵢ⟩+b) + σᵢ(w), 0)`.
pub fn box_robust_objective(clf: &LinearClassifier, ds: &Dataset, bx: &BoxSet) -> Result<f64> {
    if bx.len() != ds.len() {
        return Err(Error::SizeMismatch(format!(
            "box over {} samples, dataset has {}",
            bx.len(),
            ds.len()
        )));
    }
    let mut total = 0.0;
    for (s, a) in ds.iter().zip(&bx.per_sample) {
        total += (clf.hinge_argument(s)? + a.support(&clf.w)?).max(0.0);
    }
    Ok(total)
}

/// Box objective minus the sublinear-set objective (with `r ≡ 0`).
pub fn conservatism_gap(
    clf: &LinearClassifier,
    ds: &Dataset,
    s: &SublinearSet,
    bx: &BoxSet,
) -> Result<f64> {
    if bx.per_sample.iter().any(|a| a != &s.atomic) {
        return Err(Error::InvalidParameter(
            "box must replicate the sublinear set's atomic set".into(),
        ));
    }
    let problem = robustify(ds, s, BaseRegularizer::Zero)?;
    Ok(box_robust_objective(clf, ds, bx)? - problem.objective(clf)?)
}
