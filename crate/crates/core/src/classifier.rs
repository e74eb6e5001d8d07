use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, LabeledSample};
use crate::error::{check_dim, check_finite, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Affine classifier `x ↦ sgn(⟨w, x⟩ + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearClassifier {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        check_finite(&w, "classifier weights")?;
        check_finite(&[b], "classifier offset")?;
        Ok(Self { w, b })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            w: vec![0.0; dim],
            b: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.w.len(), x.len())?;
        Ok(dot(&self.w, x) + self.b)
    }

    /// Predicted label; a decision value of exactly zero maps to `Positive`.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_decision(self.decision(x)?))
    }

    /// `y·(⟨w, x⟩ + b)`.
    pub fn margin(&self, s: &LabeledSample) -> Result<f64> {
        Ok(s.y.value() * self.decision(&s.x)?)
    }

    /// `1 − y(⟨w, x⟩ + b)`, the argument of the hinge.
    pub fn hinge_argument(&self, s: &LabeledSample) -> Result<f64> {
        Ok(1.0 - self.margin(s)?)
    }

    pub fn hinge_loss(&self, s: &LabeledSample) -> Result<f64> {
        Ok(self.hinge_argument(s)?.max(0.0))
    }

    /// Sum of hinge losses over the dataset.
    pub fn empirical_hinge(&self, ds: &Dataset) -> Result<f64> {
        check_dim(self.w.len(), ds.dim())?;
        ds.iter().map(|s| self.hinge_loss(s)).sum()
    }

    pub fn average_hinge(&self, ds: &Dataset) -> Result<f64> {
        Ok(self.empirical_hinge(ds)? / ds.len() as f64)
    }

    /// Fraction of samples whose predicted label differs from the true one.
    pub fn classification_error(&self, ds: &Dataset) -> Result<f64> {
        check_dim(self.w.len(), ds.dim())?;
        let mut wrong = 0usize;
        for s in ds {
            if self.predict(&s.x)? != s.y {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / ds.len() as f64)
    }

    /// Whether some sample lies strictly on the wrong side, i.e. the data
    /// are not separated by this classifier.
    pub fn violates_some_sample(&self, ds: &Dataset) -> Result<bool> {
        for s in ds {
            if self.margin(s)? < 0.0 {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn predict(clf: &LinearClassifier, x: &[f64]) -> Result<Label> {
    clf.predict(x)
}

pub fn hinge_loss(clf: &LinearClassifier, s: &LabeledSample) -> Result<f64> {
    clf.hinge_loss(s)
}

pub fn empirical_hinge(clf: &LinearClassifier, ds: &Dataset) -> Result<f64> {
    clf.empirical_hinge(ds)
}

pub fn classification_error(clf: &LinearClassifier, ds: &Dataset) -> Result<f64> {
    clf.classification_error(ds)
}
