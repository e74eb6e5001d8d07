use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    /// Sign convention used for predictions: ties go to `Positive`.
    pub fn from_decision(value: f64) -> Self {
        if value >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Positive)
        } else if v == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::InvalidLabel(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: Label,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        check_finite(&x, "sample features")?;
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Non-empty ordered collection of samples sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        for s in &samples {
            check_dim(dim, s.dim())?;
            check_finite(&s.x, "sample features")?;
        }
        Ok(Self { samples, dim })
    }

    /// Builds a dataset from feature rows and ±1 labels.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: &[f64]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::SizeMismatch(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let samples = rows
            .into_iter()
            .zip(labels)
            .map(|(x, &y)| LabeledSample::new(x, Label::try_from(y)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    /// Largest Euclidean norm of any feature vector.
    pub fn max_l2_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| crate::norm::l2(&s.x))
            .fold(0.0, f64::max)
    }

    /// Concatenates `copies` copies of this dataset.
    pub fn replicate(&self, copies: usize) -> Result<Self> {
        let samples = (0..copies)
            .flat_map(|_| self.samples.iter().cloned())
            .collect();
        Self::new(samples)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledSample;
    type IntoIter = std::slice::Iter<'a, LabeledSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(Dataset::new(vec![]), Err(Error::EmptyDataset));
        assert!(matches!(
            Dataset::from_rows(vec![vec![1.0], vec![1.0, 2.0]], &[1.0, -1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            Dataset::from_rows(vec![vec![1.0]], &[0.5]),
            Err(Error::InvalidLabel(0.5))
        );
        assert!(matches!(
            Dataset::from_rows(vec![vec![f64::NAN]], &[1.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn tie_predicts_positive() {
        assert_eq!(Label::from_decision(0.0), Label::Positive);
        assert_eq!(Label::from_decision(-0.0), Label::Positive);
        assert_eq!(Label::from_decision(-1e-300), Label::Negative);
    }
}
