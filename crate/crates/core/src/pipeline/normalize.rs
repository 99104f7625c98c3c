//! Z-score feature scaling fitted on training data and frozen into the model.

use crate::mlp::LabeledExample;

use super::PipelineError;

/// Lower bound applied to every fitted standard deviation.
pub const STDDEV_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

impl NormalizationParams {
    /// Builds params from explicit vectors; stddevs must be finite and `>= STDDEV_FLOOR`.
    pub fn new(means: Vec<f64>, stddevs: Vec<f64>) -> Result<Self, PipelineError> {
        if means.len() != stddevs.len() {
            return Err(PipelineError::Config(format!(
                "{} means vs {} stddevs",
                means.len(),
                stddevs.len()
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(PipelineError::Config("non-finite mean".into()));
        }
        if stddevs.iter().any(|s| !(s.is_finite() && *s >= STDDEV_FLOOR)) {
            return Err(PipelineError::Config(format!(
                "stddevs must be finite and >= {STDDEV_FLOOR}"
            )));
        }
        Ok(Self { means, stddevs })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stddevs: vec![1.0; dim],
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64] {
        &self.stddevs
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// `(x − mean) / stddev` componentwise.
    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        assert_eq!(features.len(), self.dim(), "feature dimension mismatch");
        features
            .iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, normalized: &[f64]) -> Vec<f64> {
        assert_eq!(normalized.len(), self.dim(), "feature dimension mismatch");
        normalized
            .iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}

/// Per-component mean and population standard deviation of the example features.
pub fn fit_normalization(examples: &[LabeledExample]) -> Result<NormalizationParams, PipelineError> {
    let Some(first) = examples.first() else {
        return Err(PipelineError::Config("cannot fit normalization on an empty set".into()));
    };
    let dim = first.features.len();
    if examples.iter().any(|e| e.features.len() != dim) {
        return Err(PipelineError::Config("examples differ in feature dimension".into()));
    }
    let n = examples.len() as f64;
    let mut means = vec![0.0; dim];
    for ex in examples {
        for (m, x) in means.iter_mut().zip(&ex.features) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; dim];
    for ex in examples {
        for ((v, x), m) in vars.iter_mut().zip(&ex.features).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    let stddevs = vars.into_iter().map(|v| (v / n).sqrt().max(STDDEV_FLOOR)).collect();
    Ok(NormalizationParams { means, stddevs })
}

/// Normalizes every example's features in place.
pub fn normalize_examples(params: &NormalizationParams, examples: &mut [LabeledExample]) {
    for ex in examples {
        ex.features = params.apply(&ex.features);
    }
}
