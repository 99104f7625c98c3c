//! Feed-forward sigmoid network trained by per-example backpropagation.
//!
//! Loss is halved squared error on a single sigmoid output. Updates are
//! stochastic gradient descent with classical momentum, shuffling example
//! order every epoch from a seeded generator.

mod format;

pub use format::{DetectorModel, FORMAT_VERSION};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected} inputs, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("model parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

fn parse_err(line: usize, reason: impl Into<String>) -> MlpError {
    MlpError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Class assigned to a window: acceptor (0) or donor (1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Acceptor,
    Donor,
}

impl Label {
    /// Donor iff `raw >= 0.5`; ties go to donor.
    pub fn from_raw(raw: f64) -> Self {
        if raw >= 0.5 {
            Label::Donor
        } else {
            Label::Acceptor
        }
    }

    pub fn target(self) -> f64 {
        match self {
            Label::Acceptor => 0.0,
            Label::Donor => 1.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Halved squared error `(output − label)² / 2`.
pub fn loss(output: f64, label: Label) -> f64 {
    let r = output - label.target();
    0.5 * r * r
}

/// Dense network with a sigmoid at every non-input layer.
///
/// `weights[l]` is row-major with `layer_sizes[l + 1]` rows (destination
/// units) and `layer_sizes[l]` columns (source units).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped container used for gradients and momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &Mlp) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// All entries, weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

pub fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<(), MlpError> {
    if layer_sizes.len() < 2 {
        return Err(MlpError::Config(format!(
            "need at least an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(MlpError::Config(format!(
            "layer sizes must be >= 1, got {layer_sizes:?}"
        )));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(MlpError::Config(format!(
            "output layer must have exactly one unit, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Draws every weight and bias uniformly from `[−init_scale, init_scale]`.
    pub fn init(layer_sizes: &[usize], seed: u64, init_scale: f64) -> Result<Self, MlpError> {
        validate_layer_sizes(layer_sizes)?;
        if !(init_scale.is_finite() && init_scale >= 0.0) {
            return Err(MlpError::Config(format!("init_scale {init_scale} must be finite and >= 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || init_scale * (2.0 * rng.random::<f64>() - 1.0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (src, dst) = (pair[0], pair[1]);
            weights.push((0..src * dst).map(|_| draw()).collect());
            biases.push((0..dst).map(|_| draw()).collect());
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Assembles a model from explicit parameters, checking every dimension.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, MlpError> {
        validate_layer_sizes(&layer_sizes)?;
        let n = layer_sizes.len() - 1;
        if weights.len() != n || biases.len() != n {
            return Err(MlpError::Config(format!(
                "expected {n} weight/bias layers, got {}/{}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return Err(MlpError::Config(format!(
                    "layer {l}: expected {}x{} weights and {} biases",
                    pair[1], pair[0], pair[1]
                )));
            }
        }
        if weights.iter().chain(&biases).flatten().any(|v| !v.is_finite()) {
            return Err(MlpError::Config("parameters must be finite".into()));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Architecture string such as `8-5-1`.
    pub fn architecture(&self) -> String {
        self.layer_sizes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Mutable access to the i-th parameter in [`Gradients::flatten`] order.
    pub fn parameter_mut(&mut self, mut i: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if i < w.len() {
                return &mut w[i];
            }
            i -= w.len();
            if i < b.len() {
                return &mut b[i];
            }
            i -= b.len();
        }
        panic!("parameter index out of range");
    }

    fn check_input(&self, features: &[f64]) -> Result<(), MlpError> {
        if features.len() != self.input_dim() {
            return Err(MlpError::Shape {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Propagates `features` and returns every layer's activations, input included.
    /// The network output is `activations.last()[0]`.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<Vec<f64>>, MlpError> {
        self.check_input(features)?;
        let mut acts = Vec::with_capacity(self.layer_sizes.len());
        acts.push(features.to_vec());
        for l in 0..self.weights.len() {
            let next = self.propagate_layer(l, acts.last().unwrap());
            acts.push(next);
        }
        Ok(acts)
    }

    fn propagate_layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let src = self.layer_sizes[l];
        self.weights[l]
            .chunks_exact(src)
            .zip(&self.biases[l])
            .map(|(row, b)| sigmoid(row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b))
            .collect()
    }

    /// Scalar network output in `(0, 1)`.
    pub fn output(&self, features: &[f64]) -> Result<f64, MlpError> {
        Ok(self.forward(features)?.last().unwrap()[0])
    }

    /// Raw output and the thresholded label.
    pub fn classify(&self, features: &[f64]) -> Result<(f64, Label), MlpError> {
        let raw = self.output(features)?;
        Ok((raw, Label::from_raw(raw)))
    }

    /// Exact loss gradient for one example by reverse-mode chain rule.
    pub fn gradients(&self, example: &LabeledExample) -> Result<Gradients, MlpError> {
        let mut grads = Gradients::zeros_like(self);
        self.backprop_into(example, &mut grads)?;
        Ok(grads)
    }

    /// Writes gradients into `grads` (overwrite) and returns the example loss.
    fn backprop_into(&self, example: &LabeledExample, grads: &mut Gradients) -> Result<f64, MlpError> {
        let acts = self.forward(&example.features)?;
        let out = acts.last().unwrap()[0];
        let target = example.label.target();

        // dL/dz for the current layer's units
        let mut delta = vec![(out - target) * out * (1.0 - out)];
        for l in (0..self.weights.len()).rev() {
            let src = self.layer_sizes[l];
            let input = &acts[l];
            for (r, d) in delta.iter().enumerate() {
                grads.biases[l][r] = *d;
                let row = &mut grads.weights[l][r * src..(r + 1) * src];
                for (g, x) in row.iter_mut().zip(input) {
                    *g = d * x;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; src];
                for (r, d) in delta.iter().enumerate() {
                    let row = &self.weights[l][r * src..(r + 1) * src];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= a * (1.0 - a);
                }
                delta = prev;
            }
        }
        Ok(loss(out, example.label))
    }

    /// Mean loss over a set of examples.
    pub fn mean_loss(&self, examples: &[LabeledExample]) -> Result<f64, MlpError> {
        let mut total = 0.0;
        for ex in examples {
            total += loss(self.output(&ex.features)?, ex.label);
        }
        Ok(total / examples.len().max(1) as f64)
    }
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Half-width of the uniform initialization range.
    pub init_scale: f64,
    /// Stop once an epoch's mean loss falls to or below this value.
    pub early_stop: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 500,
            seed: 0,
            init_scale: 0.5,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MlpError::Config(format!(
                "learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(MlpError::Config(format!(
                "momentum {} must be in [0, 1)",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(MlpError::Config("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    /// Mean per-example loss of each completed epoch, measured on the
    /// forward pass that precedes each update.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Trains `model` on `examples`; deterministic for fixed inputs and `config.seed`.
pub fn train(
    mut model: Mlp,
    examples: &[LabeledExample],
    config: &TrainConfig,
) -> Result<TrainOutcome, MlpError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(MlpError::Config("training set is empty".into()));
    }
    for ex in examples {
        model.check_input(&ex.features)?;
    }
    let mut warnings = Vec::new();
    let donors = examples.iter().filter(|e| e.label == Label::Donor).count();
    if donors == 0 || donors == examples.len() {
        warnings.push("training set contains a single class".to_string());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grads = Gradients::zeros_like(&model);
    let mut velocity = Gradients::zeros_like(&model);
    let mut history = Vec::with_capacity(config.epochs);
    let (lr, mu) = (config.learning_rate, config.momentum);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            total += model.backprop_into(&examples[i], &mut grads)?;
            let params = model.weights.iter_mut().chain(model.biases.iter_mut());
            let vels = velocity.weights.iter_mut().chain(velocity.biases.iter_mut());
            let gs = grads.weights.iter().chain(grads.biases.iter());
            for ((p, v), g) in params.zip(vels).zip(gs) {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = mu * *v - lr * g;
                    *p += *v;
                }
            }
        }
        let mean = total / examples.len() as f64;
        history.push(mean);
        if !mean.is_finite() {
            return Err(MlpError::Config("training diverged (non-finite loss)".into()));
        }
        if config.early_stop.is_some_and(|target| mean <= target) {
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(sizes: &[usize]) -> Mlp {
        Mlp::init(sizes, 1, 0.0).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = Mlp::init(&[8, 5, 1], 42, 0.5).unwrap();
        let b = Mlp::init(&[8, 5, 1], 42, 0.5).unwrap();
        assert_eq!(a, b);
        let c = Mlp::init(&[8, 5, 1], 43, 0.5).unwrap();
        assert_ne!(a, c);
        assert!(a.weights.iter().flatten().all(|w| w.abs() <= 0.5));
        assert_eq!(a.parameter_count(), 8 * 5 + 5 + 5 + 1);
    }

    #[test]
    fn init_zero_scale() {
        let m = zero_model(&[8, 5, 1]);
        assert!(m.weights.iter().chain(&m.biases).flatten().all(|&w| w == 0.0));
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(Mlp::init(&[8, 0, 1], 0, 0.5), Err(MlpError::Config(_))));
        assert!(Mlp::init(&[8], 0, 0.5).is_err());
        assert!(Mlp::init(&[8, 5, 2], 0, 0.5).is_err());
    }

    #[test]
    fn forward_identity_cases() {
        let m = zero_model(&[8, 5, 1]);
        assert_eq!(m.output(&[3.0; 8]).unwrap(), 0.5);
        let acts = m.forward(&[1.0; 8]).unwrap();
        assert_eq!(acts.iter().map(Vec::len).collect::<Vec<_>>(), vec![8, 5, 1]);

        let single = Mlp::from_parts(vec![1, 1], vec![vec![1.0]], vec![vec![0.0]]).unwrap();
        assert_eq!(single.output(&[0.0]).unwrap(), 0.5);
        let wb = Mlp::from_parts(vec![1, 1], vec![vec![2.0]], vec![vec![-1.0]]).unwrap();
        assert_eq!(wb.output(&[3.0]).unwrap(), sigmoid(5.0));
    }

    #[test]
    fn forward_shape_error() {
        let m = zero_model(&[8, 5, 1]);
        assert_eq!(
            m.output(&[0.0; 3]),
            Err(MlpError::Shape { expected: 8, got: 3 })
        );
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(0.5, Label::Donor), 0.125);
        assert_eq!(loss(0.5, Label::Acceptor), 0.125);
        assert!(loss(1.0 - 1e-12, Label::Donor) < 1e-20);
    }

    #[test]
    fn zero_point_output_bias_gradient() {
        let m = zero_model(&[8, 5, 1]);
        for label in [Label::Acceptor, Label::Donor] {
            let g = m.gradients(&LabeledExample::new(vec![0.7; 8], label)).unwrap();
            assert_eq!(g.biases[1][0], (0.5 - label.target()) * 0.25);
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradients() {
        // Output exactly 1.0 at saturation matches a donor label.
        let m = Mlp::from_parts(vec![1, 1], vec![vec![0.0]], vec![vec![800.0]]).unwrap();
        assert_eq!(m.output(&[1.0]).unwrap(), 1.0);
        let g = m.gradients(&LabeledExample::new(vec![1.0], Label::Donor)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn classify_threshold() {
        assert_eq!(Label::from_raw(0.5), Label::Donor);
        assert_eq!(Label::from_raw(0.49), Label::Acceptor);
        let m = zero_model(&[8, 5, 1]);
        assert_eq!(m.classify(&[0.0; 8]).unwrap(), (0.5, Label::Donor));
    }

    #[test]
    fn train_validation() {
        let m = zero_model(&[2, 2, 1]);
        let cfg = TrainConfig::default();
        assert!(matches!(train(m.clone(), &[], &cfg), Err(MlpError::Config(_))));
        let ex = vec![LabeledExample::new(vec![0.0, 1.0], Label::Donor)];
        let zero_epochs = TrainConfig { epochs: 0, ..cfg.clone() };
        assert!(train(m.clone(), &ex, &zero_epochs).is_err());
        let one = TrainConfig { epochs: 1, ..cfg.clone() };
        let out = train(m.clone(), &ex, &one).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.warnings.len(), 1);
        let bad = vec![LabeledExample::new(vec![0.0], Label::Donor)];
        assert!(matches!(train(m, &bad, &one), Err(MlpError::Shape { .. })));
    }

    #[test]
    fn early_stop_truncates_history() {
        let m = Mlp::init(&[2, 2, 1], 3, 0.5).unwrap();
        let ex = vec![
            LabeledExample::new(vec![0.0, 0.0], Label::Acceptor),
            LabeledExample::new(vec![1.0, 1.0], Label::Donor),
        ];
        let cfg = TrainConfig { epochs: 5000, early_stop: Some(0.05), learning_rate: 0.5, ..Default::default() };
        let out = train(m, &ex, &cfg).unwrap();
        assert!(out.history.len() < 5000);
        assert!(*out.history.last().unwrap() <= 0.05);
    }

    #[test]
    fn training_is_deterministic() {
        let ex: Vec<_> = (0..20)
            .map(|i| {
                let x = i as f64 / 20.0;
                LabeledExample::new(vec![x, 1.0 - x], if i % 2 == 0 { Label::Donor } else { Label::Acceptor })
            })
            .collect();
        let cfg = TrainConfig { epochs: 30, seed: 9, ..Default::default() };
        let a = train(Mlp::init(&[2, 3, 1], 5, 0.5).unwrap(), &ex, &cfg).unwrap();
        let b = train(Mlp::init(&[2, 3, 1], 5, 0.5).unwrap(), &ex, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }
}
