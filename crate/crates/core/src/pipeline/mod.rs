//! Training stage: sample fragments from both genomes, evaluate sensors,
//! standardize features and fit the network.
//!
//! Donor fragments are labeled 1 and acceptor fragments 0.

mod normalize;

pub use normalize::{fit_normalization, normalize_examples, NormalizationParams, STDDEV_FLOOR};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mlp::{self, DetectorModel, Label, LabeledExample, Mlp, MlpError, TrainConfig};
use crate::sensors::{sensor_vector, SensorError};
use crate::seqio::{NucleotideSequence, SeqError, WindowSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence {id:?} of length {len} is shorter than fragment length {fragment}")]
    SequenceTooShort { id: String, len: usize, fragment: usize },
    #[error("sampling failed on {id:?}: {rejected} draws rejected before finding {wanted} clean fragments")]
    SamplingExhausted {
        id: String,
        rejected: usize,
        wanted: usize,
    },
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// How training fragments are drawn from each genome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub fragments_per_genome: usize,
    pub fragment_length: usize,
    pub seed: u64,
    /// Rejected draws tolerated per genome; `None` means 1000 × fragments.
    pub max_resample_attempts: Option<usize>,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            fragments_per_genome: 10_000,
            fragment_length: 300,
            seed: 0,
            max_resample_attempts: None,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.fragments_per_genome == 0 {
            return Err(PipelineError::Config("fragments_per_genome must be >= 1".into()));
        }
        if self.fragment_length < 2 {
            return Err(PipelineError::Config("fragment_length must be >= 2".into()));
        }
        Ok(())
    }

    pub fn resample_budget(&self) -> usize {
        self.max_resample_attempts
            .unwrap_or(self.fragments_per_genome.saturating_mul(1000))
    }
}

// Independent ChaCha streams under one plan seed.
const STREAM_DEFAULT: u64 = 0;
const STREAM_DONOR: u64 = 1;
const STREAM_ACCEPTOR: u64 = 2;
const STREAM_EVAL_DONOR: u64 = 3;
const STREAM_EVAL_ACCEPTOR: u64 = 4;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draws with replacement over valid starts, redrawing unclean windows.
pub fn sample_fragments(
    seq: &NucleotideSequence,
    plan: &SamplingPlan,
) -> Result<Vec<usize>, PipelineError> {
    sample_with_rng(seq, plan, &mut stream_rng(plan.seed, STREAM_DEFAULT))
}

fn sample_with_rng(
    seq: &NucleotideSequence,
    plan: &SamplingPlan,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, PipelineError> {
    plan.validate()?;
    let len = plan.fragment_length;
    if seq.len() < len {
        return Err(PipelineError::SequenceTooShort {
            id: seq.id().to_string(),
            len: seq.len(),
            fragment: len,
        });
    }
    let invalid = seq.invalid_prefix_counts();
    let max_start = seq.len() - len;
    let budget = plan.resample_budget();
    let mut rejected = 0usize;
    let mut out = Vec::with_capacity(plan.fragments_per_genome);
    while out.len() < plan.fragments_per_genome {
        let start = rng.random_range(0..=max_start);
        if invalid[start + len] == invalid[start] {
            out.push(start);
        } else {
            rejected += 1;
            if rejected > budget {
                return Err(PipelineError::SamplingExhausted {
                    id: seq.id().to_string(),
                    rejected,
                    wanted: plan.fragments_per_genome,
                });
            }
        }
    }
    Ok(out)
}

/// Labeled raw sensor vectors with the positions they came from.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub examples: Vec<LabeledExample>,
    pub donor_id: String,
    pub acceptor_id: String,
    pub plan: SamplingPlan,
    pub donor_starts: Vec<usize>,
    pub acceptor_starts: Vec<usize>,
}

fn features_at(
    seq: &NucleotideSequence,
    starts: &[usize],
    length: usize,
    label: Label,
) -> Result<Vec<LabeledExample>, PipelineError> {
    starts
        .par_iter()
        .map(|&s| {
            let sv = sensor_vector(seq.window_at(s, length)?)?;
            Ok(LabeledExample::new(sv.as_array().to_vec(), label))
        })
        .collect()
}

fn labeled_set(
    donor: &NucleotideSequence,
    acceptor: &NucleotideSequence,
    plan: &SamplingPlan,
    streams: (u64, u64),
) -> Result<TrainingSet, PipelineError> {
    let donor_starts = sample_with_rng(donor, plan, &mut stream_rng(plan.seed, streams.0))?;
    let acceptor_starts = sample_with_rng(acceptor, plan, &mut stream_rng(plan.seed, streams.1))?;
    let mut examples = features_at(donor, &donor_starts, plan.fragment_length, Label::Donor)?;
    examples.extend(features_at(
        acceptor,
        &acceptor_starts,
        plan.fragment_length,
        Label::Acceptor,
    )?);
    Ok(TrainingSet {
        examples,
        donor_id: donor.id().to_string(),
        acceptor_id: acceptor.id().to_string(),
        plan: plan.clone(),
        donor_starts,
        acceptor_starts,
    })
}

/// Samples both genomes and evaluates raw (unnormalized) sensors.
/// Donor examples come first, then acceptor examples, each in draw order.
pub fn build_training_set(
    donor: &NucleotideSequence,
    acceptor: &NucleotideSequence,
    plan: &SamplingPlan,
) -> Result<TrainingSet, PipelineError> {
    labeled_set(donor, acceptor, plan, (STREAM_DONOR, STREAM_ACCEPTOR))
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub architecture: String,
    pub plan: SamplingPlan,
    pub train_config: TrainConfig,
    pub window: WindowSpec,
    pub loss_history: Vec<f64>,
    pub training_examples: usize,
    pub heldout_examples: usize,
    /// Fraction of held-out windows classified correctly.
    pub heldout_accuracy: f64,
    pub warnings: Vec<String>,
}

/// Accuracy of `model` on raw-feature examples.
pub fn accuracy(model: &DetectorModel, examples: &[LabeledExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let correct = examples
        .iter()
        .filter(|ex| {
            let z = model.normalization.apply(&ex.features);
            let (_, label) = model.network.classify(&z).expect("dimension checked");
            label == ex.label
        })
        .count();
    correct as f64 / examples.len() as f64
}

/// Full training stage. Returns a scan-ready model and a report whose
/// held-out accuracy comes from a fresh sample of 10% of the plan size per
/// genome, drawn from separate generator streams.
pub fn train_classifier(
    donor: &NucleotideSequence,
    acceptor: &NucleotideSequence,
    plan: &SamplingPlan,
    layer_sizes: &[usize],
    train_config: &TrainConfig,
    scan_step: usize,
) -> Result<(DetectorModel, TrainingReport), PipelineError> {
    let window = WindowSpec::new(plan.fragment_length, scan_step)?;
    mlp::validate_layer_sizes(layer_sizes)?;
    train_config.validate()?;

    let set = build_training_set(donor, acceptor, plan)?;
    let normalization = fit_normalization(&set.examples)?;
    let mut examples = set.examples;
    normalize_examples(&normalization, &mut examples);

    let init_seed = train_config.seed ^ 0x9E37_79B9_7F4A_7C15;
    let network = Mlp::init(layer_sizes, init_seed, train_config.init_scale)?;
    let outcome = mlp::train(network, &examples, train_config)?;
    let model = DetectorModel::new(outcome.model, normalization, window)?;

    let eval_plan = SamplingPlan {
        fragments_per_genome: (plan.fragments_per_genome / 10).max(1),
        ..plan.clone()
    };
    let heldout = labeled_set(
        donor,
        acceptor,
        &eval_plan,
        (STREAM_EVAL_DONOR, STREAM_EVAL_ACCEPTOR),
    )?;
    let heldout_accuracy = accuracy(&model, &heldout.examples);

    let report = TrainingReport {
        architecture: model.network.architecture(),
        plan: plan.clone(),
        train_config: train_config.clone(),
        window,
        loss_history: outcome.history,
        training_examples: examples.len(),
        heldout_examples: heldout.examples.len(),
        heldout_accuracy,
        warnings: outcome.warnings,
    };
    Ok((model, report))
}
