//! Detection of horizontally transferred DNA from structure-derived window
//! sensors combined by a backpropagation multilayer perceptron.
//!
//! * [`seqio`]: FASTA parsing and window access
//! * [`sensors`]: the eight window sensors and their rolling evaluation
//! * [`mlp`]: the network, its training and the model file
//! * [`pipeline`]: fragment sampling, normalization and classifier training
//! * [`scanner`]: sliding prediction, smoothing and segment calling
//! * [`simgen`]: Markov surrogates and in-silico insertions
//! * [`cli`]: the `hgmt` command line

pub mod cli;
pub mod mlp;
pub mod pipeline;
pub mod scanner;
pub mod sensors;
pub mod seqio;
pub mod simgen;

pub use mlp::{DetectorModel, Label, LabeledExample, Mlp, TrainConfig};
pub use pipeline::{NormalizationParams, SamplingPlan};
pub use scanner::{ScanTrack, Segment, TrackPoint};
pub use sensors::SensorVector;
pub use seqio::{NucleotideSequence, Window, WindowSpec};
