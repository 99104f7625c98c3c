//! Command-line front end: `train`, `scan`, `simulate`, `sensors`.
//!
//! Parameters resolve as flag > `--config` TOML file > built-in default.
//! Every output file starts with `#` lines giving the tool version, a
//! command line that reproduces it, the full effective configuration and
//! SHA-256 digests of the inputs.

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::mlp::{DetectorModel, TrainConfig};
use crate::pipeline::{train_classifier, SamplingPlan, TrainingReport};
use crate::scanner::{self, call_segments, smooth_track, write_segments_tsv, write_track_tsv};
use crate::sensors::{rolling_scan_par, SENSOR_NAMES};
use crate::seqio::{parse_fasta, write_fasta, NucleotideSequence, WindowSpec};
use crate::simgen::{self, fit_markov, generate, make_experiment};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit code for unreadable or malformed inputs and bad configuration.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for failures after inputs were accepted.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    Config,
    Sampling,
    Training,
    Scan,
    Simulate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Config => "config",
            Stage::Sampling => "sampling",
            Stage::Training => "training",
            Stage::Scan => "scan",
            Stage::Simulate => "simulate",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Usage errors, `--help` and `--version` from the argument parser.
    Usage(clap::Error),
    Failed { stage: Stage, message: String },
}

impl CliError {
    fn new(stage: Stage, message: impl fmt::Display) -> Self {
        CliError::Failed {
            stage,
            message: message.to_string(),
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            CliError::Usage(_) => None,
            CliError::Failed { stage, .. } => Some(*stage),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Failed { stage, .. } => match stage {
                Stage::Input | Stage::Config => EXIT_INPUT,
                _ => EXIT_RUNTIME,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e}"),
            CliError::Failed { stage, message } => write!(f, "error [{stage}]: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hgmt", version, about = "Detect horizontally transferred DNA with structural sensors and an MLP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a donor-vs-acceptor classifier on random fragments.
    Train(TrainArgs),
    /// Slide a trained model along a query sequence and call donor segments.
    Scan(ScanArgs),
    /// Build a chimera by inserting a donor fragment into an acceptor.
    Simulate(SimulateArgs),
    /// Emit raw per-window sensor values.
    Sensors(SensorsArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with default parameters (flags take precedence).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path prefix.
    #[arg(short, long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    donor: PathBuf,
    acceptor: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Fragment / window length in nucleotides [default: 300].
    #[arg(long)]
    window: Option<usize>,
    /// Scan step stored in the model [default: 30].
    #[arg(long)]
    step: Option<usize>,
    /// Hidden layer sizes, comma separated [default: 5].
    #[arg(long)]
    hidden: Option<String>,
    /// Fragments sampled per genome [default: 10000].
    #[arg(long)]
    fragments: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// Donor record id (default: first record).
    #[arg(long)]
    donor_record: Option<String>,
    /// Acceptor record id (default: first record).
    #[arg(long)]
    acceptor_record: Option<String>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    model: PathBuf,
    query: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Override the model's window length.
    #[arg(long)]
    window: Option<usize>,
    /// Override the model's step.
    #[arg(long)]
    step: Option<usize>,
    /// Majority-vote smoothing width, odd [default: 9].
    #[arg(long)]
    smooth_k: Option<usize>,
    /// Minimum donor run length in windows [default: 10].
    #[arg(long)]
    min_seg_windows: Option<usize>,
    /// Query record id (default: first record).
    #[arg(long)]
    record: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    donor: PathBuf,
    acceptor: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Inserted fragment length [default: 30000].
    #[arg(long)]
    insert_length: Option<usize>,
    /// Insertion coordinate in the acceptor [default: acceptor midpoint].
    #[arg(long)]
    insert_pos: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Order of the Markov chains used for surrogate genomes [default: 3].
    #[arg(long)]
    markov_order: Option<usize>,
    /// Replace both inputs by Markov surrogates of this length.
    #[arg(long)]
    surrogate_length: Option<usize>,
    #[arg(long)]
    donor_record: Option<String>,
    #[arg(long)]
    acceptor_record: Option<String>,
}

#[derive(Debug, Args)]
struct SensorsArgs {
    input: PathBuf,
    #[command(flatten)]
    common: Common,
    /// [default: 300]
    #[arg(long)]
    window: Option<usize>,
    /// [default: 30]
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    record: Option<String>,
}

/// Keys accepted in a `--config` file; names match the long flags with `_`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out: Option<String>,
    window: Option<usize>,
    step: Option<usize>,
    hidden: Option<String>,
    fragments: Option<usize>,
    seed: Option<u64>,
    lr: Option<f64>,
    momentum: Option<f64>,
    epochs: Option<usize>,
    init_scale: Option<f64>,
    smooth_k: Option<usize>,
    min_seg_windows: Option<usize>,
    insert_length: Option<usize>,
    insert_pos: Option<usize>,
    markov_order: Option<usize>,
    surrogate_length: Option<usize>,
    record: Option<String>,
    donor_record: Option<String>,
    acceptor_record: Option<String>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(Stage::Config, format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::new(Stage::Config, format!("{}: {e}", path.display())))
}

/// An input file read once, with its digest for the provenance header.
struct Input {
    path: PathBuf,
    digest: String,
    records: Vec<NucleotideSequence>,
}

fn read_input(path: &Path) -> Result<Input> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", path.display())))?;
    let records = parse_fasta(&bytes[..])
        .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", path.display())))?;
    Ok(Input {
        path: path.to_path_buf(),
        digest: hex::encode(Sha256::digest(&bytes)),
        records,
    })
}

fn select<'a>(input: &'a Input, record: Option<&str>) -> Result<&'a NucleotideSequence> {
    match record {
        None => Ok(&input.records[0]),
        Some(id) => input.records.iter().find(|r| r.id() == id).ok_or_else(|| {
            CliError::new(
                Stage::Input,
                format!("record {id:?} not found in {}", input.path.display()),
            )
        }),
    }
}

/// Provenance header shared by every output file.
struct Header {
    lines: Vec<String>,
}

impl Header {
    fn new(command: &str, rerun: &[String], config: &[(&str, String)], inputs: &[(&str, &Input)]) -> Self {
        let mut lines = vec![
            format!("hgmt {VERSION}"),
            format!("command: {command}"),
            format!("rerun: hgmt {}", rerun.join(" ")),
        ];
        let cfg: Vec<String> = config.iter().map(|(k, v)| format!("{k}={v}")).collect();
        lines.push(format!("config: {}", cfg.join(" ")));
        for (role, input) in inputs {
            lines.push(format!(
                "input {role}: {} sha256={}",
                input.path.display(),
                input.digest
            ));
        }
        Self { lines }
    }

    fn write<W: Write>(&self, out: &mut W, prefix: &str) -> std::io::Result<()> {
        for l in &self.lines {
            writeln!(out, "{prefix} {l}")?;
        }
        Ok(())
    }
}

fn create(path: &str) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new(Stage::Output, format!("{path}: {e}")))
}

fn out_err(path: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new(Stage::Output, format!("{path}: {e}"))
}

fn window_spec(length: usize, step: usize) -> Result<WindowSpec> {
    WindowSpec::new(length, step).map_err(|e| CliError::new(Stage::Config, e))
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::new(Stage::Config, format!("bad --hidden value {s:?}")))
        })
        .collect()
}

fn flag_args(pairs: &[(&str, String)]) -> Vec<String> {
    pairs
        .iter()
        .flat_map(|(k, v)| [format!("--{}", k.replace('_', "-")), v.clone()])
        .collect()
}

fn path_arg(p: &Path) -> String {
    p.display().to_string()
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sensors(a) => cmd_sensors(a),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let out = a.common.out.or(file.out).unwrap_or_else(|| "hgmt".into());
    let window = a.window.or(file.window).unwrap_or(WindowSpec::DEFAULT_LENGTH);
    let step = a.step.or(file.step).unwrap_or(WindowSpec::DEFAULT_STEP);
    let hidden = a.hidden.or(file.hidden).unwrap_or_else(|| "5".into());
    let defaults = TrainConfig::default();
    let plan_defaults = SamplingPlan::default();
    let fragments = a.fragments.or(file.fragments).unwrap_or(plan_defaults.fragments_per_genome);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let lr = a.lr.or(file.lr).unwrap_or(defaults.learning_rate);
    let momentum = a.momentum.or(file.momentum).unwrap_or(defaults.momentum);
    let epochs = a.epochs.or(file.epochs).unwrap_or(defaults.epochs);
    let init_scale = a.init_scale.or(file.init_scale).unwrap_or(defaults.init_scale);
    let donor_record = a.donor_record.or(file.donor_record);
    let acceptor_record = a.acceptor_record.or(file.acceptor_record);

    let mut layer_sizes = vec![SENSOR_NAMES.len()];
    layer_sizes.extend(parse_hidden(&hidden)?);
    layer_sizes.push(1);
    window_spec(window, step)?;

    let donor_in = read_input(&a.donor)?;
    let acceptor_in = read_input(&a.acceptor)?;
    let donor = select(&donor_in, donor_record.as_deref())?;
    let acceptor = select(&acceptor_in, acceptor_record.as_deref())?;

    let plan = SamplingPlan {
        fragments_per_genome: fragments,
        fragment_length: window,
        seed,
        max_resample_attempts: None,
    };
    let train_config = TrainConfig {
        learning_rate: lr,
        momentum,
        epochs,
        seed,
        init_scale,
        early_stop: None,
    };
    plan.validate().map_err(|e| CliError::new(Stage::Config, e))?;
    train_config.validate().map_err(|e| CliError::new(Stage::Config, e))?;

    let config = vec![
        ("window", window.to_string()),
        ("step", step.to_string()),
        ("hidden", hidden.clone()),
        ("fragments", fragments.to_string()),
        ("seed", seed.to_string()),
        ("lr", lr.to_string()),
        ("momentum", momentum.to_string()),
        ("epochs", epochs.to_string()),
        ("init_scale", init_scale.to_string()),
        ("donor_record", donor.id().to_string()),
        ("acceptor_record", acceptor.id().to_string()),
    ];
    let mut rerun = vec!["train".to_string(), path_arg(&a.donor), path_arg(&a.acceptor)];
    rerun.extend(flag_args(&config));
    let header = Header::new(
        "train",
        &rerun,
        &config,
        &[("donor", &donor_in), ("acceptor", &acceptor_in)],
    );

    let (model, report) = train_classifier(donor, acceptor, &plan, &layer_sizes, &train_config, step)
        .map_err(|e| {
            let stage = match e {
                crate::pipeline::PipelineError::Mlp(_) => Stage::Training,
                _ => Stage::Sampling,
            };
            CliError::new(stage, e)
        })?;

    let model_path = format!("{out}.model");
    let mut w = create(&model_path)?;
    header.write(&mut w, "#").map_err(out_err(&model_path))?;
    w.write_all(model.serialize().as_bytes()).map_err(out_err(&model_path))?;
    w.flush().map_err(out_err(&model_path))?;

    let loss_path = format!("{out}.loss.tsv");
    let mut w = create(&loss_path)?;
    write_loss_report(&mut w, &header, &report).map_err(out_err(&loss_path))?;

    let summary_path = format!("{out}.summary.txt");
    let mut w = create(&summary_path)?;
    header.write(&mut w, "#").map_err(out_err(&summary_path))?;
    let summary = summary_text(&report, &model);
    w.write_all(summary.as_bytes()).map_err(out_err(&summary_path))?;
    w.flush().map_err(out_err(&summary_path))?;
    eprint!("{summary}");
    Ok(())
}

fn write_loss_report<W: Write>(w: &mut W, header: &Header, report: &TrainingReport) -> std::io::Result<()> {
    header.write(w, "#")?;
    writeln!(w, "# architecture: {}", report.architecture)?;
    writeln!(w, "epoch\tmean_loss")?;
    for (i, l) in report.loss_history.iter().enumerate() {
        writeln!(w, "{}\t{l:.10e}", i + 1)?;
    }
    w.flush()
}

fn summary_text(report: &TrainingReport, model: &DetectorModel) -> String {
    let mut s = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(s, "architecture\t{}", report.architecture);
    let _ = writeln!(s, "model_id\t{}", model.model_id());
    let _ = writeln!(s, "window_length\t{}", report.window.length());
    let _ = writeln!(s, "window_step\t{}", report.window.step());
    let _ = writeln!(s, "fragments_per_genome\t{}", report.plan.fragments_per_genome);
    let _ = writeln!(s, "training_examples\t{}", report.training_examples);
    let _ = writeln!(s, "epochs_run\t{}", report.loss_history.len());
    let _ = writeln!(s, "final_mean_loss\t{:.6e}", report.loss_history.last().copied().unwrap_or(f64::NAN));
    let _ = writeln!(s, "heldout_examples\t{}", report.heldout_examples);
    let _ = writeln!(s, "heldout_accuracy\t{:.6}", report.heldout_accuracy);
    for w in &report.warnings {
        let _ = writeln!(s, "warning\t{w}");
    }
    s
}

fn cmd_scan(a: ScanArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let out = a.common.out.or(file.out).unwrap_or_else(|| "hgmt".into());
    let smooth_k = a.smooth_k.or(file.smooth_k).unwrap_or(scanner::DEFAULT_SMOOTH_K);
    let min_seg = a
        .min_seg_windows
        .or(file.min_seg_windows)
        .unwrap_or(scanner::DEFAULT_MIN_SEGMENT_WINDOWS);
    let record = a.record.or(file.record);

    let model_bytes = fs::read(&a.model)
        .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", a.model.display())))?;
    let model_text = String::from_utf8(model_bytes.clone())
        .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", a.model.display())))?;
    let model = DetectorModel::deserialize(&model_text)
        .map_err(|e| CliError::new(Stage::Input, format!("{}: {e}", a.model.display())))?;
    let model_in = Input {
        path: a.model.clone(),
        digest: hex::encode(Sha256::digest(&model_bytes)),
        records: Vec::new(),
    };
    let window = a.window.or(file.window).unwrap_or(model.window.length());
    let step = a.step.or(file.step).unwrap_or(model.window.step());
    let spec = window_spec(window, step)?;
    if smooth_k % 2 == 0 {
        return Err(CliError::new(Stage::Config, format!("--smooth-k must be odd, got {smooth_k}")));
    }

    let query_in = read_input(&a.query)?;
    let query = select(&query_in, record.as_deref())?;

    let config = vec![
        ("window", window.to_string()),
        ("step", step.to_string()),
        ("smooth_k", smooth_k.to_string()),
        ("min_seg_windows", min_seg.to_string()),
        ("record", query.id().to_string()),
    ];
    let mut rerun = vec!["scan".to_string(), path_arg(&a.model), path_arg(&a.query)];
    rerun.extend(flag_args(&config));
    let mut header = Header::new("scan", &rerun, &config, &[("model", &model_in), ("query", &query_in)]);
    header.lines.push(format!("model_id: {}", model.model_id()));

    let track = scanner::scan_with_spec(query, &model, spec)
        .map_err(|e| CliError::new(Stage::Scan, e))?;
    let smoothed = smooth_track(&track, smooth_k).map_err(|e| CliError::new(Stage::Config, e))?;
    let segments = call_segments(&smoothed, min_seg);

    let track_path = format!("{out}.track.tsv");
    let mut w = create(&track_path)?;
    header.write(&mut w, "#").map_err(out_err(&track_path))?;
    write_track_tsv(&mut w, &track).map_err(out_err(&track_path))?;
    w.flush().map_err(out_err(&track_path))?;

    let seg_path = format!("{out}.segments.tsv");
    let mut w = create(&seg_path)?;
    header.write(&mut w, "#").map_err(out_err(&seg_path))?;
    write_segments_tsv(&mut w, &segments).map_err(out_err(&seg_path))?;
    w.flush().map_err(out_err(&seg_path))?;

    let donor_windows = track
        .points
        .iter()
        .filter(|p| p.label() == Some(crate::mlp::Label::Donor))
        .count();
    eprintln!(
        "windows\t{}\ndonor_windows\t{donor_windows}\nsegments\t{}",
        track.points.len(),
        segments.len()
    );
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let out = a.common.out.or(file.out).unwrap_or_else(|| "hgmt".into());
    let insert_length = a.insert_length.or(file.insert_length).unwrap_or(30_000);
    let insert_pos = a.insert_pos.or(file.insert_pos);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let markov_order = a.markov_order.or(file.markov_order).unwrap_or(simgen::DEFAULT_MARKOV_ORDER);
    let surrogate_length = a.surrogate_length.or(file.surrogate_length);
    let donor_record = a.donor_record.or(file.donor_record);
    let acceptor_record = a.acceptor_record.or(file.acceptor_record);

    let donor_in = read_input(&a.donor)?;
    let acceptor_in = read_input(&a.acceptor)?;
    let donor = select(&donor_in, donor_record.as_deref())?;
    let acceptor = select(&acceptor_in, acceptor_record.as_deref())?;

    let sim_err = |e: simgen::SimError| CliError::new(Stage::Simulate, e);
    let (donor, acceptor) = match surrogate_length {
        Some(len) => {
            let dm = fit_markov(donor, markov_order).map_err(sim_err)?;
            let am = fit_markov(acceptor, markov_order).map_err(sim_err)?;
            (
                generate(&dm, len, seed.wrapping_mul(2).wrapping_add(1), donor.id()),
                generate(&am, len, seed.wrapping_mul(2).wrapping_add(2), acceptor.id()),
            )
        }
        None => (donor.clone(), acceptor.clone()),
    };
    let position = insert_pos.unwrap_or(acceptor.len() / 2);
    let bundle = make_experiment(&donor, &acceptor, insert_length, Some(position), seed).map_err(sim_err)?;

    let mut config = vec![
        ("insert_length", insert_length.to_string()),
        ("insert_pos", position.to_string()),
        ("seed", seed.to_string()),
        ("markov_order", markov_order.to_string()),
    ];
    if let Some(len) = surrogate_length {
        config.push(("surrogate_length", len.to_string()));
    }
    config.push(("donor_record", donor.id().to_string()));
    config.push(("acceptor_record", acceptor.id().to_string()));
    let mut rerun = vec!["simulate".to_string(), path_arg(&a.donor), path_arg(&a.acceptor)];
    rerun.extend(flag_args(&config));
    let mut header = Header::new(
        "simulate",
        &rerun,
        &config,
        &[("donor", &donor_in), ("acceptor", &acceptor_in)],
    );
    header.lines.push(format!("donor_fragment_start: {}", bundle.donor_start));

    let fasta_path = format!("{out}.chimera.fasta");
    let mut w = create(&fasta_path)?;
    header.write(&mut w, ";").map_err(out_err(&fasta_path))?;
    write_fasta(&mut w, &bundle.chimera, 80).map_err(out_err(&fasta_path))?;
    w.flush().map_err(out_err(&fasta_path))?;

    let truth_path = format!("{out}.truth.tsv");
    let mut w = create(&truth_path)?;
    header.write(&mut w, "#").map_err(out_err(&truth_path))?;
    bundle.truth.write_tsv(&mut w).map_err(out_err(&truth_path))?;
    w.flush().map_err(out_err(&truth_path))?;
    Ok(())
}

fn cmd_sensors(a: SensorsArgs) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let out = a.common.out.or(file.out).unwrap_or_else(|| "hgmt".into());
    let window = a.window.or(file.window).unwrap_or(WindowSpec::DEFAULT_LENGTH);
    let step = a.step.or(file.step).unwrap_or(WindowSpec::DEFAULT_STEP);
    let record = a.record.or(file.record);
    let spec = window_spec(window, step)?;

    let input = read_input(&a.input)?;
    let seq = select(&input, record.as_deref())?;
    let config = vec![
        ("window", window.to_string()),
        ("step", step.to_string()),
        ("record", seq.id().to_string()),
    ];
    let mut rerun = vec!["sensors".to_string(), path_arg(&a.input)];
    rerun.extend(flag_args(&config));
    let header = Header::new("sensors", &rerun, &config, &[("input", &input)]);

    let records = rolling_scan_par(seq, spec).map_err(|e| CliError::new(Stage::Scan, e))?;
    let path = format!("{out}.sensors.tsv");
    let mut w = create(&path)?;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        header.write(w, "#")?;
        writeln!(w, "start\t{}", SENSOR_NAMES.join("\t"))?;
        for r in &records {
            write!(w, "{}", r.start)?;
            match r.sensors {
                Some(sv) => {
                    for v in sv.as_array() {
                        write!(w, "\t{v}")?;
                    }
                }
                None => {
                    for _ in 0..SENSOR_NAMES.len() {
                        write!(w, "\tNA")?;
                    }
                }
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write(&mut w).map_err(out_err(&path))
}
