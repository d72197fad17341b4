use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cqcim::cimsim::ArraySpec;
use cqcim::retrieval::{FlipMode, GridConfig, Method};
use cqcim::shaping::Precision;
use cqcim::synth::SynthSpec;

use crate::commands::{self, BaselineJob, BaselineKind, BaselineOutput, EvalJob};
use crate::config::{Overrides, TrainJob};
use crate::error::CliError;
use crate::io;

fn precision_parser() -> impl TypedValueParser<Value = Precision> {
    PossibleValuesParser::new(["1bit", "1.58bit", "2bit", "int4"]).map(|s| s.parse::<Precision>().expect("listed value"))
}

#[derive(Debug, Parser)]
#[command(name = "cqcim", version, about = "Shape embeddings for compute-in-memory retrieval and evaluate them")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a shaping model from a JSON config.
    Train(TrainArgs),
    /// Compress and quantize embeddings with a trained model.
    Shape(ShapeArgs),
    /// Evaluate methods across precisions, dimensions and devices.
    Eval(EvalArgs),
    /// Fit and apply a baseline compressor.
    Baseline(BaselineArgs),
    /// Inspect device profiles.
    Profile {
        #[command(subcommand)]
        action: ProfileAction,
    },
    /// Write a seeded clustered corpus with queries and qrels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Training-noise device: a preset or a profile JSON path.
    #[arg(long)]
    pub device: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_parser = precision_parser())]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Checkpoint path; the loss curve goes next to it as `*.loss.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Embedding file to shape.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Exact,
    Vanilla,
    Pca,
    Pq,
    Cq,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Vanilla => Method::Vanilla,
            MethodArg::Pca => Method::Pca,
            MethodArg::Pq => Method::Pq,
            MethodArg::Cq => Method::Cq,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FlipArg {
    PerRun,
    PerQuery,
    Crossbar,
}

impl From<FlipArg> for FlipMode {
    fn from(f: FlipArg) -> Self {
        match f {
            FlipArg::PerRun => FlipMode::PerRun,
            FlipArg::PerQuery => FlipMode::PerQuery,
            FlipArg::Crossbar => FlipMode::Crossbar,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus embedding file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// `query<TAB>doc<TAB>grade` lines.
    #[arg(long)]
    pub qrels: PathBuf,
    /// `ideal`, `D-1`..`D-5`, `all`, or a profile JSON path; repeatable.
    #[arg(long, default_value = "ideal")]
    pub device: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exact,vanilla,pca,cq")]
    pub method: Vec<MethodArg>,
    #[arg(long, value_parser = precision_parser(), value_delimiter = ',', default_value = "2bit")]
    pub precision: Vec<Precision>,
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub dim: Vec<usize>,
    /// Trained checkpoints; repeatable.
    #[arg(long)]
    pub model: Vec<PathBuf>,
    /// PQ codebook files; repeatable.
    #[arg(long)]
    pub pq: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "per-run")]
    pub flips: FlipArg,
    /// Multiplier on every profile's per-level deviation.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// Rows per crossbar tile.
    #[arg(long, default_value_t = ArraySpec::default().rows)]
    pub array_rows: usize,
    /// Quantize queries with the corpus quantizer.
    #[arg(long)]
    pub quantize_queries: bool,
    /// JSON-lines results; the text report always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaselineArg {
    Pca,
    Vanilla,
    Pq,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(value_enum)]
    pub kind: BaselineArg,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Quantize the reduced vectors; without it pca and vanilla write floats.
    #[arg(long, value_parser = precision_parser())]
    pub precision: Option<Precision>,
    #[arg(long, default_value_t = 8)]
    pub subspaces: usize,
    #[arg(long, default_value_t = 256)]
    pub centroids: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ProfileAction {
    /// Print the built-in presets.
    List,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthSpec::default().docs)]
    pub docs: usize,
    #[arg(long, default_value_t = SynthSpec::default().queries)]
    pub queries: usize,
    #[arg(long, default_value_t = SynthSpec::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = SynthSpec::default().clusters)]
    pub clusters: usize,
    #[arg(long, default_value_t = SynthSpec::default().spread)]
    pub spread: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Train(a) => {
            let mut job = TrainJob::load(&a.config)?;
            job.apply(&Overrides {
                seed,
                device: a.device,
                dim: a.dim,
                precision: a.precision,
                epochs: a.epochs,
            })?;
            let (_, losses) = commands::cmd_train(&job, &a.out)?;
            Ok(format!(
                "wrote {} ({} epochs, final loss {})\n",
                a.out.display(),
                losses.len(),
                losses.last().map_or("n/a".into(), |l| format!("{l:.6}"))
            ))
        }
        Command::Shape(a) => {
            let c = commands::cmd_shape(&a.model, &a.input, &a.out)?;
            Ok(format!("wrote {} ({} x {}, {} levels)\n", a.out.display(), c.len(), c.dim(), c.levels()))
        }
        Command::Eval(a) => {
            let job = EvalJob {
                corpus: a.corpus,
                queries: a.queries,
                qrels: a.qrels,
                devices: a.device,
                methods: a.method.into_iter().map(Method::from).collect(),
                precisions: a.precision,
                dims: a.dim,
                models: a.model,
                codebooks: a.pq,
                grid: GridConfig {
                    noise_scale: a.noise_scale,
                    flips: a.flips.into(),
                    array: ArraySpec::new(a.array_rows, ArraySpec::default().cols)
                        .map_err(|e| CliError::Usage(e.to_string()))?,
                    quantize_queries: a.quantize_queries,
                    seed: seed.unwrap_or(0),
                    ..GridConfig::default()
                },
            };
            if !(job.grid.noise_scale.is_finite() && job.grid.noise_scale >= 0.0) {
                return Err(CliError::Usage(format!("--noise-scale must be >= 0, got {}", job.grid.noise_scale)));
            }
            let report = commands::cmd_eval(&job)?;
            if let Some(out) = &a.out {
                io::write_file(out, report.to_jsonl().as_bytes())?;
            }
            Ok(report.to_text())
        }
        Command::Baseline(a) => {
            let job = BaselineJob {
                kind: match a.kind {
                    BaselineArg::Pca => BaselineKind::Pca,
                    BaselineArg::Vanilla => BaselineKind::Vanilla,
                    BaselineArg::Pq => BaselineKind::Pq,
                },
                input: a.input,
                dim: a.dim,
                precision: a.precision,
                subspaces: a.subspaces,
                centroids: a.centroids,
                seed: seed.unwrap_or(0),
                out: a.out,
            };
            let what = match commands::cmd_baseline(&job)? {
                BaselineOutput::Embeddings(f) => format!("{} x {} floats", f.count, f.dim),
                BaselineOutput::Quantized(c) => format!("{} x {}, {} levels", c.len(), c.dim(), c.levels()),
                BaselineOutput::Codebook(b) => format!("codebook, {} bytes", b.len()),
            };
            Ok(format!("wrote {} ({what})\n", job.out.display()))
        }
        Command::Profile { action: ProfileAction::List } => Ok(commands::profile_table()),
        Command::Synth(a) => {
            let spec = SynthSpec {
                docs: a.docs,
                queries: a.queries,
                dim: a.dim,
                clusters: a.clusters,
                spread: a.spread,
                seed: seed.unwrap_or(SynthSpec::default().seed),
            };
            commands::cmd_synth(&spec, &a.out).map_err(|e| match e {
                CliError::Core(cqcim::Error::Parameter(m)) => CliError::Usage(m),
                other => other,
            })?;
            Ok(format!("wrote docs.cqem, queries.cqem and qrels.tsv to {}\n", a.out.display()))
        }
    }
}
