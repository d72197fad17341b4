use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cqcim::baselines::{normalize_rows, pca_fit, pca_project, pq_fit, vanilla_truncate};
use cqcim::cimsim::{DeviceProfile, QuantizedCorpus, PRESET_NAMES};
use cqcim::retrieval::{run_grid, Device, GridArtifacts, GridAxes, GridConfig, GridReport, Method, Qrels};
use cqcim::shaping::{FixedQuantizer, NoiseSpec, Precision};
use cqcim::synth::SynthSpec;
use cqcim::training::{resolve_device, train, ShapingModelState, TrainingData};

use crate::config::TrainJob;
use crate::error::CliError;
use crate::io::{self, EmbeddingFile, ModelCheckpoint, PairedViewFile};

type Result<T> = std::result::Result<T, CliError>;

/// Sibling of `checkpoint` holding the per-epoch losses.
pub fn loss_csv_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("loss.csv")
}

/// Trains a model from `job`, writes the checkpoint to `out` and the loss
/// curve next to it.
pub fn cmd_train(job: &TrainJob, out: &Path) -> Result<(ModelCheckpoint, Vec<f64>)> {
    job.validate()?;
    let profile = resolve_device(&job.model.device).map_err(|e| CliError::Usage(e.to_string()))?;
    let noise = NoiseSpec::new(profile, job.train.sigma_g)?;
    let (state, losses) = match (&job.embeddings, &job.views) {
        (Some(path), _) => {
            let x = EmbeddingFile::load(path)?.to_matrix()?;
            let st = ShapingModelState::init(&x, &job.model, noise, job.train.seed)?;
            train(TrainingData::Embeddings(&x), st, &job.train)?
        }
        (None, Some(path)) => {
            let batch = PairedViewFile::load(path)?.to_batch()?;
            let st = ShapingModelState::init(&batch.anchor, &job.model, noise, job.train.seed)?;
            train(TrainingData::Views(&batch), st, &job.train)?
        }
        (None, None) => unreachable!("validated"),
    };
    let ckpt = ModelCheckpoint {
        state,
        seed: job.train.seed,
        config_hash: job.hash(),
    };
    ckpt.save(out)?;
    io::write_file(&loss_csv_path(out), loss_csv(&losses).as_bytes())?;
    Ok((ckpt, losses))
}

pub fn loss_csv(losses: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        writeln!(s, "{},{l}", i + 1).unwrap();
    }
    s
}

/// Compress and quantize `input` with a trained model; no noise.
pub fn cmd_shape(checkpoint: &Path, input: &Path, out: &Path) -> Result<QuantizedCorpus> {
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let x = EmbeddingFile::load(input)?.to_matrix()?;
    if x.cols() != ckpt.state.input_dim() {
        return Err(CliError::Usage(format!(
            "{} holds {}-D embeddings but the model expects {}-D",
            input.display(),
            x.cols(),
            ckpt.state.input_dim()
        )));
    }
    let (codes, _) = ckpt.state.shape(&x)?;
    let corpus = QuantizedCorpus::new(codes, ckpt.state.quantizer.logical_levels())?;
    io::save_corpus(out, &corpus)?;
    Ok(corpus)
}

/// Inputs of `cqcim eval`.
#[derive(Clone, Debug)]
pub struct EvalJob {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    /// `ideal`, a preset, `all`, or a profile JSON path.
    pub devices: Vec<String>,
    pub methods: Vec<Method>,
    pub precisions: Vec<Precision>,
    pub dims: Vec<usize>,
    pub models: Vec<PathBuf>,
    pub codebooks: Vec<PathBuf>,
    pub grid: GridConfig,
}

pub fn parse_devices(specs: &[String]) -> Result<Vec<Device>> {
    let mut out = Vec::new();
    for s in specs {
        match s.as_str() {
            "ideal" => out.push(Device::Ideal),
            "all" => {
                out.push(Device::Ideal);
                out.extend(DeviceProfile::presets().into_iter().map(Device::Cells));
            }
            path if Path::new(path).exists() => out.push(Device::Cells(DeviceProfile::load(Path::new(path))?)),
            name => match DeviceProfile::preset(name) {
                Ok(p) => out.push(Device::Cells(p)),
                Err(_) => {
                    return Err(CliError::Usage(format!(
                        "unknown device '{name}': expected ideal, all, {} or a profile JSON path",
                        PRESET_NAMES.join(", ")
                    )))
                }
            },
        }
    }
    let mut unique: Vec<Device> = Vec::new();
    for d in out {
        if !unique.contains(&d) {
            unique.push(d);
        }
    }
    Ok(unique)
}

fn id_table(f: &EmbeddingFile) -> Option<HashMap<String, usize>> {
    f.ids
        .as_ref()
        .map(|ids| ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
}

/// Runs the comparison grid; PCA baselines are fit on the corpus for every
/// requested dimension.
pub fn cmd_eval(job: &EvalJob) -> Result<GridReport> {
    let devices = parse_devices(&job.devices)?;
    let corpus_file = EmbeddingFile::load(&job.corpus)?;
    let query_file = EmbeddingFile::load(&job.queries)?;
    if corpus_file.dim != query_file.dim {
        return Err(CliError::Usage(format!(
            "corpus is {}-D but queries are {}-D",
            corpus_file.dim, query_file.dim
        )));
    }
    let qrels = Qrels::load(&job.qrels, id_table(&query_file).as_ref(), id_table(&corpus_file).as_ref())?;
    let corpus = corpus_file.to_matrix()?;
    let queries = query_file.to_matrix()?;

    let mut artifacts = GridArtifacts::default();
    if job.methods.contains(&Method::Pca) {
        for &d in &job.dims {
            if d == 0 || d > corpus.cols() {
                return Err(CliError::Usage(format!("--dim {d} is outside 1..={}", corpus.cols())));
            }
            artifacts.pca.push(pca_fit(&corpus, d)?);
        }
    }
    for path in &job.models {
        artifacts.cq.push(ModelCheckpoint::load(path)?.state);
    }
    for path in &job.codebooks {
        let (book, _) = io::codebook_from_bytes(&io::read_file(path)?)?;
        artifacts.pq.push(book);
    }
    let axes = GridAxes {
        methods: job.methods.clone(),
        precisions: job.precisions.clone(),
        dims: job.dims.clone(),
        devices,
    };
    Ok(run_grid(&corpus, &queries, &qrels, &axes, &artifacts, &job.grid)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    Pca,
    Vanilla,
    Pq,
}

/// Inputs of `cqcim baseline`.
#[derive(Clone, Debug)]
pub struct BaselineJob {
    pub kind: BaselineKind,
    pub input: PathBuf,
    pub dim: Option<usize>,
    /// Absent for pca/vanilla: write the reduced float embeddings instead
    /// of a quantized corpus.
    pub precision: Option<Precision>,
    pub subspaces: usize,
    pub centroids: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// What `cmd_baseline` wrote.
#[derive(Clone, Debug, PartialEq)]
pub enum BaselineOutput {
    Embeddings(EmbeddingFile),
    Quantized(QuantizedCorpus),
    Codebook(Vec<u8>),
}

pub fn cmd_baseline(job: &BaselineJob) -> Result<BaselineOutput> {
    let x = EmbeddingFile::load(&job.input)?.to_matrix()?;
    let reduced = match job.kind {
        BaselineKind::Pq => {
            if job.precision.is_some() || job.dim.is_some() {
                return Err(CliError::Usage(
                    "pq takes --subspaces and --centroids, not --dim or --precision".into(),
                ));
            }
            if job.subspaces == 0 || x.cols() % job.subspaces != 0 {
                return Err(CliError::Usage(format!(
                    "--subspaces {} does not divide the {}-D input",
                    job.subspaces,
                    x.cols()
                )));
            }
            if !(1..=256).contains(&job.centroids) || job.centroids > x.rows() {
                return Err(CliError::Usage(format!(
                    "--centroids must be in 1..={}, got {}",
                    x.rows().min(256),
                    job.centroids
                )));
            }
            let book = pq_fit(&x, job.subspaces, job.centroids, job.seed)?;
            let codes = book.encode(&x)?;
            let bytes = io::codebook_to_bytes(&book, Some(&codes));
            io::write_file(&job.out, &bytes)?;
            return Ok(BaselineOutput::Codebook(bytes));
        }
        kind => {
            let d = job.dim.ok_or_else(|| CliError::Usage("--dim is required for pca and vanilla".into()))?;
            if d == 0 || d > x.cols() {
                return Err(CliError::Usage(format!("--dim {d} is outside 1..={}", x.cols())));
            }
            if kind == BaselineKind::Pca {
                if x.rows() < d {
                    return Err(CliError::Usage(format!("PCA to {d}-D needs at least {d} rows, got {}", x.rows())));
                }
                pca_project(&pca_fit(&x, d)?, &x)?
            } else {
                normalize_rows(&vanilla_truncate(&x, d)?)?
            }
        }
    };
    match job.precision {
        None => {
            let f = EmbeddingFile::from_matrix(&reduced, None)?;
            f.save(&job.out)?;
            Ok(BaselineOutput::Embeddings(f))
        }
        Some(p) => {
            let q = FixedQuantizer::calibrated(p, reduced.as_slice())?;
            let (codes, _) = q.quantize(&reduced)?;
            let corpus = QuantizedCorpus::new(codes, q.codebook())?;
            io::save_corpus(&job.out, &corpus)?;
            Ok(BaselineOutput::Quantized(corpus))
        }
    }
}

/// Aligned table of the built-in presets.
pub fn profile_table() -> String {
    let mut out = String::from("preset  device  levels  sigma_v\n");
    for name in PRESET_NAMES {
        let p = DeviceProfile::preset(name).expect("builtin preset");
        let device = p.name.split(['(', ')']).nth(1).unwrap_or("");
        let sig: Vec<String> = p.sigma_v.iter().map(|s| format!("{s:.4}")).collect();
        writeln!(out, "{name:<6}  {device:<6}  {:>6}  {}", p.levels(), sig.join(" ")).unwrap();
    }
    out
}

/// Writes `docs.cqem`, `queries.cqem` and `qrels.tsv` into `dir`.
pub fn cmd_synth(spec: &SynthSpec, dir: &Path) -> Result<()> {
    let c = spec.generate()?;
    std::fs::create_dir_all(dir).map_err(cqcim::Error::from)?;
    EmbeddingFile::from_matrix(&c.docs, None)?.save(&dir.join("docs.cqem"))?;
    EmbeddingFile::from_matrix(&c.queries, None)?.save(&dir.join("queries.cqem"))?;
    io::write_file(&dir.join("qrels.tsv"), c.qrels.to_tsv().as_bytes())?;
    Ok(())
}
