use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{normalize_rows, pca_project, vanilla_truncate, PcaModel, PqCodebook};
use crate::cimsim::{apply_flips, ArraySpec, Crossbar, DeviceProfile, QuantizedCorpus, TransitionMatrix};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};
use crate::retrieval::{exact_mips, ndcg_at_k, rank_scores, recall_at_k, Qrels, RunResult};
use crate::shaping::{FixedQuantizer, Precision, Quantizer};
use crate::training::ShapingModelState;

/// Row of the comparison grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Full-precision, full-dimension inner products.
    Exact,
    /// First `d` coordinates, renormalized, uniform quantizer.
    Vanilla,
    /// Principal components, uniform quantizer.
    Pca,
    /// Product quantization with asymmetric distance tables.
    Pq,
    /// A trained shaping model.
    Cq,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Exact, Method::Vanilla, Method::Pca, Method::Pq, Method::Cq];

    pub fn label(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Vanilla => "vanilla",
            Method::Pca => "pca",
            Method::Pq => "pq",
            Method::Cq => "cq",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method '{s}' (known: exact, vanilla, pca, pq, cq)")))
    }
}

/// Where the corpus is stored while it is searched.
#[derive(Clone, Debug, PartialEq)]
pub enum Device {
    Ideal,
    Cells(DeviceProfile),
}

impl Device {
    pub fn label(&self) -> String {
        match self {
            Device::Ideal => "ideal".into(),
            Device::Cells(p) => p.name.split_whitespace().next().unwrap_or(&p.name).to_string(),
        }
    }
}

/// How device variation reaches the scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    /// Codes are perturbed once, as if by programming error, and every
    /// query searches the same perturbed corpus.
    PerRun,
    /// Every query sees an independent perturbation, as if by read error.
    PerQuery,
    /// Scores come from a simulated crossbar with analog cell noise.
    Crossbar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub recall_k: usize,
    pub ndcg_k: usize,
    /// Multiplier on every profile's σ_v.
    pub noise_scale: f64,
    pub flips: FlipMode,
    pub array: ArraySpec,
    /// Quantize queries with the corpus quantizer instead of keeping them at
    /// full precision.
    pub quantize_queries: bool,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            recall_k: 5,
            ndcg_k: 10,
            noise_scale: 1.0,
            flips: FlipMode::PerRun,
            array: ArraySpec::default(),
            quantize_queries: false,
            seed: 0,
        }
    }
}

/// Everything that must be fit before the grid runs.
#[derive(Clone, Debug, Default)]
pub struct GridArtifacts {
    pub pca: Vec<PcaModel>,
    pub pq: Vec<PqCodebook>,
    pub cq: Vec<ShapingModelState>,
}

impl GridArtifacts {
    fn pca_for(&self, dim: usize) -> Option<&PcaModel> {
        self.pca.iter().find(|m| m.output_dim() == dim)
    }

    fn cq_for(&self, dim: usize, precision: Precision) -> Option<&ShapingModelState> {
        self.cq
            .iter()
            .find(|m| m.output_dim() == dim && m.quantizer.precision() == Some(precision))
    }
}

/// Axes of the grid. Precision and dimension are ignored by `exact` and
/// `pq`, which contribute one cell per device (per codebook for `pq`).
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxes {
    pub methods: Vec<Method>,
    pub precisions: Vec<Precision>,
    pub dims: Vec<usize>,
    pub devices: Vec<Device>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CellStatus {
    Ok {
        recall: f64,
        ndcg: f64,
        evaluated: usize,
        skipped_queries: usize,
    },
    Skipped {
        reason: String,
    },
}

/// One evaluated (or skipped) grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub precision: String,
    pub dim: usize,
    pub device: String,
    pub recall_k: usize,
    pub ndcg_k: usize,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl CellResult {
    pub fn ndcg(&self) -> Option<f64> {
        match self.status {
            CellStatus::Ok { ndcg, .. } => Some(ndcg),
            CellStatus::Skipped { .. } => None,
        }
    }

    pub fn recall(&self) -> Option<f64> {
        match self.status {
            CellStatus::Ok { recall, .. } => Some(recall),
            CellStatus::Skipped { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<CellResult>,
}

impl GridReport {
    pub fn find(&self, method: &str, precision: &str, dim: usize, device: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.precision == precision && c.dim == dim && c.device == device)
    }

    /// One JSON object per line, in grid order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            out.push_str(&serde_json::to_string(c).expect("cell serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let cells = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("results line {}: {e}", i + 1))))
            .collect::<Result<_>>()?;
        Ok(Self { cells })
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let (rk, nk) = self.cells.first().map_or((5, 10), |c| (c.recall_k, c.ndcg_k));
        let header = [
            "method".to_string(),
            "precision".into(),
            "dim".into(),
            "device".into(),
            format!("recall@{rk}"),
            format!("ndcg@{nk}"),
            "note".into(),
        ];
        let rows: Vec<[String; 7]> = self
            .cells
            .iter()
            .map(|c| {
                let (r, n, note) = match &c.status {
                    CellStatus::Ok { recall, ndcg, skipped_queries, .. } => (
                        format!("{recall:.4}"),
                        format!("{ndcg:.4}"),
                        if *skipped_queries > 0 {
                            format!("{skipped_queries} queries without qrels")
                        } else {
                            String::new()
                        },
                    ),
                    CellStatus::Skipped { reason } => ("-".into(), "-".into(), format!("skipped: {reason}")),
                };
                [c.method.clone(), c.precision.clone(), c.dim.to_string(), c.device.clone(), r, n, note]
            })
            .collect();
        let mut width = header.clone().map(|h| h.len());
        for r in &rows {
            for (w, v) in width.iter_mut().zip(r) {
                *w = (*w).max(v.len());
            }
        }
        let mut out = String::new();
        let mut line = |cols: &[String; 7]| {
            let mut s = String::new();
            for (i, (v, w)) in cols.iter().zip(&width).enumerate() {
                // numeric columns right-aligned, the trailing note unpadded
                match i {
                    2 | 4 | 5 => write!(s, "{v:>w$}  ").unwrap(),
                    6 => s.push_str(v),
                    _ => write!(s, "{v:<w$}  ").unwrap(),
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&header);
        line(&width.map(|w| "-".repeat(w)));
        for r in &rows {
            line(r);
        }
        out
    }
}

struct Cell {
    method: Method,
    precision: Option<Precision>,
    dim: usize,
    device: usize,
    pq: Option<usize>,
}

/// Evaluates the cartesian product of `axes` on `corpus` and `queries`.
///
/// Each cell draws its randomness from its own stream of `cfg.seed`, so
/// results do not depend on which other cells are present before it.
pub fn run_grid(
    corpus: &Matrix,
    queries: &Matrix,
    qrels: &Qrels,
    axes: &GridAxes,
    artifacts: &GridArtifacts,
    cfg: &GridConfig,
) -> Result<GridReport> {
    if queries.cols() != corpus.cols() {
        return Err(Error::shape("run_grid", corpus.cols(), queries.cols()));
    }
    if let Some(d) = qrels.max_doc() {
        if d >= corpus.rows() {
            return Err(Error::Input(format!(
                "qrels reference document {d} but the corpus has {} rows",
                corpus.rows()
            )));
        }
    }
    let cells = enumerate(axes, artifacts, corpus.cols());
    let mut out = Vec::with_capacity(cells.len());
    for cell in &cells {
        let device = &axes.devices[cell.device];
        let precision = match (cell.method, cell.precision) {
            (Method::Pq, _) => {
                let b = &artifacts.pq[cell.pq.expect("pq cell")];
                format!("pq{}x{}", b.subspaces(), b.centroids_per_subspace())
            }
            (_, Some(p)) => p.label().to_string(),
            (_, None) => "fp".to_string(),
        };
        let stream = cell_stream(cell.method.label(), &precision, cell.dim, &device.label());
        let mut rng = Rng::new(cfg.seed).fork(stream);
        let status = match evaluate(cell, corpus, queries, axes, artifacts, cfg, &mut rng)? {
            Ok(run) => {
                let r = recall_at_k(&run, qrels, cfg.recall_k)?;
                let n = ndcg_at_k(&run, qrels, cfg.ndcg_k)?;
                CellStatus::Ok {
                    recall: r.mean,
                    ndcg: n.mean,
                    evaluated: n.evaluated,
                    skipped_queries: n.skipped,
                }
            }
            Err(reason) => CellStatus::Skipped { reason },
        };
        out.push(CellResult {
            method: cell.method.label().into(),
            precision,
            dim: cell.dim,
            device: device.label(),
            recall_k: cfg.recall_k,
            ndcg_k: cfg.ndcg_k,
            status,
        });
    }
    Ok(GridReport { cells: out })
}

fn enumerate(axes: &GridAxes, artifacts: &GridArtifacts, full_dim: usize) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &method in &axes.methods {
        match method {
            Method::Exact => {
                for device in 0..axes.devices.len() {
                    cells.push(Cell { method, precision: None, dim: full_dim, device, pq: None });
                }
            }
            Method::Pq => {
                for (i, book) in artifacts.pq.iter().enumerate() {
                    for device in 0..axes.devices.len() {
                        cells.push(Cell { method, precision: None, dim: book.dim(), device, pq: Some(i) });
                    }
                }
            }
            _ => {
                for &precision in &axes.precisions {
                    for &dim in &axes.dims {
                        for device in 0..axes.devices.len() {
                            cells.push(Cell { method, precision: Some(precision), dim, device, pq: None });
                        }
                    }
                }
            }
        }
    }
    cells
}

/// FNV-1a over the cell coordinates.
fn cell_stream(method: &str, precision: &str, dim: usize, device: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{method}/{precision}/{dim}/{device}").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// `Ok(Err(reason))` marks a skipped cell.
fn evaluate(
    cell: &Cell,
    corpus: &Matrix,
    queries: &Matrix,
    axes: &GridAxes,
    artifacts: &GridArtifacts,
    cfg: &GridConfig,
    rng: &mut Rng,
) -> Result<Result<RunResult, String>> {
    let device = &axes.devices[cell.device];
    let k = cfg.recall_k.max(cfg.ndcg_k);
    let on_cells = matches!(device, Device::Cells(_));
    match cell.method {
        Method::Exact => {
            if on_cells {
                return Ok(Err("full-precision vectors have no cell mapping".into()));
            }
            exact_mips(queries, corpus, k).map(Ok)
        }
        Method::Pq => {
            if on_cells {
                return Ok(Err("codebook indices have no cell mapping".into()));
            }
            let book = &artifacts.pq[cell.pq.expect("pq cell")];
            if book.dim() != corpus.cols() {
                return Ok(Err(format!("codebook is {}-D, corpus is {}-D", book.dim(), corpus.cols())));
            }
            let codes = book.encode(corpus)?;
            let rankings = (0..queries.rows())
                .into_par_iter()
                .map(|i| Ok(rank_scores(&book.score(queries.row(i), &codes)?, k.min(corpus.rows()))))
                .collect::<Result<Vec<_>>>()?;
            Ok(Ok(RunResult::new(rankings)))
        }
        Method::Vanilla | Method::Pca | Method::Cq => {
            let precision = cell.precision.expect("quantized cell");
            let dim = cell.dim;
            if dim == 0 || dim > corpus.cols() {
                return Ok(Err(format!("dimension {dim} outside 1..={}", corpus.cols())));
            }
            let (docs, qs, quantizer) = match cell.method {
                Method::Vanilla => {
                    let docs = normalize_rows(&vanilla_truncate(corpus, dim)?)?;
                    let qs = normalize_rows(&vanilla_truncate(queries, dim)?)?;
                    let q = Quantizer::Fixed(FixedQuantizer::calibrated(precision, docs.as_slice())?);
                    (docs, qs, q)
                }
                Method::Pca => {
                    let Some(model) = artifacts.pca_for(dim) else {
                        return Ok(Err(format!("no PCA model fit at {dim}-D")));
                    };
                    let docs = pca_project(model, corpus)?;
                    let qs = pca_project(model, queries)?;
                    let q = Quantizer::Fixed(FixedQuantizer::calibrated(precision, docs.as_slice())?);
                    (docs, qs, q)
                }
                _ => {
                    let Some(model) = artifacts.cq_for(dim, precision) else {
                        return Ok(Err(format!("no trained model at {dim}-D {precision}")));
                    };
                    (model.project(corpus)?, model.project(queries)?, model.quantizer.clone())
                }
            };
            let (codes, _) = quantizer.quantize_logical(&docs)?;
            let stored = QuantizedCorpus::new(codes, quantizer.logical_levels())?;
            let qs = if cfg.quantize_queries {
                quantizer.quantize_logical(&qs)?.1
            } else {
                qs
            };
            match device {
                Device::Ideal => exact_mips(&qs, &stored.dequantize(), k).map(Ok),
                Device::Cells(profile) => search_on_device(&stored, &qs, profile, cfg, k, rng),
            }
        }
    }
}

fn search_on_device(
    stored: &QuantizedCorpus,
    queries: &Matrix,
    profile: &DeviceProfile,
    cfg: &GridConfig,
    k: usize,
    rng: &mut Rng,
) -> Result<Result<RunResult, String>> {
    match cfg.flips {
        FlipMode::PerRun => {
            let tm = match TransitionMatrix::for_codes(profile, cfg.noise_scale, stored.levels()) {
                Ok(tm) => tm,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let flipped = apply_flips(stored, &tm, rng)?;
            exact_mips(queries, &flipped.dequantize(), k).map(Ok)
        }
        FlipMode::PerQuery => {
            let tm = match TransitionMatrix::for_codes(profile, cfg.noise_scale, stored.levels()) {
                Ok(tm) => tm,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let base = rng.clone();
            let rankings = (0..queries.rows())
                .into_par_iter()
                .map(|i| {
                    let flipped = apply_flips(stored, &tm, &mut base.fork(i as u64))?;
                    let one = Matrix::row_vector(queries.row(i))?;
                    Ok(exact_mips(&one, &flipped.dequantize(), k)?.rankings.remove(0))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Ok(RunResult::new(rankings)))
        }
        FlipMode::Crossbar => {
            let bar = match Crossbar::program(stored, cfg.array, profile, cfg.noise_scale, rng) {
                Ok(bar) => bar,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let base = rng.clone();
            let rankings = (0..queries.rows())
                .into_par_iter()
                .map(|i| {
                    let scores = bar.mips(queries.row(i), &mut base.fork(i as u64))?;
                    Ok(rank_scores(&scores, k.min(stored.len())))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Ok(RunResult::new(rankings)))
        }
    }
}
