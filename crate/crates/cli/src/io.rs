//! Little-endian binary formats shared by the exporter, the trainer and the
//! evaluator. Every format starts with a four-byte magic and a `u32`
//! version, and every reader rejects trailing bytes.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use cqcim::baselines::{PqCodebook, PqCodes};
use cqcim::cimsim::{DeviceProfile, QuantizedCorpus};
use cqcim::numkit::Matrix;
use cqcim::shaping::{CodeMatrix, CompressionHead, FixedQuantizer, N2uqQuantizer, NoiseSpec, Precision, Quantizer};
use cqcim::training::ShapingModelState;
use cqcim::{Error, Result};

pub const VERSION: u32 = 1;
/// The only payload type defined so far: IEEE-754 binary32.
pub const DTYPE_F32: u32 = 1;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"CQEM";
pub const VIEWS_MAGIC: &[u8; 4] = b"CQPV";
pub const CORPUS_MAGIC: &[u8; 4] = b"CQQC";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CQMK";
pub const CODEBOOK_MAGIC: &[u8; 4] = b"CQPQ";

/// Row-major `f32` embeddings with optional string ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub count: usize,
    pub dim: usize,
    pub data: Vec<f32>,
    pub ids: Option<Vec<String>>,
}

impl EmbeddingFile {
    pub fn new(count: usize, dim: usize, data: Vec<f32>, ids: Option<Vec<String>>) -> Result<Self> {
        if data.len() != count * dim {
            return Err(Error::Format(format!("{} values for {count}x{dim} embeddings", data.len())));
        }
        if ids.as_ref().is_some_and(|ids| ids.len() != count) {
            return Err(Error::Format(format!("{} ids for {count} rows", ids.as_ref().unwrap().len())));
        }
        Ok(Self { count, dim, data, ids })
    }

    /// Rounds every value to `f32`.
    pub fn from_matrix(m: &Matrix, ids: Option<Vec<String>>) -> Result<Self> {
        Self::new(m.rows(), m.cols(), m.as_slice().iter().map(|&v| v as f32).collect(), ids)
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::from_vec(self.count, self.dim, self.data.iter().map(|&v| v as f64).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = header(EMBEDDING_MAGIC);
        put_dims(&mut w, self.count, self.dim);
        w.write_u32::<LE>(DTYPE_F32).unwrap();
        put_f32s(&mut w, &self.data);
        if let Some(ids) = &self.ids {
            put_ids(&mut w, ids);
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, EMBEDDING_MAGIC, "embedding file")?;
        let (count, dim) = r.dims()?;
        r.dtype()?;
        let data = r.f32s(count * dim)?;
        let ids = r.optional_ids(count)?;
        r.finish()?;
        Self::new(count, dim, data, ids)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?).map_err(|e| in_file(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

/// Anchor, positive and optional negative views of the same rows, stored
/// as consecutive blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedViewFile {
    pub count: usize,
    pub dim: usize,
    /// Two or three blocks of `count × dim` values.
    pub views: Vec<Vec<f32>>,
    pub ids: Option<Vec<String>>,
}

impl PairedViewFile {
    pub fn new(count: usize, dim: usize, views: Vec<Vec<f32>>, ids: Option<Vec<String>>) -> Result<Self> {
        if !(2..=3).contains(&views.len()) {
            return Err(Error::Format(format!("paired views need 2 or 3 blocks, got {}", views.len())));
        }
        if views.iter().any(|v| v.len() != count * dim) {
            return Err(Error::Format(format!("every view must hold {count}x{dim} values")));
        }
        if ids.as_ref().is_some_and(|ids| ids.len() != count) {
            return Err(Error::Format(format!("id table does not match {count} rows")));
        }
        Ok(Self { count, dim, views, ids })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = header(VIEWS_MAGIC);
        put_dims(&mut w, self.count, self.dim);
        w.write_u32::<LE>(DTYPE_F32).unwrap();
        w.write_u32::<LE>(self.views.len() as u32).unwrap();
        for v in &self.views {
            put_f32s(&mut w, v);
        }
        if let Some(ids) = &self.ids {
            put_ids(&mut w, ids);
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, VIEWS_MAGIC, "paired-view file")?;
        let (count, dim) = r.dims()?;
        r.dtype()?;
        let n_views = r.u32()? as usize;
        if !(2..=3).contains(&n_views) {
            return Err(Error::Format(format!("view_count must be 2 or 3, got {n_views}")));
        }
        let views = (0..n_views).map(|_| r.f32s(count * dim)).collect::<Result<_>>()?;
        let ids = r.optional_ids(count)?;
        r.finish()?;
        Self::new(count, dim, views, ids)
    }

    pub fn to_batch(&self) -> Result<cqcim::training::ViewBatch> {
        let m = |v: &Vec<f32>| Matrix::from_vec(self.count, self.dim, v.iter().map(|&x| x as f64).collect());
        cqcim::training::ViewBatch::new(m(&self.views[0])?, m(&self.views[1])?, self.views.get(2).map(m).transpose()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?).map_err(|e| in_file(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

pub fn corpus_to_bytes(c: &QuantizedCorpus) -> Vec<u8> {
    let mut w = header(CORPUS_MAGIC);
    put_dims(&mut w, c.len(), c.dim());
    w.write_u32::<LE>(c.levels() as u32).unwrap();
    put_f64s(&mut w, c.dequant());
    w.extend_from_slice(c.codes().as_slice());
    w
}

pub fn corpus_from_bytes(bytes: &[u8]) -> Result<QuantizedCorpus> {
    let mut r = Reader::open(bytes, CORPUS_MAGIC, "quantized corpus")?;
    let (rows, cols) = r.dims()?;
    let levels = r.u32()? as usize;
    if !(2..=256).contains(&levels) {
        return Err(Error::Format(format!("quantized corpus with {levels} levels")));
    }
    let dequant = r.f64s(levels)?;
    let codes = r.bytes(rows * cols)?.to_vec();
    r.finish()?;
    QuantizedCorpus::new(CodeMatrix::new(rows, cols, levels, codes)?, dequant)
}

pub fn load_corpus(path: &Path) -> Result<QuantizedCorpus> {
    corpus_from_bytes(&read_file(path)?).map_err(|e| in_file(path, e))
}

pub fn save_corpus(path: &Path, c: &QuantizedCorpus) -> Result<()> {
    write_file(path, &corpus_to_bytes(c))
}

/// A trained model plus the metadata needed to tell checkpoints apart.
/// Optimizer moments are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub state: ShapingModelState,
    pub seed: u64,
    /// SHA-256 of the configuration the model was trained under.
    pub config_hash: [u8; 32],
}

const QUANT_N2UQ: u8 = 0;
const QUANT_FIXED: u8 = 1;

impl ModelCheckpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let mut w = header(CHECKPOINT_MAGIC);
        w.write_u64::<LE>(self.seed).unwrap();
        w.extend_from_slice(&self.config_hash);

        put_dims(&mut w, s.input_dim(), s.output_dim());
        put_f64s(&mut w, s.head.weights().as_slice());
        put_f64s(&mut w, s.head.bias());

        match &s.quantizer {
            Quantizer::N2uq(q) => {
                let (lo, hi) = q.range();
                w.write_u8(QUANT_N2UQ).unwrap();
                w.write_u32::<LE>(q.levels() as u32).unwrap();
                put_f64s(&mut w, &[lo, hi]);
                put_f64s(&mut w, q.thresholds());
            }
            Quantizer::Fixed(q) => {
                w.write_u8(QUANT_FIXED).unwrap();
                w.write_u32::<LE>(q.levels() as u32).unwrap();
                put_f64s(&mut w, &[q.scale()]);
            }
        }

        let p = s.noise.profile();
        put_str(&mut w, &p.name);
        w.write_u32::<LE>(p.levels() as u32).unwrap();
        put_f64s(&mut w, &p.sigma_v);
        put_f64s(&mut w, &p.nominal);
        put_f64s(&mut w, &[s.noise.sigma_g()]);
        put_f64s(&mut w, s.noise.lookup_thresholds());
        w.write_u8(s.noise.normalize() as u8).unwrap();

        put_f64s(&mut w, s.lift.as_slice());
        put_f64s(&mut w, &s.lift_offset);
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, "model checkpoint")?;
        let seed = r.u64()?;
        let config_hash: [u8; 32] = r.bytes(32)?.try_into().unwrap();

        let (din, dout) = r.dims()?;
        let w = Matrix::from_vec(din, dout, r.f64s(din * dout)?)?;
        let head = CompressionHead::new(w, r.f64s(dout)?)?;

        let kind = r.u8()?;
        let levels = r.u32()? as usize;
        let quantizer = match kind {
            QUANT_N2UQ => {
                let range = r.f64s(2)?;
                let t = r.f64s(levels.saturating_sub(1))?;
                Quantizer::N2uq(N2uqQuantizer::new(levels, t, range[0], range[1])?)
            }
            QUANT_FIXED => {
                let mode = Precision::from_levels(levels)
                    .ok_or_else(|| Error::Format(format!("no fixed quantizer has {levels} levels")))?;
                Quantizer::Fixed(FixedQuantizer::new(mode, r.f64()?)?)
            }
            other => return Err(Error::Format(format!("unknown quantizer kind {other}"))),
        };

        let name = r.string()?;
        let k = r.u32()? as usize;
        let sigma_v = r.f64s(k)?;
        let nominal = r.f64s(k)?;
        let profile = DeviceProfile::new(name, sigma_v, nominal)?;
        let sigma_g = r.f64()?;
        let thresholds = r.f64s(k.saturating_sub(1))?;
        let normalize = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Format(format!("invalid boolean byte {b}"))),
        };
        let noise = NoiseSpec::with_thresholds(profile, sigma_g, thresholds, normalize)?;

        let lift = Matrix::from_vec(dout, din, r.f64s(dout * din)?)?;
        let lift_offset = r.f64s(din)?;
        r.finish()?;
        let state = ShapingModelState::new(head, quantizer, noise, lift, lift_offset)?;
        Ok(Self {
            state,
            seed,
            config_hash,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?).map_err(|e| in_file(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

/// A PQ codebook and, optionally, the codes of the corpus it was fit on.
pub fn codebook_to_bytes(book: &PqCodebook, codes: Option<&PqCodes>) -> Vec<u8> {
    let mut w = header(CODEBOOK_MAGIC);
    w.write_u32::<LE>(book.subspaces() as u32).unwrap();
    w.write_u32::<LE>(book.centroids_per_subspace() as u32).unwrap();
    w.write_u32::<LE>(book.sub_dim() as u32).unwrap();
    put_f64s(&mut w, book.raw_centroids());
    let n = codes.map_or(0, |c| c.len());
    w.write_u32::<LE>(n as u32).unwrap();
    if let Some(c) = codes {
        w.extend_from_slice(c.as_slice());
    }
    w
}

pub fn codebook_from_bytes(bytes: &[u8]) -> Result<(PqCodebook, Option<PqCodes>)> {
    let mut r = Reader::open(bytes, CODEBOOK_MAGIC, "PQ codebook")?;
    let m = r.u32()? as usize;
    let k = r.u32()? as usize;
    let sub = r.u32()? as usize;
    let centroids = r.f64s(m.saturating_mul(k).saturating_mul(sub))?;
    let book = PqCodebook::new(m, k, sub, centroids)?;
    let n = r.u32()? as usize;
    let codes = if n > 0 {
        Some(PqCodes::new(n, m, r.bytes(n.saturating_mul(m))?.to_vec())?)
    } else {
        None
    };
    r.finish()?;
    if let Some(c) = &codes {
        if c.as_slice().iter().any(|&v| v as usize >= k) {
            return Err(Error::Format(format!("PQ code out of range for {k} centroids")));
        }
    }
    Ok((book, codes))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    f.write_all(bytes)?;
    Ok(())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn header(magic: &[u8; 4]) -> Vec<u8> {
    let mut w = magic.to_vec();
    w.write_u32::<LE>(VERSION).unwrap();
    w
}

fn put_dims(w: &mut Vec<u8>, a: usize, b: usize) {
    w.write_u32::<LE>(a as u32).unwrap();
    w.write_u32::<LE>(b as u32).unwrap();
}

fn put_f32s(w: &mut Vec<u8>, v: &[f32]) {
    for &x in v {
        w.write_f32::<LE>(x).unwrap();
    }
}

fn put_f64s(w: &mut Vec<u8>, v: &[f64]) {
    for &x in v {
        w.write_f64::<LE>(x).unwrap();
    }
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    w.write_u32::<LE>(s.len() as u32).unwrap();
    w.extend_from_slice(s.as_bytes());
}

fn put_ids(w: &mut Vec<u8>, ids: &[String]) {
    w.write_u32::<LE>(ids.len() as u32).unwrap();
    for id in ids {
        put_str(w, id);
    }
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        let mut r = Self {
            cur: Cursor::new(bytes),
            what,
        };
        let found = r.bytes(4)?;
        if found != magic {
            return Err(Error::Format(format!(
                "not a {what}: magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("{what} version {version} is not supported (expected {VERSION})")));
        }
        Ok(r)
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn truncated(&self) -> Error {
        Error::Format(format!("{} is truncated at byte {}", self.what, self.cur.position()))
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.truncated());
        }
        let start = self.cur.position() as usize;
        self.cur.set_position((start + n) as u64);
        Ok(&self.cur.get_ref()[start..start + n])
    }

    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.truncated())
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LE>().map_err(|_| self.truncated())
    }

    fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LE>().map_err(|_| self.truncated())
    }

    fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LE>().map_err(|_| self.truncated())
    }

    fn dims(&mut self) -> Result<(usize, usize)> {
        Ok((self.u32()? as usize, self.u32()? as usize))
    }

    fn dtype(&mut self) -> Result<()> {
        match self.u32()? {
            DTYPE_F32 => Ok(()),
            other => Err(Error::Format(format!("unsupported dtype code {other} (only f32 = {DTYPE_F32})"))),
        }
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        if n.saturating_mul(4) > self.remaining() {
            return Err(self.truncated());
        }
        let mut out = vec![0.0; n];
        self.cur.read_f32_into::<LE>(&mut out).map_err(|_| self.truncated())?;
        Ok(out)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.saturating_mul(8) > self.remaining() {
            return Err(self.truncated());
        }
        let mut out = vec![0.0; n];
        self.cur.read_f64_into::<LE>(&mut out).map_err(|_| self.truncated())?;
        Ok(out)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.bytes(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format(format!("{} holds a non-UTF-8 string", self.what)))
    }

    fn optional_ids(&mut self, count: usize) -> Result<Option<Vec<String>>> {
        if self.remaining() == 0 {
            return Ok(None);
        }
        let n = self.u32()? as usize;
        if n != count {
            return Err(Error::Format(format!("id table lists {n} ids for {count} rows")));
        }
        (0..n).map(|_| self.string()).collect::<Result<_>>().map(Some)
    }

    fn finish(self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(Error::Format(format!("{} has {n} trailing bytes", self.what))),
        }
    }
}
