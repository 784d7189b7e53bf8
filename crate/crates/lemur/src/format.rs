//! Binary file formats. All integers and floats are little-endian.
//!
//! Embedding file (corpus, query sets, training-token sources):
//! ```text
//! magic "MVEC0001" | u32 version=1 | u32 dim | u64 count | u32 dtype(0=f32)
//! (count+1) x u64 cumulative token offsets | offsets[count]*dim x f32
//! ```
//!
//! Ground-truth / result-dump file:
//! ```text
//! u32 k | u64 query_count | per query: k x (u64 doc_id, f32 score)
//! ```
//!
//! Model file:
//! ```text
//! u32 d | u32 d_prime | u64 m_out | f64 mu | f64 sigma
//! W_in (d_prime x d) f32 | b (d_prime) f32 | W_out (m_out x d_prime) f32
//! ```
//!
//! MIPS index file (R = 0 encodes the exact-scan index):
//! ```text
//! u64 m | u32 d_prime | u32 R | u64 entry
//! per node: u32 len, len x u64 | vectors (m x d_prime) f32
//! ```

use std::fs;
use std::path::Path;

use lemur_core::corpus::Corpus;
use lemur_core::linalg::Mat;
use lemur_core::maxsim::{GroundTruth, ScoredDoc};
use lemur_core::mips::MipsIndex;
use lemur_core::model::{EncoderParams, LemurModel};

use crate::error::{io_err, Error, Result};

pub const CORPUS_MAGIC: &[u8; 8] = b"MVEC0001";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;

/// FNV-1a 64-bit digest; used by manifests to fingerprint inputs and by
/// reproducibility checks to compare artifacts.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn file_digest(path: &Path) -> Result<u64> {
    Ok(fnv64(&fs::read(path).map_err(io_err(path))?))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], path: &'a Path) -> Self {
        Reader { buf, pos: 0, path }
    }

    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt { path: self.path.to_path_buf(), reason: reason.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() - self.pos {
            return Err(self.corrupt(format!(
                "needed {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Guard a count field before allocating for it: `count` records of
    /// `record_bytes` must fit in the remaining payload.
    fn check_count(&self, count: usize, record_bytes: usize) -> Result<()> {
        match count.checked_mul(record_bytes) {
            Some(total) if total <= self.buf.len() - self.pos => Ok(()),
            _ => Err(self.corrupt(format!(
                "header claims {count} records of {record_bytes} bytes but only {} bytes remain",
                self.buf.len() - self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32_vec(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = self.take(count * 4)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.corrupt(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32_slice(&mut self, vs: &[f32]) {
        self.buf.reserve(vs.len() * 4);
        for &v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn finish(self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf).map_err(io_err(path))
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Read an embedding file into a [`Corpus`].
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader::new(&bytes, path);
    let magic = r.take(8)?;
    if magic != CORPUS_MAGIC {
        return Err(format_err(path, format!("bad magic {magic:02x?}")));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let count = r.u64()? as usize;
    let dtype = r.u32()?;
    if dtype != DTYPE_F32 {
        return Err(format_err(path, format!("unsupported dtype {dtype}")));
    }
    if dim == 0 || count == 0 {
        return Err(Error::Core(lemur_core::Error::EmptyCorpus));
    }
    r.check_count(count + 1, 8)?;
    let mut offsets = Vec::with_capacity(count + 1);
    for _ in 0..=count {
        offsets.push(r.u64()? as usize);
    }
    let total = *offsets.last().unwrap();
    r.check_count(total, dim * 4)?;
    let payload = r.f32_vec(total * dim)?;
    r.expect_end()?;
    Corpus::from_parts(dim, offsets, payload).map_err(|e| match e {
        lemur_core::Error::NonFinite => {
            Error::Corrupt { path: path.to_path_buf(), reason: "non-finite embedding values".into() }
        }
        lemur_core::Error::Argument(msg) => Error::Corrupt { path: path.to_path_buf(), reason: msg },
        other => Error::Core(other),
    })
}

/// Write a [`Corpus`] as an embedding file.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(CORPUS_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(corpus.dim() as u32);
    w.u64(corpus.len() as u64);
    w.u32(DTYPE_F32);
    for &o in corpus.offsets() {
        w.u64(o as u64);
    }
    w.f32_slice(corpus.token_data());
    w.finish(path)
}

/// Read a ground-truth (or result-dump) file.
pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader::new(&bytes, path);
    let k = r.u32()? as usize;
    let query_count = r.u64()? as usize;
    if k == 0 {
        return Err(format_err(path, "k must be positive"));
    }
    r.check_count(query_count, k * 12)?;
    let mut lists = Vec::with_capacity(query_count);
    for _ in 0..query_count {
        let mut list = Vec::with_capacity(k);
        for _ in 0..k {
            let doc_id = r.u64()? as usize;
            let score = r.f32()?;
            list.push(ScoredDoc { doc_id, score });
        }
        lists.push(list);
    }
    r.expect_end()?;
    Ok(GroundTruth { k, lists })
}

/// Write a ground-truth (or result-dump) file. Every per-query list must
/// have the same length (min(k, m)); that common length is stored as the
/// file's k.
pub fn write_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let k_eff = truth.lists.first().map(Vec::len).unwrap_or(truth.k);
    if truth.lists.iter().any(|l| l.len() != k_eff) || k_eff == 0 {
        return Err(Error::Core(lemur_core::Error::Argument(
            "ground-truth lists must be non-empty and uniformly sized".into(),
        )));
    }
    let mut w = Writer::new();
    w.u32(k_eff as u32);
    w.u64(truth.lists.len() as u64);
    for list in &truth.lists {
        for s in list {
            w.u64(s.doc_id as u64);
            w.f32(s.score);
        }
    }
    w.finish(path)
}

/// Read a model file.
pub fn read_model(path: &Path) -> Result<LemurModel> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader::new(&bytes, path);
    let d = r.u32()? as usize;
    let d_prime = r.u32()? as usize;
    let m_out = r.u64()? as usize;
    let mu = r.f64()?;
    let sigma = r.f64()?;
    if d == 0 || d_prime == 0 || m_out == 0 {
        return Err(format_err(path, "model dimensions must be positive"));
    }
    if !(sigma > 0.0) || !mu.is_finite() {
        return Err(format_err(path, format!("invalid standardization mu={mu} sigma={sigma}")));
    }
    r.check_count(d_prime, d * 4)?;
    let w_in = Mat::from_vec(d_prime, d, r.f32_vec(d_prime * d)?);
    let b = r.f32_vec(d_prime)?;
    r.check_count(m_out, d_prime * 4)?;
    let w_out = Mat::from_vec(m_out, d_prime, r.f32_vec(m_out * d_prime)?);
    r.expect_end()?;
    let model = LemurModel {
        encoder: EncoderParams { w_in, b },
        w_out,
        target_mean: mu,
        target_std: sigma,
    };
    model.validate()?;
    Ok(model)
}

/// Write a model file.
pub fn write_model(model: &LemurModel, path: &Path) -> Result<()> {
    let mut w = Writer::new();
    w.u32(model.d() as u32);
    w.u32(model.d_prime() as u32);
    w.u64(model.m_out() as u64);
    w.f64(model.target_mean);
    w.f64(model.target_std);
    w.f32_slice(model.encoder.w_in.as_slice());
    w.f32_slice(&model.encoder.b);
    w.f32_slice(model.w_out.as_slice());
    w.finish(path)
}

/// Read a MIPS index file.
pub fn read_mips(path: &Path) -> Result<MipsIndex> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader::new(&bytes, path);
    let m = r.u64()? as usize;
    let d_prime = r.u32()? as usize;
    let degree = r.u32()? as usize;
    let entry = r.u64()? as usize;
    if m == 0 || d_prime == 0 {
        return Err(format_err(path, "index dimensions must be positive"));
    }
    r.check_count(m, 4)?;
    let mut adjacency = Vec::with_capacity(m);
    for _ in 0..m {
        let len = r.u32()? as usize;
        r.check_count(len, 8)?;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            list.push(r.u64()? as u32);
        }
        adjacency.push(list);
    }
    r.check_count(m, d_prime * 4)?;
    let vectors = Mat::from_vec(m, d_prime, r.f32_vec(m * d_prime)?);
    r.expect_end()?;
    let graph = if degree == 0 { None } else { Some((adjacency, entry, degree)) };
    Ok(MipsIndex::from_parts(vectors, graph)?)
}

/// Write a MIPS index file. The exact-scan index is encoded with R = 0
/// and empty adjacency lists.
pub fn write_mips(index: &MipsIndex, path: &Path) -> Result<()> {
    let mut w = Writer::new();
    let m = index.len();
    w.u64(m as u64);
    w.u32(index.dim() as u32);
    match index.graph_parts() {
        None => {
            w.u32(0);
            w.u64(0);
            for _ in 0..m {
                w.u32(0);
            }
        }
        Some((adjacency, entry, r)) => {
            w.u32(r as u32);
            w.u64(entry as u64);
            for list in adjacency {
                w.u32(list.len() as u32);
                for &e in list {
                    w.u64(e as u64);
                }
            }
        }
    }
    w.f32_slice(index.vectors().as_slice());
    w.finish(path)
}

/// Composite index directory layout.
pub const INDEX_MODEL_FILE: &str = "model.bin";
pub const INDEX_MIPS_FILE: &str = "mips.bin";
pub const INDEX_MANIFEST_FILE: &str = "manifest.txt";

/// Write `model.bin` and `mips.bin` into `dir` (created if missing). The
/// caller adds the run manifest.
pub fn write_index_dir(index: &crate::pipeline::LemurIndex, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_model(&index.model, &dir.join(INDEX_MODEL_FILE))?;
    write_mips(&index.mips, &dir.join(INDEX_MIPS_FILE))
}

/// Load an index directory against its corpus.
pub fn read_index_dir(
    dir: &Path,
    corpus: std::sync::Arc<Corpus>,
) -> Result<crate::pipeline::LemurIndex> {
    let model = read_model(&dir.join(INDEX_MODEL_FILE))?;
    let mips = read_mips(&dir.join(INDEX_MIPS_FILE))?;
    crate::pipeline::LemurIndex::from_parts(model, mips, corpus)
}
