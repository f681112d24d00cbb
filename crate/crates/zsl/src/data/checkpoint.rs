//! `ZSLC` model checkpoints.
//!
//! Layout, little-endian:
//!
//! ```text
//! "ZSLC" | u16 version
//! hyperparameters: f64 lambda, f64 eta, f64 lr,
//!                  u64 embed_dim, u64 epochs, u64 rounds, u64 m0, u64 batch_size, u64 seed
//! dims:            u64 visual_dim, u64 semantic_dim, u64 hidden_dim, u64 classes
//! u64 completed outer iterations
//! u32 parameter count, then per parameter in fixed order:
//!     u16 name length, name (UTF-8), u32 rows, u32 cols, rows*cols f64
//! per parameter, same order: Adam state
//!     u64 t, f64 beta1, f64 beta2, f64 eps, rows*cols f64 m, rows*cols f64 v
//! ```
//!
//! Everything is stored at 64-bit, so a round trip is exact.

use std::path::Path;

use zsl_core::model::{semantic_hidden_width, Dense};
use zsl_core::numerics::AdamState;
use zsl_core::{HyperParams, Matrix, ModelParams, ParamId};

use super::{io_err, DataError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ZSLC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hp: HyperParams,
    pub params: ModelParams,
    /// Outer iterations already run; training resumes from here.
    pub completed_iterations: usize,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn values(&mut self, m: &Matrix) {
        for &v in m.as_slice() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.bytes.len() - self.pos < n {
            return Err(DataError::Truncated {
                path: self.path.into(),
                what: what.into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self, what: &str) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn usize(&mut self, what: &str) -> Result<usize, DataError> {
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| self.dim(format!("{what} = {v} does not fit in memory")))
    }
    fn f64(&mut self, what: &str) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn values(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix, DataError> {
        let n = rows * cols;
        let raw = self.take(n * 8, what)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Matrix::from_vec(rows, cols, data)?)
    }
    fn dim(&self, detail: String) -> DataError {
        DataError::Dimension {
            path: self.path.into(),
            detail,
        }
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);
    let hp = &ckpt.hp;
    w.f64(hp.lambda);
    w.f64(hp.eta);
    w.f64(hp.lr);
    for v in [hp.embed_dim, hp.epochs, hp.rounds, hp.m0, hp.batch_size] {
        w.u64(v as u64);
    }
    w.u64(hp.seed);
    let p = &ckpt.params;
    for v in [p.visual_dim(), p.semantic_dim(), p.hidden_dim(), p.num_classes()] {
        w.u64(v as u64);
    }
    w.u64(ckpt.completed_iterations as u64);
    w.u32(ParamId::ALL.len() as u32);
    for id in ParamId::ALL {
        let m = p.param(id);
        w.u16(id.name().len() as u16);
        w.0.extend_from_slice(id.name().as_bytes());
        w.u32(m.rows() as u32);
        w.u32(m.cols() as u32);
        w.values(m);
    }
    for id in ParamId::ALL {
        let s = p.adam(id);
        w.u64(s.t);
        w.f64(s.beta1);
        w.f64(s.beta2);
        w.f64(s.eps);
        w.values(&s.m);
        w.values(&s.v);
    }
    w.0
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint, DataError> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(DataError::Magic {
            path: path.into(),
            expected: "ZSLC",
        });
    }
    let mut r = Reader {
        bytes,
        pos: 4,
        path,
    };
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(DataError::Version {
            path: path.into(),
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let hp = HyperParams {
        lambda: r.f64("lambda")?,
        eta: r.f64("eta")?,
        lr: r.f64("lr")?,
        embed_dim: r.usize("embed_dim")?,
        epochs: r.usize("epochs")?,
        rounds: r.usize("rounds")?,
        m0: r.usize("m0")?,
        batch_size: r.usize("batch_size")?,
        seed: r.u64("seed")?,
    };
    let d_v = r.usize("visual_dim")?;
    let d_s = r.usize("semantic_dim")?;
    let hidden = r.usize("hidden_dim")?;
    let classes = r.usize("classes")?;
    let completed_iterations = r.usize("completed iterations")?;
    let embed = hp.embed_dim;
    if hidden != semantic_hidden_width(d_s, embed) {
        return Err(r.dim(format!(
            "hidden width {hidden} does not match semantic dim {d_s} and embed_dim {embed}"
        )));
    }
    let expected = [
        (d_v, embed),
        (1, embed),
        (d_s, hidden),
        (1, hidden),
        (hidden, embed),
        (1, embed),
        (embed, classes),
        (1, classes),
    ];
    let count = r.u32("parameter count")? as usize;
    if count != ParamId::ALL.len() {
        return Err(r.dim(format!("{count} parameter matrices, expected {}", ParamId::ALL.len())));
    }
    let mut mats = Vec::with_capacity(count);
    for (id, shape) in ParamId::ALL.into_iter().zip(expected) {
        let len = r.u16("parameter name")? as usize;
        let name = r.take(len, "parameter name")?;
        if name != id.name().as_bytes() {
            return Err(r.dim(format!(
                "expected parameter {}, found {:?}",
                id.name(),
                String::from_utf8_lossy(name)
            )));
        }
        let rows = r.u32("parameter shape")? as usize;
        let cols = r.u32("parameter shape")? as usize;
        if (rows, cols) != shape {
            return Err(r.dim(format!(
                "{} is {rows}x{cols}, declared dims require {}x{}",
                id.name(),
                shape.0,
                shape.1
            )));
        }
        mats.push(r.values(rows, cols, id.name())?);
    }
    let mut it = mats.into_iter();
    let mut layer = || Dense {
        w: it.next().unwrap(),
        b: it.next().unwrap(),
    };
    let (visual, hidden_layer, out_layer, classifier) = (layer(), layer(), layer(), layer());
    let mut params = ModelParams::from_layers(visual, hidden_layer, out_layer, classifier)?;
    for (id, (rows, cols)) in ParamId::ALL.into_iter().zip(expected) {
        let state = AdamState {
            t: r.u64("adam step")?,
            beta1: r.f64("adam beta1")?,
            beta2: r.f64("adam beta2")?,
            eps: r.f64("adam eps")?,
            m: r.values(rows, cols, "adam first moment")?,
            v: r.values(rows, cols, "adam second moment")?,
        };
        params.set_adam(id, state)?;
    }
    if r.pos != bytes.len() {
        return Err(r.dim(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint {
        hp,
        params,
        completed_iterations,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), DataError> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ckpt)).map_err(io_err(path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, DataError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_checkpoint(&bytes, path)
}

impl Checkpoint {
    /// Rejects a checkpoint whose architecture does not fit `ds`.
    pub fn check_dataset(&self, ds: &zsl_core::Dataset, path: &Path) -> Result<(), DataError> {
        let p = &self.params;
        let have = (p.visual_dim(), p.semantic_dim(), p.num_classes());
        let want = (ds.visual_dim(), ds.semantic_dim(), ds.num_classes());
        if have != want {
            return Err(DataError::Dimension {
                path: path.into(),
                detail: format!(
                    "checkpoint (visual, semantic, classes) = {have:?} but dataset has {want:?}"
                ),
            });
        }
        Ok(())
    }
}
