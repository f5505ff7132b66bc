//! Versioned binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes   "DIINNCKP"
//! version   u32
//! hlen      u64       byte length of the JSON header
//! header    hlen      UTF-8 JSON: config, tensor manifest, optimizer info, metadata
//! params    f32 LE    every manifest tensor, row-major, manifest order
//! moments   f32 LE    if the header lists an optimizer: all first moments, then all second moments
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::numcore::AdamState;
use crate::params::ParamSet;
use crate::{Model, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DIINNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training provenance carried alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Completed epochs.
    pub epoch: u64,
    /// Completed optimizer steps.
    pub step: u64,
    pub loss: Option<f64>,
    pub best_loss: Option<f64>,
    /// Antialiasing flag used for the bicubic degradation.
    pub antialias: bool,
    pub omega0: f64,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<ManifestEntry>,
    optimizer: Option<OptimizerHeader>,
    meta: TrainingMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamSet<f32>,
    pub optimizer: Option<AdamState<f32>>,
    pub meta: TrainingMeta,
}

fn corrupt<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::CorruptCheckpoint(msg.into()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return corrupt(format!("truncated while reading {what}"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::CorruptCheckpoint("size overflow".into()))?, what)?;
        Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>, optimizer: Option<AdamState<f32>>, meta: TrainingMeta) -> Self {
        Self { config: model.config, params: model.params.clone(), optimizer, meta }
    }

    pub fn model(&self) -> Result<Model<f32>> {
        Model::from_params(self.config, self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config,
            tensors: self
                .params
                .iter()
                .map(|(n, t)| ManifestEntry { name: n.to_string(), shape: t.shape().to_vec() })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerHeader { step: o.step }),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(json.len() + 20 + 12 * self.params.scalar_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |t: &Tensor<f32>| {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        self.params.tensors().iter().for_each(&mut put);
        if let Some(opt) = &self.optimizer {
            opt.m.iter().for_each(&mut put);
            opt.v.iter().for_each(&mut put);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8, "magic")? != CHECKPOINT_MAGIC {
            return corrupt("bad magic bytes");
        }
        let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion { found: version, expected: CHECKPOINT_VERSION });
        }
        let hlen = u64::from_le_bytes(r.take(8, "header length")?.try_into().expect("8 bytes"));
        let hlen = usize::try_from(hlen).or_else(|_| corrupt("header length overflow"))?;
        let header: Header = serde_json::from_slice(r.take(hlen, "header")?)
            .map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;

        let expected = header.config.manifest();
        if expected.len() != header.tensors.len() {
            return Err(Error::CheckpointSchema {
                name: "<manifest>".into(),
                detail: format!("{} tensors listed, configuration needs {}", header.tensors.len(), expected.len()),
            });
        }
        for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
            if name != &entry.name || shape != &entry.shape {
                return Err(Error::CheckpointSchema {
                    name: entry.name.clone(),
                    detail: format!("stored as `{}` {:?}, configuration expects `{name}` {shape:?}", entry.name, entry.shape),
                });
            }
        }

        let read_set = |r: &mut Reader, what: &str| -> Result<Vec<Tensor<f32>>> {
            header
                .tensors
                .iter()
                .map(|e| {
                    let n = e.shape.iter().product();
                    Tensor::new(&e.shape, r.floats(n, &format!("{what} `{}`", e.name))?)
                })
                .collect()
        };
        let mut params = ParamSet::new();
        for (e, t) in header.tensors.iter().zip(read_set(&mut r, "tensor")?) {
            params.push(e.name.clone(), t);
        }
        let optimizer = match header.optimizer {
            Some(OptimizerHeader { step }) => {
                let m = read_set(&mut r, "first moment")?;
                let v = read_set(&mut r, "second moment")?;
                Some(AdamState { step, m, v })
            }
            None => None,
        };
        if r.pos != bytes.len() {
            return corrupt(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self { config: header.config, params, optimizer, meta: header.meta })
    }

    /// Writes to a temporary sibling, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
