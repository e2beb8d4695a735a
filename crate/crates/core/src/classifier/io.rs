//! `.scm` model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SCMODEL\0"
//! version    u32      1
//! config_len u32      length of the ModelConfig JSON that follows
//! config     bytes    ModelConfig as JSON
//! hash_len   u32      0 when the model has no dataset hash
//! hash       bytes    dataset config hash, UTF-8
//! count      u64      number of parameters
//! params     f64 × count, layer order (kernels, bias per block, then dense)
//! ```

use std::fs;
use std::path::Path;

use super::model::{ConvLayer, DenseLayer, Model, ModelConfig};
use super::{ClassifierError, Tensor};

pub const MAGIC: &[u8; 8] = b"SCMODEL\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let config = serde_json::to_vec(&model.config).expect("config serializes");
    let hash = model.dataset_hash.as_deref().unwrap_or("").as_bytes();
    let count = model.parameter_count();
    let mut out = Vec::with_capacity(32 + config.len() + hash.len() + 8 * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(hash.len() as u32).to_le_bytes());
    out.extend_from_slice(hash);
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for t in model.parameters() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ClassifierError> {
        if self.buf.len() < n {
            return Err(ClassifierError::ModelFormat(format!("truncated {what}")));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, ClassifierError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model, ClassifierError> {
    let mut cur = Cursor { buf: bytes };
    if cur.take(8, "magic")? != MAGIC {
        return Err(ClassifierError::ModelFormat("not a model file (bad magic)".into()));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(ClassifierError::ModelFormat(format!(
            "unsupported model format version {version}"
        )));
    }
    let config_len = cur.u32("config length")? as usize;
    let config: ModelConfig = serde_json::from_slice(cur.take(config_len, "config")?)
        .map_err(|e| ClassifierError::ModelFormat(format!("bad config JSON: {e}")))?;
    config
        .validate()
        .map_err(|e| ClassifierError::ModelFormat(e.to_string()))?;
    let hash_len = cur.u32("hash length")? as usize;
    let hash = std::str::from_utf8(cur.take(hash_len, "hash")?)
        .map_err(|_| ClassifierError::ModelFormat("dataset hash is not UTF-8".into()))?;
    let dataset_hash = (!hash.is_empty()).then(|| hash.to_owned());

    let shapes = config.param_shapes();
    let expected: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let count = cur.u64("parameter count")?;
    if count != expected as u64 {
        return Err(ClassifierError::ModelFormat(format!(
            "file holds {count} parameters, config implies {expected}"
        )));
    }
    let mut tensors = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let n: usize = shape.iter().product();
        let raw = cur.take(n * 8, "parameters")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor::new(shape, data)?);
    }
    if !cur.buf.is_empty() {
        return Err(ClassifierError::ModelFormat(format!(
            "{} trailing bytes after parameters",
            cur.buf.len()
        )));
    }

    let mut it = tensors.into_iter();
    let mut convs = Vec::with_capacity(config.conv_channels.len());
    for _ in &config.conv_channels {
        let kernels = it.next().expect("shape list");
        let bias = it.next().expect("shape list");
        convs.push(ConvLayer { kernels, bias });
    }
    let dense = DenseLayer {
        weight: it.next().expect("shape list"),
        bias: it.next().expect("shape list"),
    };
    Ok(Model {
        config,
        convs,
        dense,
        dataset_hash,
    })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ClassifierError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes)
}
