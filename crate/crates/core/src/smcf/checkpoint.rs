use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ModelConfig;
use super::loss::LossWeights;
use super::model::Model;
use super::params::ModelParameters;

const MAGIC: &[u8; 4] = b"PFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training state stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub seed: u64,
    pub weights: LossWeights,
    pub baseline: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

/// Write `model` as: magic, version (u32 LE), header length (u64 LE), JSON
/// header, then every tensor's values as little-endian `f64` in header
/// order.
pub fn save_checkpoint(path: &Path, model: &Model<f64>, meta: &CheckpointMeta) -> Result<()> {
    let tensors = model.params.tensors();
    let header = Header {
        config: model.config,
        meta: meta.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, t) in &tensors {
            for v in t.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Model<f64>, CheckpointMeta)> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| bad("truncated"))?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(|_| bad("truncated"))?;
    let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| bad("header too large"))?;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&json)?;
    header.config.validate()?;

    let mut named = Vec::with_capacity(header.tensors.len());
    let mut buf = [0u8; 8];
    for t in header.tensors {
        let count: usize = t.shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf).map_err(|_| bad("truncated tensor data"))?;
            data.push(f64::from_le_bytes(buf));
        }
        named.push((t.name, t.shape, data));
    }
    if r.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes"));
    }
    let params = ModelParameters::from_named(&header.config, named)?;
    Ok((
        Model {
            config: header.config,
            params,
        },
        header.meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smcf::config::ModelConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            seq_len: 6,
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
            n_quant: 11,
            rel_clip: 3,
            lookahead: 6,
            dropout: 0.1,
        }
    }

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            step: 42,
            seed: 7,
            weights: LossWeights::PAPER,
            baseline: false,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = Model::<f64>::new(tiny(), 3).unwrap();
        save_checkpoint(&path, &m, &meta()).unwrap();
        let (back, meta_back) = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta_back, meta());
        let x = [0.0, 0.3, 1.0, 0.7];
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"nope").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));

        let m = Model::<f64>::new(tiny(), 3).unwrap();
        save_checkpoint(&path, &m, &meta()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }
}
