//! Parameter checkpoints in the chunked container format: chunks `config`
//! (layer config JSON), `shapes` (tensor list JSON) and `data` (flat
//! little-endian f64 values, complex tensors as `re, im` pairs). Callers may
//! attach further chunks, e.g. optimizer state.

use super::params::{LayerConfig, TensorInfo, UgcnParams};
use crate::caseio::container::{decode_f64s, encode_f64s, Container, ContainerError};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("checkpoint shapes do not match its config: {0}")]
    ShapeMismatch(String),
    #[error("bad checkpoint metadata: {0}")]
    Metadata(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: LayerConfig,
    pub params: UgcnParams,
    /// Additional named chunks.
    pub extra: Vec<(String, Vec<u8>)>,
}

impl Checkpoint {
    pub fn new(config: LayerConfig, params: UgcnParams) -> Self {
        Self {
            config,
            params,
            extra: Vec::new(),
        }
    }

    pub fn extra(&self, tag: &str) -> Option<&[u8]> {
        self.extra.iter().find(|(t, _)| t == tag).map(|(_, d)| d.as_slice())
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut c = Container::default();
    c.push("config", serde_json::to_vec(&ck.config).expect("config serializes"));
    c.push("shapes", serde_json::to_vec(&ck.params.tensors()).expect("shapes serialize"));
    c.push("data", encode_f64s(ck.params.to_flat()));
    for (tag, data) in &ck.extra {
        c.push(tag, data.clone());
    }
    c.encode(CHECKPOINT_VERSION)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let c = Container::decode(bytes, CHECKPOINT_VERSION)?;
    let config: LayerConfig =
        serde_json::from_slice(c.get("config")?).map_err(|e| CheckpointError::Metadata(e.to_string()))?;
    config.validate().map_err(|e| CheckpointError::Metadata(e.to_string()))?;
    let shapes: Vec<TensorInfo> =
        serde_json::from_slice(c.get("shapes")?).map_err(|e| CheckpointError::Metadata(e.to_string()))?;
    let mut params = UgcnParams::init(&config, 0);
    let expected = params.tensors();
    if shapes != expected {
        let diff = shapes
            .iter()
            .zip(&expected)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("{} is {}x{}, config implies {}x{}", a.name, a.rows, a.cols, b.rows, b.cols))
            .unwrap_or_else(|| format!("{} tensors stored, {} expected", shapes.len(), expected.len()));
        return Err(CheckpointError::ShapeMismatch(diff));
    }
    let flat = decode_f64s(c.get("data")?)?;
    if flat.len() != params.n_real() {
        return Err(CheckpointError::ShapeMismatch(format!(
            "{} values stored, {} expected",
            flat.len(),
            params.n_real()
        )));
    }
    params.set_flat(&flat);
    let extra = c
        .chunks
        .into_iter()
        .filter(|(t, _)| !matches!(t.as_str(), "config" | "shapes" | "data"))
        .collect();
    Ok(Checkpoint { config, params, extra })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let cfg = LayerConfig {
            d: 6,
            ..LayerConfig::fdi()
        };
        let mut ck = Checkpoint::new(cfg.clone(), UgcnParams::init(&cfg, 4));
        ck.extra.push(("optimizer".into(), vec![1, 2, 3]));
        let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
        assert_eq!(back.params, ck.params);
        assert_eq!(back.config, cfg);
        assert_eq!(back.extra("optimizer"), Some(&[1u8, 2, 3][..]));
    }
}
