//! Case-file parsing and dataset persistence.
//!
//! Datasets are written either as JSON (`.ugcn.json`) or as a chunked binary
//! container (`.ugds`, also read from `.bin`) holding a JSON `meta` chunk plus the phasor
//! tensors as raw little-endian `re, im` pairs.

pub mod case;
pub mod container;

pub use case::{
    bundled_case, bundled_graph, bundled_kind, load_case, parse_case, to_grid_graph, BranchRecord, BusRecord,
    CaseError, CaseFile, BUNDLED_CASES,
};
pub use container::{Container, ContainerError};

use crate::linalg::C64;
use crate::scenario::{ScenarioSet, SCHEMA_VERSION};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ContainerError> for DatasetError {
    fn from(e: ContainerError) -> Self {
        match e {
            ContainerError::SchemaVersionMismatch { found, expected } => Self::SchemaVersionMismatch { found, expected },
            other => Self::CorruptFile(other.to_string()),
        }
    }
}

/// Extension of the binary dataset container.
pub const BINARY_EXT: &str = "ugds";

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == BINARY_EXT || e == "bin")
}

pub fn encode_dataset_json(set: &ScenarioSet) -> Vec<u8> {
    serde_json::to_vec(set).expect("scenario sets serialize")
}

pub fn decode_dataset_json(bytes: &[u8]) -> Result<ScenarioSet, DatasetError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| DatasetError::CorruptFile(e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| DatasetError::CorruptFile("missing schema_version".into()))? as u32;
    if found != SCHEMA_VERSION {
        return Err(DatasetError::SchemaVersionMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| DatasetError::CorruptFile(e.to_string()))
}

fn flatten(rows: &[Vec<C64>]) -> Vec<C64> {
    rows.iter().flatten().copied().collect()
}

fn unflatten(flat: Vec<C64>, t: usize, n: usize) -> Result<Vec<Vec<C64>>, DatasetError> {
    if flat.len() != t * n {
        return Err(DatasetError::CorruptFile(format!(
            "tensor has {} entries, expected {t}x{n}",
            flat.len()
        )));
    }
    Ok(flat.chunks(n.max(1)).map(<[C64]>::to_vec).take(t).collect())
}

pub fn encode_dataset_bin(set: &ScenarioSet) -> Vec<u8> {
    let mut meta = set.clone();
    meta.true_states.clear();
    meta.estimates.clear();
    let mut c = Container::default();
    c.push("meta", serde_json::to_vec(&meta).expect("scenario sets serialize"));
    c.push("true_states", container::encode_complex(&flatten(&set.true_states)));
    c.push("estimates", container::encode_complex(&flatten(&set.estimates)));
    c.encode(SCHEMA_VERSION)
}

pub fn decode_dataset_bin(bytes: &[u8]) -> Result<ScenarioSet, DatasetError> {
    let c = Container::decode(bytes, SCHEMA_VERSION)?;
    let mut set: ScenarioSet =
        serde_json::from_slice(c.get("meta")?).map_err(|e| DatasetError::CorruptFile(e.to_string()))?;
    let (t, n) = (set.t_total, set.graph.n());
    set.true_states = unflatten(container::decode_complex(c.get("true_states")?)?, t, n)?;
    set.estimates = unflatten(container::decode_complex(c.get("estimates")?)?, t, n)?;
    Ok(set)
}

/// Writes JSON or the binary container depending on the file extension.
pub fn save_dataset(path: impl AsRef<Path>, set: &ScenarioSet) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let bytes = if is_binary(path) {
        encode_dataset_bin(set)
    } else {
        encode_dataset_json(set)
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<ScenarioSet, DatasetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    if is_binary(path) {
        decode_dataset_bin(&bytes)
    } else {
        decode_dataset_json(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{attach_attacks, generate_scenario, AttackConfig, ScenarioConfig};

    fn sample_set() -> ScenarioSet {
        let g = bundled_graph("ieee30").unwrap().canonicalized();
        let cfg = ScenarioConfig {
            t_total: 12,
            pmu_count: Some(15),
            ..ScenarioConfig::default()
        };
        let mut set = generate_scenario("ieee30", &g, &[], &cfg, 5, 0).unwrap();
        attach_attacks(&mut set, &AttackConfig::default(), 5, 0).unwrap();
        set
    }

    #[test]
    fn round_trips_are_bitwise() {
        let set = sample_set();
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.ugcn.json", "a.ugds"] {
            let p = dir.path().join(name);
            save_dataset(&p, &set).unwrap();
            let back = load_dataset(&p).unwrap();
            assert_eq!(back, set, "{name}");
            for (a, b) in back.estimates.iter().flatten().zip(set.estimates.iter().flatten()) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn version_and_corruption() {
        let mut set = sample_set();
        set.schema_version = 0;
        let json = encode_dataset_json(&set);
        assert!(matches!(
            decode_dataset_json(&json),
            Err(DatasetError::SchemaVersionMismatch { found: 0, expected: 1 })
        ));
        let bin = encode_dataset_bin(&sample_set());
        assert!(matches!(
            decode_dataset_bin(&bin[..bin.len() / 2]),
            Err(DatasetError::CorruptFile(_))
        ));
        let mut old = bin.clone();
        old[4..8].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            decode_dataset_bin(&old),
            Err(DatasetError::SchemaVersionMismatch { found: 0, .. })
        ));
    }
}
