//! Chunked binary container.
//!
//! ```text
//! "UGCN" | u32 version | u64 payload length | u32 CRC32(payload) | payload
//! payload = chunk*
//! chunk   = u16 tag length | tag (UTF-8) | u64 data length | data
//! ```
//!
//! All integers are little-endian.

use crate::linalg::C64;

pub const MAGIC: &[u8; 4] = b"UGCN";
const HEADER_LEN: usize = 4 + 4 + 8 + 4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ContainerError {
    #[error("not a UGCN container")]
    BadMagic,
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("missing chunk `{0}`")]
    MissingChunk(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub chunks: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn push(&mut self, tag: &str, data: Vec<u8>) {
        self.chunks.push((tag.to_string(), data));
    }

    pub fn get(&self, tag: &str) -> Result<&[u8], ContainerError> {
        self.chunks
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| ContainerError::MissingChunk(tag.to_string()))
    }

    pub fn encode(&self, version: u32) -> Vec<u8> {
        let mut payload = Vec::new();
        for (tag, data) in &self.chunks {
            payload.extend_from_slice(&(tag.len() as u16).to_le_bytes());
            payload.extend_from_slice(tag.as_bytes());
            payload.extend_from_slice(&(data.len() as u64).to_le_bytes());
            payload.extend_from_slice(data);
        }
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&version.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(bytes: &[u8], expected_version: u32) -> Result<Self, ContainerError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(ContainerError::CorruptFile("truncated header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != expected_version {
            return Err(ContainerError::SchemaVersionMismatch {
                found: version,
                expected: expected_version,
            });
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != len {
            return Err(ContainerError::CorruptFile(format!(
                "payload is {} bytes, header says {len}",
                payload.len()
            )));
        }
        if crc32fast::hash(payload) != crc {
            return Err(ContainerError::CorruptFile("checksum mismatch".into()));
        }
        let mut chunks = Vec::new();
        let mut pos = 0;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], ContainerError> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| ContainerError::CorruptFile("chunk overruns payload".into()))?;
            let s = &payload[*pos..end];
            *pos = end;
            Ok(s)
        };
        while pos < payload.len() {
            let tag_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            let tag = std::str::from_utf8(take(&mut pos, tag_len)?)
                .map_err(|_| ContainerError::CorruptFile("chunk tag is not UTF-8".into()))?
                .to_string();
            let data_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
            let data = take(&mut pos, data_len)?.to_vec();
            chunks.push((tag, data));
        }
        Ok(Self { chunks })
    }
}

pub fn encode_f64s(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values.into_iter().flat_map(f64::to_le_bytes).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Result<Vec<f64>, ContainerError> {
    if bytes.len() % 8 != 0 {
        return Err(ContainerError::CorruptFile("f64 array has a ragged length".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Complex arrays are stored as interleaved `re, im` pairs.
pub fn encode_complex(values: &[C64]) -> Vec<u8> {
    encode_f64s(values.iter().flat_map(|z| [z.re, z.im]))
}

pub fn decode_complex(bytes: &[u8]) -> Result<Vec<C64>, ContainerError> {
    let flat = decode_f64s(bytes)?;
    if flat.len() % 2 != 0 {
        return Err(ContainerError::CorruptFile("complex array has odd length".into()));
    }
    Ok(flat.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut c = Container::default();
        c.push("meta", b"{}".to_vec());
        c.push("x", encode_complex(&[C64::new(1.5, -2.0), C64::new(0.0, 1e-300)]));
        c
    }

    #[test]
    fn round_trip() {
        let bytes = sample().encode(1);
        let back = Container::decode(&bytes, 1).unwrap();
        assert_eq!(back, sample());
        assert_eq!(
            decode_complex(back.get("x").unwrap()).unwrap()[1],
            C64::new(0.0, 1e-300)
        );
    }

    #[test]
    fn version_and_corruption() {
        let bytes = sample().encode(0);
        assert_eq!(
            Container::decode(&bytes, 1),
            Err(ContainerError::SchemaVersionMismatch {
                found: 0,
                expected: 1
            })
        );
        let bytes = sample().encode(1);
        assert!(matches!(
            Container::decode(&bytes[..bytes.len() - 3], 1),
            Err(ContainerError::CorruptFile(_))
        ));
        let mut flipped = bytes.clone();
        *flipped.last_mut().unwrap() ^= 0xff;
        assert!(matches!(
            Container::decode(&flipped, 1),
            Err(ContainerError::CorruptFile(_))
        ));
        assert_eq!(Container::decode(b"nope", 1), Err(ContainerError::BadMagic));
    }
}
