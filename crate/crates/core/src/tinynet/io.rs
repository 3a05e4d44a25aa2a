//! Model container:
//!
//! ```text
//! "TNET" | version byte (b'1') | header length: u64 LE | header JSON
//! then, per layer and per parameter tensor: value count: u64 LE | f64 LE values
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::ModelMetadata;
use super::{LayerSpec, NetError, NetworkModel, Tensor};

pub const MAGIC: &[u8; 4] = b"TNET";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u8,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    metadata: ModelMetadata,
}

pub fn encode_model(model: &NetworkModel) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        input_shape: model.input_shape().to_vec(),
        layers: model.layers().to_vec(),
        metadata: model.metadata.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serialization");
    let mut out = Vec::with_capacity(13 + json.len() + 8 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.push(b'0' + FORMAT_VERSION);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params().iter().flatten() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NetError::Truncated(what.to_owned()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<NetworkModel, NetError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(NetError::BadMagic);
    }
    let version = r.take(1, "version")?[0];
    if !version.is_ascii_digit() {
        return Err(NetError::BadMagic);
    }
    let version = version - b'0';
    if version != FORMAT_VERSION {
        return Err(NetError::UnsupportedVersion(version));
    }
    let header_len = r.u64("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| NetError::Format(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(NetError::UnsupportedVersion(header.format_version));
    }
    let mut params = Vec::with_capacity(header.layers.len());
    for (i, layer) in header.layers.iter().enumerate() {
        let mut tensors = Vec::new();
        for shape in layer.param_shapes() {
            let expected: usize = shape.iter().product();
            let count = r.u64("weight count")? as usize;
            if count != expected {
                return Err(NetError::Format(format!(
                    "layer {i}: blob holds {count} values, shape {shape:?} needs {expected}"
                )));
            }
            let raw = r.take(count.checked_mul(8).ok_or_else(|| NetError::Truncated("weights".into()))?, "weights")?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push(Tensor::new(shape, data)?);
        }
        params.push(tensors);
    }
    if r.pos != bytes.len() {
        return Err(NetError::Format(format!(
            "{} trailing bytes after the last blob",
            bytes.len() - r.pos
        )));
    }
    NetworkModel::from_parts(header.input_shape, header.layers, params, header.metadata)
}

pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<(), NetError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel, NetError> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinynet::Padding;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> NetworkModel {
        let mut m = NetworkModel::new(
            vec![1, 6, 8],
            vec![
                LayerSpec::conv(1, 2, (3, 3), 2, Padding::Same),
                LayerSpec::ReLU,
                LayerSpec::Flatten,
                LayerSpec::dense(2 * 3 * 4, 3),
                LayerSpec::LeakyReLU,
                LayerSpec::dense(3, 1),
                LayerSpec::Sigmoid,
            ],
            "io-test",
            12,
        )
        .unwrap();
        m.metadata.notes.insert("k".into(), "v".into());
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = decode_model(&encode_model(&m)).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = Tensor::new(vec![1, 6, 8], (0..48).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            assert_eq!(
                m.forward(&x).unwrap().to_bits(),
                back.forward(&x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tnet");
        save_model(&model(), &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model());
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = encode_model(&model());
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(NetError::BadMagic)));
    }

    #[test]
    fn newer_version() {
        let mut bytes = encode_model(&model());
        bytes[4] = b'2';
        assert!(matches!(decode_model(&bytes), Err(NetError::UnsupportedVersion(2))));
    }

    #[test]
    fn truncation() {
        let bytes = encode_model(&model());
        for cut in [3, 10, 40, bytes.len() - 1] {
            assert!(
                matches!(decode_model(&bytes[..cut]), Err(NetError::Truncated(_))),
                "cut at {cut}"
            );
        }
    }
}
