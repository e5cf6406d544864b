//! Versioned JSON checkpoints. f64 values survive a save/load round trip
//! bit-exactly (shortest-representation float printing).

use super::tensor::DenseTensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub kind: String,
    pub tensors: BTreeMap<String, DenseTensor>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            kind: kind.to_string(),
            tensors: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> std::io::Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, ckpt).map_err(std::io::Error::other)
}

pub fn load_checkpoint(path: &Path) -> std::io::Result<Checkpoint> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let ckpt: Checkpoint = serde_json::from_reader(file).map_err(std::io::Error::other)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(std::io::Error::other(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    Ok(ckpt)
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    version: u32,
    kind: String,
    model: T,
}

/// Save any serializable model under the versioned checkpoint envelope.
pub fn save_model<T: Serialize>(path: &Path, kind: &str, model: &T) -> std::io::Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let wrapper = ModelFile { version: CHECKPOINT_VERSION, kind: kind.to_string(), model };
    serde_json::to_writer(file, &wrapper).map_err(std::io::Error::other)
}

pub fn load_model<T: for<'de> Deserialize<'de>>(path: &Path, kind: &str) -> std::io::Result<T> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let wrapper: ModelFile<T> = serde_json::from_reader(file).map_err(std::io::Error::other)?;
    if wrapper.version != CHECKPOINT_VERSION {
        return Err(std::io::Error::other(format!(
            "unsupported checkpoint version {}",
            wrapper.version
        )));
    }
    if wrapper.kind != kind {
        return Err(std::io::Error::other(format!(
            "checkpoint kind '{}' does not match expected '{kind}'",
            wrapper.kind
        )));
    }
    Ok(wrapper.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut ckpt = Checkpoint::new("test");
        ckpt.tensors.insert(
            "w".into(),
            DenseTensor::row_vector(vec![0.1, -1.0 / 3.0, 2e-17, 123456.789012345678]),
        );
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        let a = &ckpt.tensors["w"].values;
        let b = &back.tensors["w"].values;
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
