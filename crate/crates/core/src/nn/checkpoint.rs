//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form and parsed exactly, so save/load is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::Matrix;
use super::params::ParamStore;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("checkpoint is not valid: {0}")]
    Format(#[from] serde_json::Error),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    Kind { found: String, expected: String },
    #[error("parameter {name}: {message}")]
    Parameter { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    pub params: Vec<NamedTensor>,
}

impl ModelCheckpoint {
    pub fn capture(kind: &str, config: serde_json::Value, store: &ParamStore) -> Self {
        let params = store
            .iter()
            .map(|(name, p)| NamedTensor { name: name.to_string(), rows: p.value.rows(), cols: p.value.cols(), data: p.value.data().to_vec() })
            .collect();
        ModelCheckpoint { format_version: FORMAT_VERSION, kind: kind.to_string(), config, params }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        if self.kind != kind {
            return Err(CheckpointError::Kind { found: self.kind.clone(), expected: kind.to_string() });
        }
        Ok(())
    }

    /// Copies stored values into a store built from the same config.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<(), CheckpointError> {
        if self.params.len() != store.len() {
            return Err(CheckpointError::Parameter {
                name: "*".into(),
                message: format!("{} tensors for {} parameters", self.params.len(), store.len()),
            });
        }
        for t in &self.params {
            let id = store
                .id(&t.name)
                .ok_or_else(|| CheckpointError::Parameter { name: t.name.clone(), message: "unknown parameter".into() })?;
            let p = store.get_mut(id);
            if p.value.shape() != (t.rows, t.cols) {
                return Err(CheckpointError::Parameter {
                    name: t.name.clone(),
                    message: format!("shape {}x{} does not match {}x{}", t.rows, t.cols, p.value.rows(), p.value.cols()),
                });
            }
            p.value = Matrix::from_vec(t.rows, t.cols, t.data.clone())
                .map_err(|e| CheckpointError::Parameter { name: t.name.clone(), message: e.to_string() })?;
            p.zero_grad();
        }
        Ok(())
    }

    pub fn write_to(&self, w: impl Write) -> Result<(), CheckpointError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_reader(r)?;
        let found = value.get("format_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(CheckpointError::Version { found, expected: FORMAT_VERSION });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut w)?;
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::read_from(BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        store.add_xavier("a", 7, 5, &mut rng);
        store.add("b", Matrix::from_vec(1, 3, vec![0.1 + 0.2, 1e-300, -123456.789e10]).unwrap());
        let ckpt = ModelCheckpoint::capture("toy", serde_json::json!({"d": 5}), &store);
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let back = ModelCheckpoint::read_from(buf.as_slice()).unwrap();
        let mut fresh = ParamStore::new();
        fresh.add_zeros("a", 7, 5);
        fresh.add_zeros("b", 1, 3);
        back.restore_into(&mut fresh).unwrap();
        for ((_, p), (_, q)) in store.iter().zip(fresh.iter()) {
            let a: Vec<u64> = p.value.data().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = q.value.data().iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn version_mismatch_fails_loudly() {
        let text = r#"{"format_version":99,"kind":"toy","config":null,"params":[]}"#;
        let err = ModelCheckpoint::read_from(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("version 99"));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut store = ParamStore::new();
        store.add_zeros("a", 2, 2);
        let ckpt = ModelCheckpoint::capture("toy", serde_json::Value::Null, &store);
        let mut other = ParamStore::new();
        other.add_zeros("a", 3, 2);
        assert!(ckpt.restore_into(&mut other).is_err());
    }
}
