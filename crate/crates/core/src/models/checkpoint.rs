//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic "MGANCKPT"
//! u32       format version (1)
//! u64       header length in bytes
//! ...       header: UTF-8 JSON {architecture, config, config_hash, epoch, tensors}
//! ...       tensor data: f32 values, row-major, in table order
//! ```
//!
//! Each tensor table entry is `{name, shape}`; names are prefixed with the
//! network role (`generator.`, `degenerator.`, `discriminator.`). Restoring a
//! network checks the stored architecture description and every name and
//! shape, and fails on any disagreement.

use std::fs;
use std::io;
use std::path::Path;

use ndarray::ArrayViewD;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{cast, DiscrimConfig, Discriminator, MaskNet, MaskNetConfig, Real, Stateful};

const MAGIC: &[u8; 8] = b"MGANCKPT";
const VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),
    #[error("checkpoint has no {0} network")]
    MissingNetwork(&'static str),
}

/// Architecture description stored with every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub generator: MaskNetConfig,
    pub degenerator: Option<MaskNetConfig>,
    pub discriminator: DiscrimConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    config: serde_json::Value,
    config_hash: String,
    epoch: usize,
    tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub architecture: Architecture,
    /// Snapshot of the run configuration that produced the weights.
    pub config: serde_json::Value,
    pub config_hash: String,
    pub epoch: usize,
    pub tensors: Vec<TensorEntry>,
    data: Vec<Vec<f32>>,
}

/// Hex SHA-256 of the compact JSON serialization of `config`.
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("json values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn collect<R: Real>(prefix: &str, net: &impl Stateful<R>, tensors: &mut Vec<TensorEntry>, data: &mut Vec<Vec<f32>>) {
    net.visit_state(&mut |name, a: ArrayViewD<'_, R>| {
        tensors.push(TensorEntry {
            name: format!("{prefix}.{name}"),
            shape: a.shape().to_vec(),
        });
        data.push(a.iter().map(|v| v.to_f64_lossless() as f32).collect());
    });
}

impl Checkpoint {
    pub fn from_networks<R: Real>(
        generator: &MaskNet<R>,
        degenerator: Option<&MaskNet<R>>,
        discriminator: &Discriminator<R>,
        config: serde_json::Value,
        epoch: usize,
    ) -> Self {
        let mut tensors = Vec::new();
        let mut data = Vec::new();
        collect("generator", generator, &mut tensors, &mut data);
        if let Some(n) = degenerator {
            collect("degenerator", n, &mut tensors, &mut data);
        }
        collect("discriminator", discriminator, &mut tensors, &mut data);
        Self {
            architecture: Architecture {
                generator: generator.config.clone(),
                degenerator: degenerator.map(|n| n.config.clone()),
                discriminator: discriminator.config.clone(),
            },
            config_hash: config_hash(&config),
            config,
            epoch,
            tensors,
            data,
        }
    }

    /// File name embedding the epoch and a short config hash.
    pub fn file_name(&self) -> String {
        format!("epoch{:04}-{}.ckpt", self.epoch, &self.config_hash[..12])
    }

    pub fn has_degenerator(&self) -> bool {
        self.architecture.degenerator.is_some()
    }

    /// Fails unless the stored architecture equals `expected`.
    pub fn check_architecture(&self, expected: &Architecture) -> Result<(), CheckpointError> {
        if &self.architecture != expected {
            return Err(CheckpointError::ArchMismatch(format!(
                "stored {:?}, expected {:?}",
                self.architecture, expected
            )));
        }
        Ok(())
    }

    fn restore<R: Real, N: Stateful<R>>(&self, prefix: &str, net: &mut N) -> Result<(), CheckpointError> {
        let mut error = None;
        let mut expected = Vec::new();
        net.visit_state(&mut |name, a| expected.push((format!("{prefix}.{name}"), a.shape().to_vec())));
        let stored: Vec<usize> = (0..self.tensors.len())
            .filter(|&i| self.tensors[i].name.starts_with(&format!("{prefix}.")))
            .collect();
        if stored.len() != expected.len() {
            return Err(CheckpointError::ArchMismatch(format!(
                "{prefix}: {} stored tensors, network has {}",
                stored.len(),
                expected.len()
            )));
        }
        for (&i, (name, shape)) in stored.iter().zip(&expected) {
            let entry = &self.tensors[i];
            if &entry.name != name || &entry.shape != shape {
                return Err(CheckpointError::ArchMismatch(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    entry.name, entry.shape, name, shape
                )));
            }
        }
        let mut it = stored.iter();
        net.visit_state_mut(&mut |_, mut a| {
            let values = &self.data[*it.next().expect("counted")];
            if values.len() != a.len() {
                error = Some(CheckpointError::Corrupt("tensor length".into()));
                return;
            }
            for (d, &v) in a.iter_mut().zip(values) {
                *d = cast(v as f64);
            }
        });
        error.map_or(Ok(()), Err)
    }

    pub fn generator<R: Real>(&self) -> Result<MaskNet<R>, CheckpointError> {
        let mut net = MaskNet::init(self.architecture.generator.clone(), 0);
        self.restore("generator", &mut net)?;
        Ok(net)
    }

    pub fn degenerator<R: Real>(&self) -> Result<MaskNet<R>, CheckpointError> {
        let config = self
            .architecture
            .degenerator
            .clone()
            .ok_or(CheckpointError::MissingNetwork("degenerator"))?;
        let mut net = MaskNet::init(config, 0);
        self.restore("degenerator", &mut net)?;
        Ok(net)
    }

    pub fn discriminator<R: Real>(&self) -> Result<Discriminator<R>, CheckpointError> {
        let mut net = Discriminator::init(self.architecture.discriminator.clone(), 0);
        self.restore("discriminator", &mut net)?;
        Ok(net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            architecture: self.architecture.clone(),
            config: self.config.clone(),
            config_hash: self.config_hash.clone(),
            epoch: self.epoch,
            tensors: self.tensors.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let n_values: usize = self.data.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(20 + header.len() + 4 * n_values);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.data.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = 20usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt("header length exceeds file".into()))?;
        let header: Header = serde_json::from_slice(&bytes[20..header_end])
            .map_err(|e| CheckpointError::Corrupt(format!("header: {e}")))?;
        let mut data = Vec::with_capacity(header.tensors.len());
        let mut offset = header_end;
        for t in &header.tensors {
            let n: usize = t.shape.iter().product();
            let end = offset + 4 * n;
            if end > bytes.len() {
                return Err(CheckpointError::Corrupt(format!("tensor {} truncated", t.name)));
            }
            data.push(
                bytes[offset..end]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            );
            offset = end;
        }
        if offset != bytes.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        if config_hash(&header.config) != header.config_hash {
            return Err(CheckpointError::Corrupt("config hash does not match config".into()));
        }
        Ok(Self {
            architecture: header.architecture,
            config: header.config,
            config_hash: header.config_hash,
            epoch: header.epoch,
            tensors: header.tensors,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
