//! On-disk formats for trained models and preprocessed datasets.
//!
//! Every file is JSON wrapped in an envelope carrying a format version and a
//! [`Provenance`] block, so any artifact can be traced to the crate version,
//! seed and configuration that produced it.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bidnet::BidNetModel;
use crate::ctwgan::CtwganModel;
use crate::data::{EncodedDataset, SplitManifest};
use crate::error::{Error, Result};
use crate::tvae::TvaeModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: config_hash.into(),
        }
    }
}

/// SHA-256 (hex) of the JSON serialization of `value`.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Ctwgan(CtwganModel),
    Tvae(TvaeModel),
    Bidnet(BidNetModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Ctwgan(_) => "ctwgan",
            Model::Tvae(_) => "tvae",
            Model::Bidnet(_) => "bidnet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub provenance: Provenance,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCache {
    pub format_version: u32,
    pub provenance: Provenance,
    /// Full dataset with the bid transform fitted on the training split.
    pub dataset: EncodedDataset,
    pub split: SplitManifest,
}

impl DatasetCache {
    pub fn train(&self) -> EncodedDataset {
        self.dataset.subset(&self.split.train)
    }

    pub fn test(&self) -> EncodedDataset {
        self.dataset.subset(&self.split.test)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_versioned<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw.get("format_version").and_then(serde_json::Value::as_u64);
    if found != Some(u64::from(FORMAT_VERSION)) {
        return Err(Error::Version {
            what,
            expected: FORMAT_VERSION,
            found: found.map_or(0, |v| u32::try_from(v).unwrap_or(u32::MAX)),
        });
    }
    // parse from text rather than the Value so floats keep full precision
    Ok(serde_json::from_str(&text)?)
}

pub fn save_model(path: impl AsRef<Path>, model: Model, provenance: Provenance) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        provenance,
        model,
    };
    write_json(path.as_ref(), &file)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    read_versioned(path.as_ref(), "model file")
}

pub fn save_dataset(
    path: impl AsRef<Path>,
    dataset: EncodedDataset,
    split: SplitManifest,
    provenance: Provenance,
) -> Result<()> {
    let cache = DatasetCache {
        format_version: FORMAT_VERSION,
        provenance,
        dataset,
        split,
    };
    write_json(path.as_ref(), &cache)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetCache> {
    read_versioned(path.as_ref(), "dataset cache")
}
