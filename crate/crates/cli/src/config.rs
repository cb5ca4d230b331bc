use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use auctionsynth::bidnet::BidNetConfig;
use auctionsynth::ctwgan::GanConfig;
use auctionsynth::data::OracleConfig;
use auctionsynth::persist::{config_hash, Provenance};
use auctionsynth::tvae::TvaeConfig;
use auctionsynth::validate::InceptionConfig;

use crate::UsageError;

/// Name accepted by `oracle` for the built-in oracle.
pub const BUILTIN_ORACLE: &str = "desk_default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ctwgan,
    Tvae,
    Bidnet,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ctwgan => "ctwgan",
            ModelKind::Tvae => "tvae",
            ModelKind::Bidnet => "bidnet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Feature synthesizer to score (`ctwgan` or `tvae`).
    pub synthesizer: ModelKind,
    /// Synthetic rows generated for inception scoring and fake bids.
    pub synthetic_rows: usize,
    pub inception: InceptionConfig,
    pub qq_levels: usize,
    pub baseline_max_depth: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            synthesizer: ModelKind::Ctwgan,
            synthetic_rows: 100_000,
            inception: InceptionConfig::default(),
            qq_levels: 1000,
            baseline_max_depth: 12,
        }
    }
}

/// Everything a command needs, read from one TOML file. Relative paths are
/// resolved against the directory holding that file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Schema TOML, required with `data`.
    pub schema: Option<PathBuf>,
    /// Bid-level CSV.
    pub data: Option<PathBuf>,
    /// `desk_default` or a path to an oracle JSON file; used instead of `data`.
    pub oracle: Option<String>,
    pub oracle_auctions: usize,
    pub test_fraction: f64,
    pub model_kind: Option<ModelKind>,
    pub ctwgan: GanConfig,
    pub tvae: TvaeConfig,
    pub bidnet: BidNetConfig,
    pub validate: ValidateConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            schema: None,
            data: None,
            oracle: None,
            oracle_auctions: 5000,
            test_fraction: 0.2,
            model_kind: None,
            ctwgan: GanConfig::default(),
            tvae: TvaeConfig::default(),
            bidnet: BidNetConfig::default(),
            validate: ValidateConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    fn check(&self) -> Result<()> {
        let must_exist = |p: &Path, what: &str| -> Result<()> {
            let full = self.resolve(p);
            if !full.exists() {
                return Err(UsageError(format!("{what} {} does not exist", full.display())).into());
            }
            Ok(())
        };
        if let Some(s) = &self.schema {
            must_exist(s, "schema")?;
        }
        if let Some(d) = &self.data {
            must_exist(d, "data file")?;
        }
        if let Some(o) = &self.oracle {
            if o != BUILTIN_ORACLE {
                must_exist(Path::new(o), "oracle config")?;
            }
        }
        if self.data.is_some() && self.oracle.is_some() {
            return Err(UsageError("set either `data` or `oracle`, not both".into()).into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(UsageError(format!("test_fraction {} not in [0, 1)", self.test_fraction)).into());
        }
        Ok(())
    }

    pub fn oracle_config(&self) -> Result<Option<OracleConfig>> {
        Ok(match self.oracle.as_deref() {
            None => None,
            Some(BUILTIN_ORACLE) => Some(OracleConfig::desk_default()),
            Some(p) => Some(OracleConfig::load(self.resolve(Path::new(p)))?),
        })
    }

    /// Hash of the effective configuration. The output directory is left out
    /// so the same run written to two places hashes the same.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        Ok(config_hash(&c)?)
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Ok(Provenance::new(self.seed, self.hash()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_fields() {
        let cfg = RunConfig::from_toml_str("seed = 3\noracle = \"desk_default\"\n", Path::new(".")).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.ctwgan, GanConfig::default());
        assert!(RunConfig::from_toml_str("sede = 3\n", Path::new(".")).is_err());
        assert!(RunConfig::from_toml_str("model_kind = \"gan\"\n", Path::new(".")).is_err());
    }

    #[test]
    fn hash_ignores_out_dir() {
        let a = RunConfig::from_toml_str("out_dir = \"a\"\n", Path::new(".")).unwrap();
        let b = RunConfig::from_toml_str("out_dir = \"b\"\n", Path::new(".")).unwrap();
        let c = RunConfig::from_toml_str("seed = 1\n", Path::new(".")).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn missing_paths_are_rejected() {
        let err = RunConfig::from_toml_str("schema = \"nope.toml\"\n", Path::new("/nonexistent")).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
