use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_BIDDER_COUNT_VARIABLE: &str = "number of bidders";

/// A discrete auction feature and its category labels. The position of a
/// label in `categories` is its state index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub categories: Vec<String>,
}

impl Variable {
    pub fn new(name: &str, categories: &[&str]) -> Self {
        Variable {
            name: name.to_string(),
            categories: categories.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }

    pub fn state_of(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

fn default_bid_column() -> String {
    "bid".into()
}

fn default_id_column() -> String {
    "auction_id".into()
}

fn default_bidder_count() -> String {
    DEFAULT_BIDDER_COUNT_VARIABLE.into()
}

/// Declaration of the auction table.
///
/// The bidder-count variable is an ordinary categorical variable whose labels
/// must parse as positive integers; the decoded value of its state is the
/// number of bids the auction carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<Variable>,
    #[serde(default = "default_bid_column")]
    pub bid_column: String,
    #[serde(default = "default_id_column")]
    pub auction_id_column: String,
    pub target_variable: String,
    #[serde(default = "default_bidder_count")]
    pub bidder_count_variable: String,
}

impl Schema {
    pub fn new(variables: Vec<Variable>, target_variable: &str) -> Result<Self> {
        let schema = Schema {
            variables,
            bid_column: default_bid_column(),
            auction_id_column: default_id_column(),
            target_variable: target_variable.to_string(),
            bidder_count_variable: default_bidder_count(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::Schema("no variables declared".into()));
        }
        let mut names = HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable {:?}", v.name)));
            }
            if v.cardinality() < 2 {
                return Err(Error::Schema(format!(
                    "variable {:?} has cardinality {} (< 2)",
                    v.name,
                    v.cardinality()
                )));
            }
            let mut labels = HashSet::new();
            if let Some(dup) = v.categories.iter().find(|c| !labels.insert(c.as_str())) {
                return Err(Error::Schema(format!("variable {:?} repeats category {dup:?}", v.name)));
            }
        }
        for col in [&self.bid_column, &self.auction_id_column] {
            if names.contains(col.as_str()) {
                return Err(Error::Schema(format!("column {col:?} clashes with a variable name")));
            }
        }
        let target = self.variable(&self.target_variable)?;
        if target.cardinality() != 2 {
            return Err(Error::Schema(format!(
                "target variable {:?} must be binary, has {} states",
                target.name,
                target.cardinality()
            )));
        }
        let nb = self.variable(&self.bidder_count_variable)?;
        for label in &nb.categories {
            match label.trim().parse::<usize>() {
                Ok(k) if k >= 1 => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "bidder-count label {label:?} is not a positive integer"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown variable {name:?}")))
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown variable {name:?}")))
    }

    pub fn target_index(&self) -> usize {
        self.index_of(&self.target_variable).expect("validated")
    }

    pub fn bidder_count_index(&self) -> usize {
        self.index_of(&self.bidder_count_variable).expect("validated")
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    /// Start column of each variable's one-hot segment.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.variables
            .iter()
            .map(|v| {
                let o = acc;
                acc += v.cardinality();
                o
            })
            .collect()
    }

    /// Σ cardinalities.
    pub fn width(&self) -> usize {
        self.variables.iter().map(Variable::cardinality).sum()
    }

    /// Number of bidders encoded by a state of the bidder-count variable.
    pub fn bidder_count(&self, state: usize) -> Result<usize> {
        let v = self.variable(&self.bidder_count_variable)?;
        v.categories
            .get(state)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Data(format!("bidder-count state {state} out of range")))
    }

    /// SHA-256 over the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }
}
