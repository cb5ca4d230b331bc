//! Ground-truth auction generator for desk-scale experiments.
//!
//! An [`OracleConfig`] fixes a joint PMF over feature combinations and, for
//! each combination, the mean and standard deviation of the log bids. Bids are
//! log-normal and i.i.d. within an auction; the number of bids equals the
//! decoded bidder-count state.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::cond::sample_index;
use crate::data::record::AuctionRecord;
use crate::data::schema::{Schema, Variable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCombination {
    pub states: Vec<usize>,
    pub prob: f64,
    pub log_mu: f64,
    pub log_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub schema: Schema,
    pub combinations: Vec<OracleCombination>,
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.combinations.is_empty() {
            return Err(Error::Config("oracle declares no feature combinations".into()));
        }
        let total: f64 = self.combinations.iter().map(|c| c.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("oracle pmf sums to {total}, not 1")));
        }
        let card = self.schema.cardinalities();
        for c in &self.combinations {
            if c.states.len() != card.len() || c.states.iter().zip(&card).any(|(s, k)| s >= k) {
                return Err(Error::Config(format!("oracle combination {:?} is invalid", c.states)));
            }
            if !(c.prob >= 0.0) {
                return Err(Error::Config(format!("negative probability for {:?}", c.states)));
            }
            if !(c.log_sigma > 0.0 && c.log_sigma.is_finite() && c.log_mu.is_finite()) {
                return Err(Error::Config(format!(
                    "oracle combination {:?} needs finite mu and sigma > 0",
                    c.states
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: OracleConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lookup(&self, states: &[usize]) -> Option<&OracleCombination> {
        self.combinations.iter().find(|c| c.states == states)
    }

    /// Four-variable default: a binary `municipality` target, a 3-state
    /// `sector`, a 4-state `region` and `number of bidders` in 1..=4.
    ///
    /// The target depends strongly on sector and region, so a classifier fit
    /// on faithful synthetic rows can recover it.
    pub fn desk_default() -> Self {
        let schema = Schema::new(
            vec![
                Variable::new("municipality", &["0", "1"]),
                Variable::new("sector", &["construction", "supply", "services"]),
                Variable::new("region", &["north", "south", "east", "west"]),
                Variable::new("number of bidders", &["1", "2", "3", "4"]),
            ],
            "municipality",
        )
        .expect("static schema is valid");

        let p_sector = [0.5, 0.3, 0.2];
        let p_region = [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4], [0.25, 0.25, 0.25, 0.25]];
        let p_nb = [[0.1, 0.3, 0.35, 0.25], [0.3, 0.4, 0.2, 0.1], [0.2, 0.3, 0.3, 0.2]];
        let p_muni = [[0.85, 0.2, 0.8, 0.15], [0.1, 0.75, 0.2, 0.9], [0.7, 0.3, 0.15, 0.85]];
        let sector_mu = [0.8, -0.3, 0.2];
        let region_mu = [0.0, 0.2, -0.1, 0.3];

        let mut combinations = Vec::new();
        for m in 0..2 {
            for s in 0..3 {
                for r in 0..4 {
                    for n in 0..4 {
                        let pm = if m == 1 { p_muni[s][r] } else { 1.0 - p_muni[s][r] };
                        combinations.push(OracleCombination {
                            states: vec![m, s, r, n],
                            prob: p_sector[s] * p_region[s][r] * p_nb[s][n] * pm,
                            log_mu: 11.0 + sector_mu[s] + region_mu[r] + 0.3 * m as f64 - 0.1 * n as f64,
                            log_sigma: 0.5 + 0.15 * s as f64 + 0.1 * m as f64,
                        });
                    }
                }
            }
        }
        let cfg = OracleConfig { schema, combinations };
        debug_assert!(cfg.validate().is_ok());
        cfg
    }

    /// Exact marginal PMF of one variable.
    pub fn marginal(&self, variable: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.schema.variables[variable].cardinality()];
        for c in &self.combinations {
            p[c.states[variable]] += c.prob;
        }
        p
    }
}

/// Draws `n` auctions with ids `A0`, `A1`, ...
pub fn oracle_generate(config: &OracleConfig, n: usize, seed: u64) -> Result<Vec<AuctionRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs: Vec<f64> = config.combinations.iter().map(|c| c.prob).collect();
    let nb_var = config.schema.bidder_count_index();
    (0..n)
        .map(|i| {
            let combo = &config.combinations[sample_index(&probs, &mut rng)];
            let nb = config.schema.bidder_count(combo.states[nb_var])?;
            let bids = (0..nb)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    (combo.log_mu + combo.log_sigma * z).exp()
                })
                .collect();
            Ok(AuctionRecord {
                auction_id: format!("A{i}"),
                states: combo.states.clone(),
                bids,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_marginals_sum_to_one() {
        let cfg = OracleConfig::desk_default();
        cfg.validate().unwrap();
        for v in 0..4 {
            assert!((cfg.marginal(v).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_joint_gives_identical_features() {
        let mut cfg = OracleConfig::desk_default();
        cfg.combinations.truncate(1);
        cfg.combinations[0].prob = 1.0;
        let recs = oracle_generate(&cfg, 50, 1).unwrap();
        assert!(recs.iter().all(|r| r.states == cfg.combinations[0].states));
    }

    #[test]
    fn zero_sigma_and_bad_pmf_are_rejected() {
        let mut cfg = OracleConfig::desk_default();
        cfg.combinations[3].log_sigma = 0.0;
        assert!(oracle_generate(&cfg, 1, 0).is_err());
        let mut cfg = OracleConfig::desk_default();
        cfg.combinations[0].prob += 1e-6;
        assert!(oracle_generate(&cfg, 1, 0).is_err());
    }

    #[test]
    fn log_bid_mean_within_clt_bound() {
        // mu = 0, sigma = 1, nb = 1: 10,000 draws, sd of mean is 0.01
        let mut cfg = OracleConfig::desk_default();
        cfg.combinations = vec![OracleCombination {
            states: vec![0, 0, 0, 0],
            prob: 1.0,
            log_mu: 0.0,
            log_sigma: 1.0,
        }];
        let recs = oracle_generate(&cfg, 10_000, 42).unwrap();
        let mean = recs.iter().map(|r| r.bids[0].ln()).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.05, "{mean}");
    }

    #[test]
    fn records_respect_bidder_counts() {
        let cfg = OracleConfig::desk_default();
        let schema = &cfg.schema;
        for r in oracle_generate(&cfg, 200, 7).unwrap() {
            r.validate(schema).unwrap();
        }
    }
}
