//! Synthetic auction generation: features from a trained synthesizer, bid
//! counts read from the generated bidder-count state, and bids drawn from
//! BidNet's Gaussians.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bidnet::{predict_theta, BidNetModel, GaussianParams};
use crate::ctwgan::{sample_features, CtwganModel};
use crate::data::{decode_row, AuctionRecord, BidTransform, ConditionalVector, Schema};
use crate::error::{Error, Result};
use crate::tvae::{sample_features_tvae, TvaeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAuction {
    pub feature_states: Vec<usize>,
    pub theta: GaussianParams,
    /// Raw bid values (de-standardized and exponentiated).
    pub bids: Vec<f64>,
}

impl SyntheticAuction {
    pub fn to_record(&self, auction_id: String) -> AuctionRecord {
        AuctionRecord {
            auction_id,
            states: self.feature_states.clone(),
            bids: self.bids.clone(),
        }
    }
}

/// Feature source for [`generate_auctions`].
#[derive(Debug, Clone, Copy)]
pub enum Synthesizer<'a> {
    Ctwgan(&'a CtwganModel),
    Tvae(&'a TvaeModel),
}

impl Synthesizer<'_> {
    pub fn schema(&self) -> Result<&Schema> {
        match self {
            Synthesizer::Ctwgan(m) => Ok(&m.schema),
            Synthesizer::Tvae(m) => m
                .schema
                .as_ref()
                .ok_or_else(|| Error::Config("TVAE model carries no schema".into())),
        }
    }

    pub fn fingerprint(&self) -> Result<String> {
        match self {
            Synthesizer::Ctwgan(m) => Ok(m.schema_fingerprint.clone()),
            Synthesizer::Tvae(m) => m
                .schema_fingerprint
                .clone()
                .ok_or_else(|| Error::Config("TVAE model carries no schema".into())),
        }
    }

    /// One-hot feature rows. Only the GAN honors `manual_cond`; passing one
    /// with a TVAE is a configuration error.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        manual_cond: Option<&ConditionalVector>,
    ) -> Result<crate::nn::Tensor> {
        match self {
            Synthesizer::Ctwgan(m) => sample_features(m, n, rng, manual_cond),
            Synthesizer::Tvae(m) => {
                if manual_cond.is_some() {
                    return Err(Error::Config("the TVAE cannot sample conditionally".into()));
                }
                sample_features_tvae(m, n, rng)
            }
        }
    }
}

/// `nb` i.i.d. draws from `N(mu, sigma^2)` in standardized log-bid units.
pub fn sample_bids<R: Rng + ?Sized>(theta: GaussianParams, nb: usize, rng: &mut R) -> Result<Vec<f64>> {
    theta.validate()?;
    if nb == 0 {
        return Err(Error::Data("an auction needs at least one bidder".into()));
    }
    let sd = theta.sigma2.sqrt();
    Ok((0..nb)
        .map(|_| theta.mu + sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

pub fn generate_auctions<R: Rng + ?Sized>(
    synthesizer: Synthesizer,
    bidnet: &BidNetModel,
    transform: &BidTransform,
    n: usize,
    rng: &mut R,
    manual_cond: Option<&ConditionalVector>,
) -> Result<Vec<SyntheticAuction>> {
    let fp = synthesizer.fingerprint()?;
    if fp != bidnet.schema_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: fp,
            found: bidnet.schema_fingerprint.clone(),
        });
    }
    let schema = synthesizer.schema()?;
    let rows = synthesizer.sample(n, rng, manual_cond)?;
    let thetas = predict_theta(bidnet, &rows)?;
    let nb_var = schema.bidder_count_index();
    rows.iter_rows()
        .zip(thetas)
        .map(|(row, theta)| {
            let states = decode_row(schema, row)?;
            let nb = schema.bidder_count(states[nb_var])?;
            let bids = sample_bids(theta, nb, rng)?
                .into_iter()
                .map(|z| transform.inverse(z))
                .collect::<Vec<f64>>();
            if let Some(b) = bids.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
                return Err(Error::Numerical(format!(
                    "synthetic bid {b} is not a positive finite value"
                )));
            }
            Ok(SyntheticAuction {
                feature_states: states,
                theta,
                bids,
            })
        })
        .collect()
}

/// Converts to records with ids `S0`, `S1`, ...
pub fn to_records(auctions: &[SyntheticAuction]) -> Vec<AuctionRecord> {
    auctions
        .iter()
        .enumerate()
        .map(|(i, a)| a.to_record(format!("S{i}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_bidders_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = GaussianParams { mu: 0.0, sigma2: 1.0 };
        assert!(sample_bids(t, 0, &mut rng).is_err());
        assert_eq!(sample_bids(t, 1, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn vanishing_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = GaussianParams { mu: 5.0, sigma2: 1e-6 };
        assert!(sample_bids(t, 500, &mut rng)
            .unwrap()
            .iter()
            .all(|b| (b - 5.0).abs() < 0.01));
    }

    #[test]
    fn moments_within_sampling_bounds() {
        // mean of 10k N(0,1) draws has sd 0.01; variance of 100k N(0, 2.5)
        // draws has relative sd sqrt(2/1e5) ~ 0.0045, so 5% is > 10 sd.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = sample_bids(GaussianParams { mu: 0.0, sigma2: 1.0 }, 10_000, &mut rng).unwrap();
        assert!((d.iter().sum::<f64>() / 1e4).abs() < 0.05);
        let d = sample_bids(GaussianParams { mu: 1.0, sigma2: 2.5 }, 100_000, &mut rng).unwrap();
        let m = d.iter().sum::<f64>() / 1e5;
        let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (1e5 - 1.0);
        assert!((v / 2.5 - 1.0).abs() < 0.05, "{v}");
    }
}
