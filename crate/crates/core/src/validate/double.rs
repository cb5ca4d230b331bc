//! Three-way bid distribution comparison among real bids, bids predicted from
//! real features, and bids predicted from synthetic features.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bidnet::{predict_theta, BidNetModel};
use crate::data::{decode_row, EncodedDataset};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::sampler::sample_bids;
use crate::validate::distance::{emd_1d, qq_rmse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistancePair {
    #[serde(rename = "real-vs-predicted")]
    RealVsPredicted,
    #[serde(rename = "real-vs-fake")]
    RealVsFake,
    #[serde(rename = "predicted-vs-fake")]
    PredictedVsFake,
}

impl DistancePair {
    pub fn label(self) -> &'static str {
        match self {
            DistancePair::RealVsPredicted => "real-vs-predicted",
            DistancePair::RealVsFake => "real-vs-fake",
            DistancePair::PredictedVsFake => "predicted-vs-fake",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub pair: DistancePair,
    pub emd: f64,
    pub qq_rmse: f64,
    pub n_a: usize,
    pub n_b: usize,
}

impl DistanceReport {
    pub fn compute(pair: DistancePair, a: &[f64], b: &[f64], levels: usize) -> Result<Self> {
        Ok(DistanceReport {
            pair,
            emd: emd_1d(a, b)?,
            qq_rmse: qq_rmse(a, b, levels)?,
            n_a: a.len(),
            n_b: b.len(),
        })
    }
}

pub fn distance_csv(reports: &[DistanceReport]) -> String {
    let mut s = String::from("pair,emd,qq_rmse,n_a,n_b\n");
    for r in reports {
        let _ = writeln!(s, "{},{},{},{},{}", r.pair.label(), r.emd, r.qq_rmse, r.n_a, r.n_b);
    }
    s
}

/// Bid samples in standardized log units.
#[derive(Debug, Clone, PartialEq)]
pub struct BidSamples {
    pub real: Vec<f64>,
    pub predicted: Vec<f64>,
    pub fake: Vec<f64>,
}

/// Draws predicted bids for each real test auction (same bid count as
/// observed) and fake bids for each synthetic row (bid count decoded from
/// its bidder-count state).
pub fn double_validation_samples(
    real_test: &EncodedDataset,
    synthetic: &Tensor,
    bidnet: &BidNetModel,
    seed: u64,
) -> Result<BidSamples> {
    if real_test.is_empty() {
        return Err(Error::Data("double validation needs a nonempty test set".into()));
    }
    if synthetic.rows() == 0 {
        return Err(Error::Data("double validation needs synthetic rows".into()));
    }
    if real_test.transform != bidnet.transform {
        return Err(Error::Config(
            "test set and BidNet use different bid standardizations".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = real_test.flat_bids();

    let mut predicted = Vec::with_capacity(real.len());
    for (theta, bids) in predict_theta(bidnet, &real_test.features)?
        .into_iter()
        .zip(&real_test.bids)
    {
        predicted.extend(sample_bids(theta, bids.len(), &mut rng)?);
    }

    let schema = &real_test.schema;
    let nb_var = schema.bidder_count_index();
    let mut fake = Vec::new();
    for (theta, row) in predict_theta(bidnet, synthetic)?.into_iter().zip(synthetic.iter_rows()) {
        let nb = schema.bidder_count(decode_row(schema, row)?[nb_var])?;
        fake.extend(sample_bids(theta, nb, &mut rng)?);
    }
    Ok(BidSamples { real, predicted, fake })
}

/// Identity (real vs predicted), target (real vs fake) and control
/// (predicted vs fake) distances, in that order.
pub fn double_validation(
    real_test: &EncodedDataset,
    synthetic: &Tensor,
    bidnet: &BidNetModel,
    seed: u64,
    levels: usize,
) -> Result<[DistanceReport; 3]> {
    let s = double_validation_samples(real_test, synthetic, bidnet, seed)?;
    Ok([
        DistanceReport::compute(DistancePair::RealVsPredicted, &s.real, &s.predicted, levels)?,
        DistanceReport::compute(DistancePair::RealVsFake, &s.real, &s.fake, levels)?,
        DistanceReport::compute(DistancePair::PredictedVsFake, &s.predicted, &s.fake, levels)?,
    ])
}
