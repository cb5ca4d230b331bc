//! One-hot feature encoding and the standardized-log bid transform.

use serde::{Deserialize, Serialize};

use crate::data::record::AuctionRecord;
use crate::data::schema::Schema;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `z = (ln b - log_mean) / log_std`, fitted on training bids only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidTransform {
    pub log_mean: f64,
    pub log_std: f64,
}

impl BidTransform {
    /// Fits mean and population standard deviation of log bids.
    pub fn fit(bids: impl IntoIterator<Item = f64>) -> Result<Self> {
        let logs = bids
            .into_iter()
            .map(|b| {
                if b > 0.0 && b.is_finite() {
                    Ok(b.ln())
                } else {
                    Err(Error::Data(format!("cannot take the log of bid {b}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if logs.is_empty() {
            return Err(Error::Data("no bids to fit the bid transform on".into()));
        }
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::Data("all bids are equal; log-bid std is zero".into()));
        }
        Ok(BidTransform {
            log_mean: mean,
            log_std: std,
        })
    }

    pub fn fit_records(records: &[AuctionRecord]) -> Result<Self> {
        Self::fit(records.iter().flat_map(|r| r.bids.iter().copied()))
    }

    pub fn forward(&self, bid: f64) -> f64 {
        (bid.ln() - self.log_mean) / self.log_std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        (z * self.log_std + self.log_mean).exp()
    }
}

/// One-hot row for a state assignment.
pub fn encode_states(schema: &Schema, states: &[usize]) -> Vec<f64> {
    let mut row = vec![0.0; schema.width()];
    for (&s, off) in states.iter().zip(schema.offsets()) {
        row[off + s] = 1.0;
    }
    row
}

/// Inverse of [`encode_states`]; every segment must be exactly one-hot.
pub fn decode_row(schema: &Schema, row: &[f64]) -> Result<Vec<usize>> {
    if row.len() != schema.width() {
        return Err(Error::Shape(format!(
            "row width {} vs schema width {}",
            row.len(),
            schema.width()
        )));
    }
    schema
        .variables
        .iter()
        .zip(schema.offsets())
        .map(|(v, off)| {
            let seg = &row[off..off + v.cardinality()];
            let ones: Vec<usize> = seg
                .iter()
                .enumerate()
                .filter(|(_, &x)| x == 1.0)
                .map(|(i, _)| i)
                .collect();
            if ones.len() == 1 && seg.iter().all(|&x| x == 0.0 || x == 1.0) {
                Ok(ones[0])
            } else {
                Err(Error::Data(format!("segment of {:?} is not one-hot: {seg:?}", v.name)))
            }
        })
        .collect()
}

/// Replaces every variable segment by the one-hot vector of its argmax.
pub fn harden(schema: &Schema, soft: &Tensor) -> Tensor {
    let card = schema.cardinalities();
    let offs = schema.offsets();
    let mut out = Vec::with_capacity(soft.len());
    for row in soft.iter_rows() {
        let mut hard = vec![0.0; row.len()];
        for (&o, &c) in offs.iter().zip(&card) {
            hard[o + crate::nn::argmax(&row[o..o + c])] = 1.0;
        }
        out.extend(hard);
    }
    Tensor::from_parts(soft.rows(), soft.cols(), out)
}

/// One-hot features (one row per auction) plus standardized log bids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub schema: Schema,
    pub auction_ids: Vec<String>,
    pub features: Tensor,
    pub bids: Vec<Vec<f64>>,
    pub transform: BidTransform,
}

impl EncodedDataset {
    /// Validates and encodes `records`; bids are standardized with `transform`.
    pub fn encode(records: &[AuctionRecord], schema: &Schema, transform: BidTransform) -> Result<Self> {
        let mut data = Vec::with_capacity(records.len() * schema.width());
        let mut bids = Vec::with_capacity(records.len());
        for r in records {
            r.validate(schema)?;
            data.extend(encode_states(schema, &r.states));
            bids.push(r.bids.iter().map(|&b| transform.forward(b)).collect());
        }
        Ok(EncodedDataset {
            schema: schema.clone(),
            auction_ids: records.iter().map(|r| r.auction_id.clone()).collect(),
            features: Tensor::from_parts(records.len(), schema.width(), data),
            bids,
            transform,
        })
    }

    /// Fits the transform on `records` themselves, then encodes.
    pub fn encode_fit(records: &[AuctionRecord], schema: &Schema) -> Result<Self> {
        let t = BidTransform::fit_records(records)?;
        Self::encode(records, schema, t)
    }

    pub fn len(&self) -> usize {
        self.auction_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.auction_ids.is_empty()
    }

    pub fn num_bids(&self) -> usize {
        self.bids.iter().map(Vec::len).sum()
    }

    pub fn states(&self, i: usize) -> Vec<usize> {
        decode_row(&self.schema, self.features.row_slice(i)).expect("encoded rows are one-hot")
    }

    pub fn decode(&self) -> Vec<AuctionRecord> {
        (0..self.len())
            .map(|i| AuctionRecord {
                auction_id: self.auction_ids[i].clone(),
                states: self.states(i),
                bids: self.bids[i].iter().map(|&z| self.transform.inverse(z)).collect(),
            })
            .collect()
    }

    /// Subset of auctions, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        EncodedDataset {
            schema: self.schema.clone(),
            auction_ids: idx.iter().map(|&i| self.auction_ids[i].clone()).collect(),
            features: self.features.select_rows(idx),
            bids: idx.iter().map(|&i| self.bids[i].clone()).collect(),
            transform: self.transform,
        }
    }

    /// All standardized bids, auction by auction.
    pub fn flat_bids(&self) -> Vec<f64> {
        self.bids.iter().flatten().copied().collect()
    }
}

/// `count(state k) / N` for one variable.
pub fn empirical_pmf(dataset: &EncodedDataset, variable: usize) -> Result<Vec<f64>> {
    let v = dataset
        .schema
        .variables
        .get(variable)
        .ok_or_else(|| Error::Schema(format!("variable index {variable} out of range")))?;
    pmf_of(&dataset.features, dataset.schema.offsets()[variable], v.cardinality())
}

pub(crate) fn pmf_of(features: &Tensor, offset: usize, card: usize) -> Result<Vec<f64>> {
    let n = features.rows();
    if n == 0 {
        return Err(Error::Data("empirical pmf of an empty dataset".into()));
    }
    let mut counts = vec![0.0; card];
    for row in features.iter_rows() {
        for (c, &x) in counts.iter_mut().zip(&row[offset..offset + card]) {
            *c += x;
        }
    }
    Ok(counts.into_iter().map(|c| c / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::Variable;
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::new(
            vec![
                Variable::new("A", &["0", "1"]),
                Variable::new("B", &["x", "y", "z"]),
                Variable::new("number of bidders", &["1", "2"]),
            ],
            "A",
        )
        .unwrap()
    }

    #[test]
    fn encodes_segments() {
        let s = schema();
        assert_eq!(encode_states(&s, &[1, 0, 0]), vec![0., 1., 1., 0., 0., 1., 0.]);
    }

    #[test]
    fn two_point_standardization() {
        let t = BidTransform::fit([1.0, std::f64::consts::E]).unwrap();
        assert!((t.forward(1.0) + 1.0).abs() < 1e-15);
        assert!((t.forward(std::f64::consts::E) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_bids_are_rejected() {
        assert!(BidTransform::fit([3.0, 3.0, 3.0]).is_err());
        assert!(BidTransform::fit([]).is_err());
    }

    #[test]
    fn pmf_cases() {
        let s = schema();
        let mut recs = Vec::new();
        for (i, st) in [0usize, 1, 1, 2, 2, 2, 2, 2, 0, 1].iter().enumerate() {
            recs.push(AuctionRecord {
                auction_id: i.to_string(),
                states: vec![0, *st, 0],
                bids: vec![1.0 + i as f64],
            });
        }
        let d = EncodedDataset::encode_fit(&recs, &s).unwrap();
        assert_eq!(empirical_pmf(&d, 1).unwrap(), vec![0.2, 0.3, 0.5]);
        assert_eq!(empirical_pmf(&d, 0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn decode_rejects_soft_rows() {
        let s = schema();
        assert!(decode_row(&s, &[0.5, 0.5, 1., 0., 0., 1., 0.]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(
            rows in proptest::collection::vec((0usize..2, 0usize..3, 0usize..2, 1.0f64..1e7, 1.0f64..1e7), 2..30)
        ) {
            let s = schema();
            let recs: Vec<AuctionRecord> = rows.iter().enumerate().map(|(i, &(a, b, n, x, y))| {
                let bids = if n == 0 { vec![x] } else { vec![x, y] };
                AuctionRecord { auction_id: format!("r{i}"), states: vec![a, b, n], bids }
            }).collect();
            prop_assume!(BidTransform::fit_records(&recs).is_ok());
            let d = EncodedDataset::encode_fit(&recs, &s).unwrap();
            for row in d.features.iter_rows() {
                prop_assert_eq!(row.iter().sum::<f64>(), 3.0);
            }
            let back = d.decode();
            for (r, b) in recs.iter().zip(&back) {
                prop_assert_eq!(&r.states, &b.states);
                for (x, y) in r.bids.iter().zip(&b.bids) {
                    prop_assert!(((x - y) / x).abs() < 1e-9);
                }
            }
        }
    }
}
