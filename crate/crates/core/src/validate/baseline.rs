//! Regression-tree baseline for BidNet: a CART tree fitted to the empirical
//! mean and variance of standardized log bids per feature combination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bidnet::{gaussian_nll, CvReport, FoldResult, GaussianParams, SIGMA2_FLOOR};
use crate::data::{kfold_split, EncodedDataset};
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf {
        value: [f64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Two-output CART regression tree split on total squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

fn sse(sum: [f64; 2], sq: [f64; 2], n: usize) -> f64 {
    (0..2).map(|o| sq[o] - sum[o] * sum[o] / n as f64).sum()
}

pub fn train_regression_tree(x: &Tensor, y: &[[f64; 2]], max_depth: usize) -> Result<RegressionTree> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Data("regression tree needs matching, nonempty inputs".into()));
    }
    let mut tree = RegressionTree { nodes: Vec::new() };
    grow(&mut tree, x, y, (0..x.rows()).collect(), 0, max_depth);
    Ok(tree)
}

fn grow(
    tree: &mut RegressionTree,
    x: &Tensor,
    y: &[[f64; 2]],
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
) -> usize {
    let n = idx.len();
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for &i in &idx {
        for o in 0..2 {
            sum[o] += y[i][o];
            sq[o] += y[i][o] * y[i][o];
        }
    }
    let id = tree.nodes.len();
    tree.nodes.push(RegNode::Leaf {
        value: [sum[0] / n as f64, sum[1] / n as f64],
    });
    if depth >= max_depth || n < 2 {
        return id;
    }
    let parent = sse(sum, sq, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.clone();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let (mut ls, mut lq) = ([0.0; 2], [0.0; 2]);
        for pos in 0..n - 1 {
            let i = order[pos];
            for o in 0..2 {
                ls[o] += y[i][o];
                lq[o] += y[i][o] * y[i][o];
            }
            let (v, next) = (x.get(i, f), x.get(order[pos + 1], f));
            if v == next {
                continue;
            }
            let nl = pos + 1;
            let rs = [sum[0] - ls[0], sum[1] - ls[1]];
            let rq = [sq[0] - lq[0], sq[1] - lq[1]];
            let gain = parent - sse(ls, lq, nl) - sse(rs, rq, n - nl);
            if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, f, 0.5 * (v + next)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x.get(i, feature) <= threshold);
    let left = grow(tree, x, y, l, depth + 1, max_depth);
    let right = grow(tree, x, y, r, depth + 1, max_depth);
    tree.nodes[id] = RegNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> [f64; 2] {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Prediction as Gaussian parameters, variance floored like BidNet's.
    pub fn predict_theta(&self, row: &[f64]) -> Result<GaussianParams> {
        let [mu, var] = self.predict_row(row);
        GaussianParams::new(mu, var.max(SIGMA2_FLOOR))
    }
}

/// Per-combination `(one-hot row, [mean, variance])` targets over the given
/// auctions. Variance is the population variance; combinations with fewer
/// than two bids are skipped. Returns the number skipped as well.
pub fn group_moments(ds: &EncodedDataset, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<[f64; 2]>, usize) {
    let mut groups: BTreeMap<Vec<usize>, (usize, Vec<f64>)> = BTreeMap::new();
    for &i in idx {
        let e = groups.entry(ds.states(i)).or_insert_with(|| (i, Vec::new()));
        e.1.extend_from_slice(&ds.bids[i]);
    }
    let (mut rows, mut targets, mut skipped) = (Vec::new(), Vec::new(), 0);
    for (first, bids) in groups.into_values() {
        if bids.len() < 2 {
            skipped += 1;
            continue;
        }
        let n = bids.len() as f64;
        let mean = bids.iter().sum::<f64>() / n;
        let var = bids.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / n;
        rows.push(ds.features.row_slice(first).to_vec());
        targets.push([mean, var]);
    }
    (rows, targets, skipped)
}

/// Cross-validated NLL of the tree baseline on the same auction-level folds
/// that [`crate::bidnet::train_bidnet_cv`] uses for a given seed.
pub fn bidnet_baseline_tree(dataset: &EncodedDataset, folds: usize, max_depth: usize, seed: u64) -> Result<CvReport> {
    let split = kfold_split(dataset.len(), folds, seed)?;
    let mut results = Vec::with_capacity(folds);
    for (k, val) in split.iter().enumerate() {
        let train: Vec<usize> = split
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let (rows, targets, skipped) = group_moments(dataset, &train);
        if skipped > 0 {
            log::warn!("baseline fold {k}: skipped {skipped} feature combinations with fewer than 2 bids");
        }
        if rows.is_empty() {
            return Err(Error::Data("no feature combination has at least 2 bids".into()));
        }
        let x = Tensor::from_rows(&rows)?;
        let tree = train_regression_tree(&x, &targets, max_depth)?;
        let (mut total, mut count) = (0.0, 0usize);
        for &i in val {
            let theta = tree.predict_theta(dataset.features.row_slice(i))?;
            for &b in &dataset.bids[i] {
                total += gaussian_nll(theta, b)?;
                count += 1;
            }
        }
        results.push(FoldResult {
            fold: k,
            train_auctions: train.len(),
            validation_auctions: val.len(),
            epochs_run: 0,
            best_epoch: 0,
            validation_nll: total / count.max(1) as f64,
        });
    }
    CvReport::from_folds(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AuctionRecord, BidTransform, Schema, Variable};

    fn single_group() -> EncodedDataset {
        let schema = Schema::new(
            vec![
                Variable::new("municipality", &["0", "1"]),
                Variable::new("number of bidders", &["1", "2", "3"]),
            ],
            "municipality",
        )
        .unwrap();
        let recs: Vec<AuctionRecord> = (0..10)
            .map(|i| AuctionRecord {
                auction_id: format!("a{i}"),
                states: vec![0, 2],
                bids: vec![1.0 + i as f64, 2.0 + i as f64 * 0.5, 3.0],
            })
            .collect();
        let t = BidTransform {
            log_mean: 0.0,
            log_std: 1.0,
        };
        EncodedDataset::encode(&recs, &schema, t).unwrap()
    }

    #[test]
    fn single_group_uses_exact_moments() {
        let ds = single_group();
        let report = bidnet_baseline_tree(&ds, 5, 12, 4).unwrap();
        let folds = kfold_split(ds.len(), 5, 4).unwrap();
        for (k, f) in report.folds.iter().enumerate() {
            let train: Vec<usize> = (0..ds.len()).filter(|i| !folds[k].contains(i)).collect();
            let bids: Vec<f64> = train.iter().flat_map(|&i| ds.bids[i].clone()).collect();
            let n = bids.len() as f64;
            let mean = bids.iter().sum::<f64>() / n;
            let var = bids.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / n;
            let theta = GaussianParams::new(mean, var).unwrap();
            let val: Vec<f64> = folds[k].iter().flat_map(|&i| ds.bids[i].clone()).collect();
            let expect = val.iter().map(|&b| gaussian_nll(theta, b).unwrap()).sum::<f64>() / val.len() as f64;
            assert!((f.validation_nll - expect).abs() < 1e-10);
        }
        assert_eq!(report, bidnet_baseline_tree(&ds, 5, 12, 4).unwrap());
    }

    #[test]
    fn tree_recovers_piecewise_targets() {
        let x = Tensor::matrix(4, 2, vec![1., 0., 1., 0., 0., 1., 0., 1.]).unwrap();
        let y = [[1.0, 0.5], [1.0, 0.5], [-2.0, 3.0], [-2.0, 3.0]];
        let t = train_regression_tree(&x, &y, 12).unwrap();
        assert_eq!(t.predict_row(&[1., 0.]), [1.0, 0.5]);
        assert_eq!(t.predict_row(&[0., 1.]), [-2.0, 3.0]);
    }
}
