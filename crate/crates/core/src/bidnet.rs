//! BidNet: one-hot auction features to a Gaussian over standardized log bids.
//!
//! Trained on individual bids (each paired with its auction's feature row)
//! by minimizing the mean Gaussian negative log-likelihood, with auction-level
//! K-fold cross-validation and patience-based early stopping.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, BidTransform, EncodedDataset};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, forward, forward_graph, Activation, AdamConfig, AdamState, BoundParams, Graph, HeadKind, HeadSpec,
    MlpSpec, ParameterSet, Tensor,
};

/// Smallest variance BidNet will ever report.
pub const SIGMA2_FLOOR: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        let t = GaussianParams { mu, sigma2 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Numerical(format!(
                "variance must be positive and finite, got {}",
                self.sigma2
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::Numerical(format!("mean must be finite, got {}", self.mu)));
        }
        Ok(())
    }
}

/// `ln(2 pi sigma^2) / 2 + (b - mu)^2 / (2 sigma^2)`.
pub fn gaussian_nll(theta: GaussianParams, b: f64) -> Result<f64> {
    theta.validate()?;
    let r = b - theta.mu;
    Ok(HALF_LN_2PI + 0.5 * theta.sigma2.ln() + r * r / (2.0 * theta.sigma2))
}

/// Differential entropy of a Gaussian, `ln(2 pi e sigma^2) / 2`.
pub fn gaussian_entropy(sigma2: f64) -> f64 {
    HALF_LN_2PI + 0.5 + 0.5 * sigma2.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BidNetConfig {
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub folds: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for BidNetConfig {
    fn default() -> Self {
        BidNetConfig {
            hidden: vec![64, 64],
            leaky_slope: 0.01,
            folds: 5,
            max_epochs: 200,
            patience: 5,
            min_delta: 1e-4,
            batch_size: 256,
            adam: AdamConfig::default(),
        }
    }
}

impl BidNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be >= 1".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("min_delta must be >= 0".into()));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidNetModel {
    pub spec: MlpSpec,
    pub params: ParameterSet,
    pub schema_fingerprint: String,
    pub transform: BidTransform,
}

pub fn bidnet_spec(width: usize, config: &BidNetConfig) -> Result<MlpSpec> {
    let hidden: Vec<(usize, Activation)> = config
        .hidden
        .iter()
        .map(|&d| (d, Activation::LeakyRelu(config.leaky_slope)))
        .collect();
    let head = HeadSpec {
        dim: 1,
        kind: HeadKind::Linear,
    };
    MlpSpec::new(width, &hidden, vec![head, head])
}

/// Per-row `(mu, sigma^2)`; `sigma^2 = max(exp(head), 1e-6)`.
pub fn predict_theta(model: &BidNetModel, rows: &Tensor) -> Result<Vec<GaussianParams>> {
    if rows.cols() != model.spec.input_dim {
        return Err(Error::Shape(format!(
            "BidNet expects {} feature columns, got {}",
            model.spec.input_dim,
            rows.cols()
        )));
    }
    let heads = forward(&model.spec, &model.params, rows, None)?;
    heads[0]
        .data()
        .iter()
        .zip(heads[1].data())
        .map(|(&mu, &lv)| GaussianParams::new(mu, lv.exp().max(SIGMA2_FLOOR)))
        .collect()
}

/// Mean NLL of `bids[i]` (all bids of row `i`) under the model.
pub fn mean_nll(model: &BidNetModel, rows: &Tensor, bids: &[Vec<f64>]) -> Result<f64> {
    let theta = predict_theta(model, rows)?;
    let (mut total, mut count) = (0.0, 0usize);
    for (t, bs) in theta.iter().zip(bids) {
        for &b in bs {
            total += gaussian_nll(*t, b)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Data("no bids to evaluate".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_auctions: usize,
    pub validation_auctions: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub validation_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    /// Population standard deviation of the per-fold values.
    pub std: f64,
    pub best_fold: usize,
}

impl CvReport {
    pub fn from_folds(folds: Vec<FoldResult>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::Data("no folds".into()));
        }
        let vals: Vec<f64> = folds.iter().map(|f| f.validation_nll).collect();
        let (mean, std) = mean_std(&vals);
        let best_fold = folds
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.validation_nll.total_cmp(&b.1.validation_nll))
            .map(|(i, _)| i)
            .expect("nonempty");
        Ok(CvReport {
            folds,
            mean,
            std,
            best_fold,
        })
    }

    pub fn best_nll(&self) -> f64 {
        self.folds[self.best_fold].validation_nll
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,train_auctions,validation_auctions,epochs_run,best_epoch,validation_nll\n");
        for f in &self.folds {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                f.fold, f.train_auctions, f.validation_auctions, f.epochs_run, f.best_epoch, f.validation_nll
            );
        }
        let _ = writeln!(s, "mean,,,,,{}", self.mean);
        let _ = writeln!(s, "std,,,,,{}", self.std);
        let _ = writeln!(s, "best,,,,,{}", self.best_nll());
        s
    }
}

pub(crate) fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Flattens auctions to one example per bid.
fn bid_examples(ds: &EncodedDataset, idx: &[usize]) -> (Tensor, Vec<f64>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for &i in idx {
        for &b in &ds.bids[i] {
            rows.push(i);
            y.push(b);
        }
    }
    (ds.features.select_rows(&rows), y)
}

fn batch_loss(g: &mut Graph, spec: &MlpSpec, bound: &BoundParams, x: &Tensor, y: &[f64]) -> Result<crate::nn::Var> {
    let xv = g.constant(x.clone());
    let heads = forward_graph(g, spec, bound, xv, None)?;
    let (mu, lv) = (heads.outputs[0], heads.outputs[1]);
    let lv = g.clamp_min(lv, SIGMA2_FLOOR.ln());
    let yv = g.constant(Tensor::matrix(y.len(), 1, y.to_vec())?);
    let r = g.sub(yv, mu)?;
    let r2 = g.square(r);
    let neg = g.scale(lv, -1.0);
    let inv = g.exp(neg);
    let quad = g.mul(r2, inv)?;
    let both = g.add(quad, lv)?;
    let m = g.mean(both);
    let half = g.scale(m, 0.5);
    Ok(g.add_scalar(half, HALF_LN_2PI))
}

fn train_fold(
    ds: &EncodedDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &BidNetConfig,
    spec: &MlpSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(ParameterSet, usize, usize, f64)> {
    let (x, y) = bid_examples(ds, train_idx);
    if y.is_empty() {
        return Err(Error::Data("training folds contain no bids".into()));
    }
    let val_rows = ds.features.select_rows(val_idx);
    let val_bids: Vec<Vec<f64>> = val_idx.iter().map(|&i| ds.bids[i].clone()).collect();

    let mut params = ParameterSet::init(spec, rng);
    let mut adam = AdamState::new(&params, config.adam)?;
    let mut model = BidNetModel {
        spec: spec.clone(),
        params: params.clone(),
        schema_fingerprint: String::new(),
        transform: ds.transform,
    };
    let mut best = (params.clone(), 0usize, f64::INFINITY);
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut epochs_run = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let xb = x.select_rows(chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let mut g = Graph::new();
            let bound = BoundParams::trainable(&mut g, &params);
            let loss = batch_loss(&mut g, spec, &bound, &xb, &yb)?;
            let grads = g.backward(loss)?;
            let pg = bound.gradients(&g, &grads);
            adam_step(&mut params, &pg, &mut adam)?;
        }
        epochs_run = epoch + 1;
        model.params = params.clone();
        let val = mean_nll(&model, &val_rows, &val_bids)?;
        if !val.is_finite() {
            return Err(Error::Numerical(format!("validation NLL is {val} at epoch {epoch}")));
        }
        if val < best.2 - config.min_delta {
            best = (params.clone(), epoch, val);
            stale = 0;
        } else {
            if val < best.2 {
                best = (params.clone(), epoch, val);
            }
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok((best.0, epochs_run, best.1, best.2))
}

/// Runs K-fold cross-validation and returns the model of the globally best
/// fold. Folds train in parallel, each on its own RNG stream.
pub fn train_bidnet_cv(dataset: &EncodedDataset, config: &BidNetConfig, seed: u64) -> Result<(BidNetModel, CvReport)> {
    config.validate()?;
    let folds = kfold_split(dataset.len(), config.folds, seed)?;
    let spec = bidnet_spec(dataset.schema.width(), config)?;

    let results: Vec<Result<(ParameterSet, FoldResult)>> = (0..folds.len())
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let (params, epochs_run, best_epoch, nll) =
                train_fold(dataset, &train_idx, &folds[k], config, &spec, &mut rng)?;
            log::debug!("bidnet fold {k}: best validation NLL {nll:.6} at epoch {best_epoch}");
            Ok((
                params,
                FoldResult {
                    fold: k,
                    train_auctions: train_idx.len(),
                    validation_auctions: folds[k].len(),
                    epochs_run,
                    best_epoch,
                    validation_nll: nll,
                },
            ))
        })
        .collect();

    let mut params = Vec::with_capacity(results.len());
    let mut fold_results = Vec::with_capacity(results.len());
    for r in results {
        let (p, f) = r?;
        params.push(p);
        fold_results.push(f);
    }
    let report = CvReport::from_folds(fold_results)?;
    let model = BidNetModel {
        spec,
        params: params.swap_remove(report.best_fold),
        schema_fingerprint: dataset.schema.fingerprint(),
        transform: dataset.transform,
    };
    Ok((model, report))
}
