//! Pass/fail checks against a known oracle, written into `report.json`.

use serde::{Deserialize, Serialize};

use auctionsynth::bidnet::{gaussian_entropy, CvReport};
use auctionsynth::data::{decode_row, BidTransform, OracleConfig};
use auctionsynth::nn::Tensor;
use auctionsynth::validate::{ClassifierKind, DistanceReport, InceptionReport};
use auctionsynth::Result;

pub const MARGINAL_TVD_MAX: f64 = 0.10;
pub const CMLP_GAP_MAX: f64 = 0.10;
pub const IDENTITY_EMD_MAX: f64 = 0.05;
pub const TRACKING_MAX: f64 = 0.03;
pub const ENTROPY_SLACK: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            pass: value < threshold,
        }
    }
}

/// Empirical marginal of each variable over one-hot rows.
pub fn feature_marginals(oracle: &OracleConfig, rows: &Tensor) -> Result<Vec<Vec<f64>>> {
    let schema = &oracle.schema;
    let mut counts: Vec<Vec<f64>> = schema.cardinalities().iter().map(|&k| vec![0.0; k]).collect();
    for row in rows.iter_rows() {
        for (v, s) in decode_row(schema, row)?.into_iter().enumerate() {
            counts[v][s] += 1.0;
        }
    }
    let n = rows.rows().max(1) as f64;
    Ok(counts
        .into_iter()
        .map(|c| c.into_iter().map(|x| x / n).collect())
        .collect())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Expected per-bid entropy of the oracle's conditional bid distribution in
/// standardized log-bid units. Combinations are weighted by probability
/// times bidder count, since every bid contributes one NLL term.
pub fn entropy_bound(oracle: &OracleConfig, transform: &BidTransform) -> Result<f64> {
    let nb_var = oracle.schema.bidder_count_index();
    let (mut total, mut weight) = (0.0, 0.0);
    for c in &oracle.combinations {
        let w = c.prob * oracle.schema.bidder_count(c.states[nb_var])? as f64;
        let sd = c.log_sigma / transform.log_std;
        total += w * gaussian_entropy(sd * sd);
        weight += w;
    }
    Ok(total / weight)
}

pub fn evaluate(
    oracle: Option<(&OracleConfig, &BidTransform)>,
    synthetic: &Tensor,
    inception: &InceptionReport,
    distances: &[DistanceReport; 3],
    bidnet_cv: &CvReport,
    baseline_cv: &CvReport,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if let Some((oracle, transform)) = oracle {
        let got = feature_marginals(oracle, synthetic)?;
        for (v, var) in oracle.schema.variables.iter().enumerate() {
            let tvd = total_variation(&got[v], &oracle.marginal(v));
            checks.push(Check::below(
                format!("marginal_tvd[{}]", var.name),
                tvd,
                MARGINAL_TVD_MAX,
            ));
        }
        let bound = entropy_bound(oracle, transform)?;
        checks.push(Check::below(
            "abs_bidnet_best_nll_minus_entropy_bound",
            (bidnet_cv.best_nll() - bound).abs(),
            ENTROPY_SLACK,
        ));
    }
    if let Some(row) = inception.row(ClassifierKind::Cmlp) {
        checks.push(Check::below(
            "cmlp_abs_macro_f1_gap",
            row.gap_macro_f1.abs(),
            CMLP_GAP_MAX,
        ));
    }
    let [identity, target, control] = distances;
    checks.push(Check::below("emd_real_vs_predicted", identity.emd, IDENTITY_EMD_MAX));
    checks.push(Check::below(
        "abs_emd_target_minus_control",
        (target.emd - control.emd).abs(),
        TRACKING_MAX,
    ));
    checks.push(Check::below(
        "bidnet_mean_nll_minus_baseline",
        bidnet_cv.mean - baseline_cv.mean,
        0.0,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tvd_examples() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert!((total_variation(&[0.2, 0.3, 0.5], &[0.3, 0.3, 0.4]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn entropy_bound_of_unit_oracle() {
        let mut oracle = OracleConfig::desk_default();
        for c in &mut oracle.combinations {
            c.log_sigma = 2.0;
        }
        let t = BidTransform {
            log_mean: 0.0,
            log_std: 2.0,
        };
        let b = entropy_bound(&oracle, &t).unwrap();
        assert!((b - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 1e-12);
    }
}
