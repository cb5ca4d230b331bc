//! One-dimensional distribution distances and normal QQ data.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn sorted(samples: &[f64], what: &str) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Data(format!("{what}: empty sample")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what}: sample contains non-finite values")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Empirical quantile of sorted data: order statistic `i` (1-based) sits at
/// level `(i - 1/2) / n`, linear in between, flat beyond the ends.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * n as f64 - 0.5;
    if h <= 0.0 {
        return sorted[0];
    }
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    Ok(quantile_sorted(&sorted(samples, "quantile")?, p))
}

/// Wasserstein-1 distance between two empirical distributions, computed as
/// the integral of `|F_a - F_b|` over the merged sample points.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a, "emd")?;
    let b = sorted(b, "emd")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        let diff = (i as f64 / na - j as f64 / nb).abs();
        total += diff * (x - prev);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        prev = x;
    }
    Ok(total)
}

/// RMSE between matched quantiles at levels `(i - 1/2) / levels`.
pub fn qq_rmse(a: &[f64], b: &[f64], levels: usize) -> Result<f64> {
    if levels == 0 {
        return Err(Error::Config("qq_rmse needs at least one level".into()));
    }
    let a = sorted(a, "qq_rmse")?;
    let b = sorted(b, "qq_rmse")?;
    let sum: f64 = (1..=levels)
        .map(|i| {
            let p = (i as f64 - 0.5) / levels as f64;
            (quantile_sorted(&a, p) - quantile_sorted(&b, p)).powi(2)
        })
        .sum();
    Ok((sum / levels as f64).sqrt())
}

/// Standard normal quantile function.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub empirical: f64,
}

/// `(Phi^-1(p_i), Q(p_i))` for `p_i = (i - 1/2) / levels`.
pub fn qq_points(samples: &[f64], levels: usize) -> Result<Vec<QqPoint>> {
    let s = sorted(samples, "qq_points")?;
    Ok((1..=levels)
        .map(|i| {
            let p = (i as f64 - 0.5) / levels as f64;
            QqPoint {
                theoretical: inverse_normal_cdf(p),
                empirical: quantile_sorted(&s, p),
            }
        })
        .collect())
}

pub fn qq_points_csv(points: &[QqPoint]) -> String {
    let mut s = String::from("theoretical,empirical\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p.theoretical, p.empirical));
    }
    s
}
