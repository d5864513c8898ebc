//! CATE quality metrics.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitTag {
    InSample,
    Validation,
    OutSample,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::InSample => "in-sample",
            SplitTag::Validation => "validation",
            SplitTag::OutSample => "out-sample",
        })
    }
}

/// PEHE fields are absent when the data carries no true effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pehe: Option<f64>,
    pub sqrt_pehe: Option<f64>,
    pub auuc: f64,
    pub factual_rmse: f64,
    pub split: SplitTag,
}

/// Mean squared CATE error and its square root.
pub fn pehe_metrics<T: Scalar>(tau_hat: ArrayView1<'_, T>, tau_true: ArrayView1<'_, T>) -> Result<(T, T)> {
    if tau_hat.len() != tau_true.len() {
        return Err(Error::Shape(format!(
            "tau_hat has {} entries, tau_true has {}",
            tau_hat.len(),
            tau_true.len()
        )));
    }
    if tau_hat.is_empty() {
        return Err(Error::Input("PEHE of an empty sample".into()));
    }
    let sse: T = tau_hat
        .iter()
        .zip(tau_true.iter())
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum();
    let pehe = sse / T::from_usize_lossy(tau_hat.len());
    Ok((pehe, pehe.sqrt()))
}

/// Normalized area under the uplift curve.
///
/// Units are ranked by `tau_hat` descending (ties by original index). For each
/// prefix of size `k`, `u(k) = (mean_treated_y - mean_untreated_y) * k / N`, with
/// the mean of a group that has not yet appeared taken as zero. The area
/// `sum_k u(k) / N` is divided by `u(N)`, so a random ranking scores about 0.5.
/// Returns 0.5 when `u(N)` is zero.
pub fn auuc<T: Scalar>(tau_hat: ArrayView1<'_, T>, treated: &[bool], y: ArrayView1<'_, T>) -> Result<T> {
    let n = tau_hat.len();
    if treated.len() != n || y.len() != n {
        return Err(Error::Shape(format!(
            "auuc inputs have lengths ({n}, {}, {})",
            treated.len(),
            y.len()
        )));
    }
    let n_treated = treated.iter().filter(|t| **t).count();
    if n_treated == 0 || n_treated == n {
        return Err(Error::Metric("AUUC needs both treatment groups".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        tau_hat[j]
            .partial_cmp(&tau_hat[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let total = T::from_usize_lossy(n);
    let (mut n1, mut s1, mut n0, mut s0) = (0usize, T::zero(), 0usize, T::zero());
    let mut area = T::zero();
    let mut last = T::zero();
    for (k, &idx) in order.iter().enumerate() {
        if treated[idx] {
            n1 += 1;
            s1 += y[idx];
        } else {
            n0 += 1;
            s0 += y[idx];
        }
        let m1 = if n1 > 0 { s1 / T::from_usize_lossy(n1) } else { T::zero() };
        let m0 = if n0 > 0 { s0 / T::from_usize_lossy(n0) } else { T::zero() };
        last = (m1 - m0) * T::from_usize_lossy(k + 1) / total;
        area += last / total;
    }
    if last == T::zero() {
        return Ok(T::lit(0.5));
    }
    Ok(area / last)
}

pub fn factual_rmse<T: Scalar>(yhat: ArrayView1<'_, T>, y: ArrayView1<'_, T>) -> Result<T> {
    if yhat.len() != y.len() {
        return Err(Error::Shape(format!(
            "predictions have {} entries, outcomes have {}",
            yhat.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Input("RMSE of an empty sample".into()));
    }
    let sse: T = yhat.iter().zip(y.iter()).map(|(&p, &q)| (p - q) * (p - q)).sum();
    Ok((sse / T::from_usize_lossy(y.len())).sqrt())
}
