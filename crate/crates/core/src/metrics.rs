//! Normalized MSE, Monte-Carlo aggregation, CSV serialization of result
//! records, and the least-squares fit of the performance-gap model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ChannelEstimate, EstimatorKind};
use crate::fading::ChannelSet;
use crate::pilots::PilotDesign;
use crate::scalar::Real;
use crate::CVec;

/// Which channel class a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Direct,
    Cascaded,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Direct => "direct",
            ChannelKind::Cascaded => "cascaded",
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Aggregated normalized-MSE record, one CSV row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseRecord {
    pub estimator: EstimatorKind,
    pub channel_kind: ChannelKind,
    pub power_dbm: f64,
    pub nmse: f64,
    pub stderr: f64,
    pub trials: usize,
    pub tau: usize,
    pub num_tags: usize,
    pub num_antennas: usize,
    pub design: PilotDesign,
    pub seed: u64,
}

/// CSV header matching [`MseRecord::to_csv_row`].
pub const CSV_HEADER: &str =
    "estimator,channel_kind,power_dbm,nmse,stderr,trials,tau,K,M,design,seed";

impl MseRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{},{},{},{},{},{}",
            self.estimator,
            self.channel_kind,
            self.power_dbm,
            self.nmse,
            self.stderr,
            self.trials,
            self.tau,
            self.num_tags,
            self.num_antennas,
            self.design,
            self.seed
        )
    }
}

/// Least-squares fit of the performance-gap model.
#[derive(Debug, Clone, Copy)]
pub struct GapFit {
    pub lambda_g: f64,
    pub residual: f64,
}

/// Normalized squared error of one channel vector for one realization:
/// `||h - h_hat||^2 / ||h||^2`.
pub fn normalized_mse<T: Real>(true_col: &CVec<T>, est_col: &CVec<T>) -> Result<T> {
    if true_col.len() != est_col.len() {
        return Err(Error::Dimension(format!(
            "channel length {} != estimate length {}",
            true_col.len(),
            est_col.len()
        )));
    }
    let denom = crate::linalg::norm_sqr(true_col);
    if !(denom > T::zero()) {
        return Err(Error::Config("true channel has zero norm".into()));
    }
    let num = true_col
        .iter()
        .zip(est_col.iter())
        .map(|(h, e)| (*h - *e).norm_sqr())
        .fold(T::zero(), |s, v| s + v);
    Ok(num / denom)
}

/// Per-trial NMSE values of one estimate against the true channels:
/// direct column as-is, cascaded columns compared after removing the known
/// `sqrt(alpha)` factor and averaged over the K tags.
pub fn trial_nmse<T: Real>(
    channels: &ChannelSet<T>,
    estimate: &ChannelEstimate<T>,
) -> Result<(T, Option<T>)> {
    let k = channels.num_tags();
    if estimate.stacked_est.ncols() != k + 1 || estimate.num_antennas() != channels.num_antennas()
    {
        return Err(Error::Dimension("estimate/channel shape mismatch".into()));
    }
    let direct = normalized_mse(&channels.direct, &estimate.stacked_est.column(0).to_owned())?;
    if k == 0 {
        return Ok((direct, None));
    }
    let inv_sqrt_alpha = T::one() / channels.alpha.sqrt();
    let mut acc = T::zero();
    for col in 1..=k {
        let est = estimate
            .stacked_est
            .column(col)
            .mapv(|z| z * num_complex::Complex::new(inv_sqrt_alpha, T::zero()));
        acc += normalized_mse(&channels.cascaded.column(col - 1).to_owned(), &est)?;
    }
    Ok((direct, Some(acc / T::of_usize(k))))
}

/// Mean and standard error of per-trial NMSE values. A single trial gets
/// stderr 0. Result depends only on the multiset of values, so any stable
/// trial ordering yields the same record fields.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("cannot aggregate zero trials".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Fit `gap = lambda_G * tau * (1 - 1/(K+1))` to observed (K, gap) pairs by
/// least squares on the single coefficient.
pub fn fit_gap_lambda(gaps: &[(usize, f64)], tau: usize) -> Result<GapFit> {
    if gaps.len() < 2 {
        return Err(Error::Config("gap fit needs at least 2 points".into()));
    }
    if gaps.iter().any(|(k, _)| *k > tau - 1) {
        return Err(Error::Config("gap fit requires K <= tau - 1".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, gap) in gaps {
        let basis = tau as f64 * (1.0 - 1.0 / (*k as f64 + 1.0));
        num += basis * gap;
        den += basis * basis;
    }
    if den == 0.0 {
        return Err(Error::Config("degenerate gap fit: all K = 0".into()));
    }
    let lambda_g = num / den;
    let residual = gaps
        .iter()
        .map(|(k, gap)| {
            let basis = tau as f64 * (1.0 - 1.0 / (*k as f64 + 1.0));
            (gap - lambda_g * basis).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(GapFit { lambda_g, residual })
}
