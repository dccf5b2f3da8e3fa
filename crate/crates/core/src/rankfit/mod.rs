//! Rank-order series and log-log fits.
//!
//! All fits regress `log10(value)` on `log10(rank)`.

mod davies;
mod power;
mod segmented;
mod series;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use davies::{davies_test, DaviesResult, DEFAULT_DAVIES_CANDIDATES};
pub use power::{fit_power, PowerFit};
pub use segmented::{
    fit_segmented, segmented_path, select_segments, Segment, SegmentOptions, SegmentedFit,
};
pub use series::{rank_series, Metric, RankSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankFitError {
    #[error("no positive values to rank ({dropped} non-positive rows dropped)")]
    AllNonPositive { dropped: usize },
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("{k} breakpoints with segments of at least {min_segment_size} points need {needed} points, got {found}")]
    InfeasibleSegmentation {
        k: usize,
        min_segment_size: usize,
        needed: usize,
        found: usize,
    },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("design matrix is singular")]
    Singular,
}

/// Positive values in rank order (rank 1 first).
///
/// Implemented by [`RankSeries`] and by plain slices, which lets callers fit
/// data whose values are not monotone in rank.
pub trait RankedData<T: Real> {
    fn rank_values(&self) -> &[T];
}

impl<T: Real> RankedData<T> for [T] {
    fn rank_values(&self) -> &[T] {
        self
    }
}

impl<T: Real> RankedData<T> for Vec<T> {
    fn rank_values(&self) -> &[T] {
        self
    }
}

/// `(log10 rank, log10 value)` pairs for ranks `1..=N`.
pub(crate) fn log_points<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
) -> Result<(Vec<T>, Vec<T>), RankFitError> {
    let v = data.rank_values();
    if let Some(bad) = v.iter().find(|x| !(**x > T::zero()) || !x.is_finite()) {
        return Err(RankFitError::InvalidArgs(format!(
            "value {bad} is not positive and finite"
        )));
    }
    let x = (1..=v.len())
        .map(|r| T::from_usize_lossy(r).log10())
        .collect();
    let y = v.iter().map(|y| y.log10()).collect();
    Ok((x, y))
}

/// Gaussian-profile AIC: `n ln(max(sse, 1e-300) / n) + 2p`.
pub fn aic(n: usize, sse: f64, p: usize) -> Result<f64, RankFitError> {
    if n <= p {
        return Err(RankFitError::InvalidArgs(format!(
            "n = {n} must exceed p = {p}"
        )));
    }
    if !(sse >= 0.0) {
        return Err(RankFitError::InvalidArgs(format!(
            "sse = {sse} must be non-negative"
        )));
    }
    let n_f = n as f64;
    Ok(n_f * (sse.max(1e-300) / n_f).ln() + 2.0 * p as f64)
}

/// AIC with round-off-level SSE treated as exactly zero, so that among exact
/// fits the one with fewer parameters wins.
pub(crate) fn aic_snapped<T: Real>(n: usize, sse: T, p: usize, y: &[T]) -> Option<f64> {
    let snapped = if sse <= crate::scalar::zero_sse_tolerance(n, y) {
        0.0
    } else {
        sse.to_f64_lossy()
    };
    aic(n, snapped, p).ok()
}

/// JSON form of a rank fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: String,
    pub k: usize,
    pub continuous: bool,
    pub n: usize,
    pub breakpoints_log10: Vec<f64>,
    pub breakpoints_rank: Vec<f64>,
    pub segments: Vec<SegmentRecord>,
    pub sse: f64,
    pub aic: Option<f64>,
    pub davies: Option<DaviesRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaviesRecord {
    pub statistic: f64,
    pub p_bound: f64,
    pub candidates: usize,
}

impl FitRecord {
    pub fn new<T: Real>(fit: &SegmentedFit<T>, davies: Option<&DaviesResult<T>>) -> Self {
        let bp: Vec<f64> = fit.breakpoints.iter().map(|b| b.to_f64_lossy()).collect();
        FitRecord {
            model: if fit.k == 0 { "power" } else { "segmented" }.to_string(),
            k: fit.k,
            continuous: fit.continuous,
            n: fit.n,
            breakpoints_rank: bp.iter().map(|b| 10f64.powf(*b)).collect(),
            breakpoints_log10: bp,
            segments: fit
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    intercept: s.intercept.to_f64_lossy(),
                    slope: s.slope.to_f64_lossy(),
                })
                .collect(),
            sse: fit.sse.to_f64_lossy(),
            aic: fit.aic,
            davies: davies.map(|d| DaviesRecord {
                statistic: d.statistic.to_f64_lossy(),
                p_bound: d.p_bound.to_f64_lossy(),
                candidates: d.candidates,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aic_examples() {
        let v = aic(100, 1.0, 2).unwrap();
        assert!((v - (100.0 * 0.01f64.ln() + 4.0)).abs() < 1e-12);
        assert!((v + 456.517).abs() < 1e-3);
        assert_eq!(aic(100, 1.0, 4).unwrap() - v, 4.0);
        let floor = aic(10, 0.0, 2).unwrap();
        assert!(floor.is_finite() && floor < -6000.0);
        assert!(aic(3, 1.0, 3).is_err());
        assert!(aic(10, -1.0, 2).is_err());
    }
}
