use serde::{Deserialize, Serialize};

use super::{log_points, RankFitError, RankedData};
use crate::linalg::lstsq;
use crate::scalar::{zero_sse_tolerance, Real};

/// `log10 y = log_y0 + beta * log10 r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit<T> {
    pub log_y0: T,
    pub beta: T,
    pub sse: T,
    pub r2: T,
    pub n: usize,
}

pub fn fit_power<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
) -> Result<PowerFit<T>, RankFitError> {
    let n = data.rank_values().len();
    if n < 3 {
        return Err(RankFitError::TooFewPoints {
            needed: 3,
            found: n,
        });
    }
    let (x, y) = log_points(data)?;
    fit_line(&x, &y)
}

pub(crate) fn fit_line<T: Real>(x: &[T], y: &[T]) -> Result<PowerFit<T>, RankFitError> {
    let n = y.len();
    let ls = lstsq(&[vec![T::one(); n], x.to_vec()], y).ok_or(RankFitError::Singular)?;
    let mean = y.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let sst: T = y.iter().map(|v| (*v - mean) * (*v - mean)).sum();
    let r2 = if sst > zero_sse_tolerance(n, y) {
        T::one() - ls.sse / sst
    } else {
        T::one()
    };
    Ok(PowerFit {
        log_y0: ls.coef[0],
        beta: ls.coef[1],
        sse: ls.sse,
        r2,
        n,
    })
}
