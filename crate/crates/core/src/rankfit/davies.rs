use serde::{Deserialize, Serialize};

use super::{log_points, RankFitError, RankedData};
use crate::linalg::lstsq;
use crate::scalar::{zero_sse_tolerance, Real};

pub const DEFAULT_DAVIES_CANDIDATES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaviesResult<T> {
    /// Largest absolute hinge t-statistic over the candidates.
    pub statistic: T,
    /// Upper bound on the p-value of "no breakpoint", clamped to `[0, 1]`.
    pub p_bound: T,
    pub candidates: usize,
}

/// Davies' upper bound for a change in log-log slope.
///
/// For each candidate `psi` at the interior quantiles `j / (K + 1)` of log rank,
/// fits `y ~ 1 + x + (x - psi)+` and takes the t-statistic `t_j` of the hinge
/// term. With `M = max |t_j|` and `V = sum |t_{j+1} - t_j|` the bound is
/// `2 Phi(-M) + V exp(-M^2 / 2) / sqrt(8 pi)`.
pub fn davies_test<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
    candidates: usize,
) -> Result<DaviesResult<T>, RankFitError> {
    let n = data.rank_values().len();
    if n < 10 {
        return Err(RankFitError::TooFewPoints {
            needed: 10,
            found: n,
        });
    }
    if candidates < 3 {
        return Err(RankFitError::InvalidArgs(format!(
            "need at least 3 candidates, got {candidates}"
        )));
    }
    let (x, y) = log_points(data)?;
    let exact = zero_sse_tolerance(n, &y);
    let scale = y.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let coef_tol = T::lit(1e3) * T::epsilon() * scale;

    let mut t = Vec::with_capacity(candidates);
    for j in 1..=candidates {
        let psi = quantile(&x, j as f64 / (candidates + 1) as f64);
        let hinge: Vec<T> = x.iter().map(|v| (*v - psi).max(T::zero())).collect();
        let ls = lstsq(&[vec![T::one(); n], x.clone(), hinge], &y).ok_or(RankFitError::Singular)?;
        let coef = ls.coef[2].to_f64_lossy();
        let tj = if ls.sse <= exact {
            if coef.abs() <= coef_tol.to_f64_lossy() {
                0.0
            } else {
                coef.signum() * f64::INFINITY
            }
        } else {
            let s2 = ls.sse.to_f64_lossy() / (n - 3) as f64;
            coef / (s2 * ls.inv_gram_diag[2].to_f64_lossy()).sqrt()
        };
        t.push(tj);
    }

    let m = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let p = if m.is_infinite() {
        0.0
    } else {
        let v: f64 = t.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let tail = libm::erfc(m / std::f64::consts::SQRT_2);
        (tail + v * (-0.5 * m * m).exp() / (8.0 * std::f64::consts::PI).sqrt()).clamp(0.0, 1.0)
    };
    Ok(DaviesResult {
        statistic: T::lit(m),
        p_bound: T::lit(p),
        candidates,
    })
}

/// Linear-interpolation sample quantile of sorted ascending `x`.
fn quantile<T: Real>(x: &[T], p: f64) -> T {
    let h = (x.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(x.len() - 1);
    let w = T::lit(h - lo as f64);
    x[lo] + (x[hi] - x[lo]) * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_null_gives_one() {
        let v: Vec<f64> = (1..=200).map(|r| 50.0 * (r as f64).powf(-1.1)).collect();
        let d = davies_test(&v, 10).unwrap();
        assert_eq!(d.statistic, 0.0);
        assert_eq!(d.p_bound, 1.0);
    }

    #[test]
    fn exact_break_gives_zero() {
        let v: Vec<f64> = (1..=200)
            .map(|r| {
                let x = (r as f64).log10();
                10f64.powf(2.0 - 0.3 * x - 1.2 * (x - 1.5).max(0.0))
            })
            .collect();
        let d = davies_test(&v, 10).unwrap();
        assert!(d.p_bound < 1e-6, "{}", d.p_bound);
    }

    #[test]
    fn quantile_type7() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.5), 2.0);
        assert_eq!(quantile(&x, 0.1), 0.4);
    }

    #[test]
    fn preconditions() {
        let v = vec![1.0f64; 9];
        assert!(matches!(
            davies_test(&v, 10),
            Err(RankFitError::TooFewPoints { .. })
        ));
        let v = vec![1.0f64; 20];
        assert!(davies_test(&v, 2).is_err());
    }
}
