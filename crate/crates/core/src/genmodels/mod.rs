//! Generalized rank-size laws.
//!
//! `y(r) = A (N + 1 - r + d)^b / (r + c)^a` for ranks `1..=N`. With
//! `c = d = 0` this is the three-parameter law `A (N + 1 - r)^b / r^a`.
//! Fits minimize squared residuals of `log10 y`.

pub mod nelder_mead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::lstsq;
use crate::rankfit::{
    aic, fit_power, log_points, segmented_path, PowerFit, RankFitError, RankedData, SegmentOptions,
    SegmentedFit,
};
use crate::scalar::{zero_sse_tolerance, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("rank {r} outside 1..={n}")]
    OutOfRange { r: usize, n: usize },
    #[error(transparent)]
    Rank(#[from] RankFitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenModel {
    #[serde(rename = "DGBD3")]
    Dgbd3,
    #[serde(rename = "AC4_c0")]
    Ac4C0,
    #[serde(rename = "AC5")]
    Ac5,
}

impl GenModel {
    pub fn name(self) -> &'static str {
        match self {
            GenModel::Dgbd3 => "DGBD3",
            GenModel::Ac4C0 => "AC4_c0",
            GenModel::Ac5 => "AC5",
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GenModel::Dgbd3 => 3,
            GenModel::Ac4C0 => 4,
            GenModel::Ac5 => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenFit<T> {
    pub model: GenModel,
    #[serde(rename = "A")]
    pub amplitude: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    #[serde(rename = "N")]
    pub n_max: usize,
    pub sse: T,
    pub aic: Option<f64>,
    pub converged: bool,
}

impl<T: Real> GenFit<T> {
    /// Model without fit statistics, e.g. for generating data.
    pub fn from_params(
        model: GenModel,
        amplitude: T,
        a: T,
        b: T,
        c: T,
        d: T,
        n_max: usize,
    ) -> Self {
        GenFit {
            model,
            amplitude,
            a,
            b,
            c,
            d,
            n_max,
            sse: T::zero(),
            aic: None,
            converged: true,
        }
    }
}

/// `A (N + 1 - r + d)^b / (r + c)^a`.
pub fn eval_gen<T: Real>(fit: &GenFit<T>, r: usize) -> Result<T, GenError> {
    if r < 1 || r > fit.n_max {
        return Err(GenError::OutOfRange { r, n: fit.n_max });
    }
    let rr = T::from_usize_lossy(r);
    let tail = T::from_usize_lossy(fit.n_max + 1 - r) + fit.d;
    Ok(fit.amplitude * tail.powf(fit.b) / (rr + fit.c).powf(fit.a))
}

/// Log-space OLS of `log y` on `log r` and `log (N + 1 - r)`.
pub fn fit_dgbd<T: Real, D: RankedData<T> + ?Sized>(data: &D) -> Result<GenFit<T>, GenError> {
    let n = data.rank_values().len();
    if n < 4 {
        return Err(GenError::TooFewPoints {
            needed: 4,
            found: n,
        });
    }
    let (_, y) = log_points(data)?;
    let (yc, mean) = centred(&y);
    let p = profile(&yc, T::zero(), T::zero()).ok_or(RankFitError::Singular)?;
    Ok(p.into_fit(GenModel::Dgbd3, &y, mean, true))
}

/// Least-squares fit for fixed `(c, d)`: linear in `(log A, a, b)`.
#[derive(Debug, Clone, Copy)]
struct Profile<T> {
    log_a: T,
    a: T,
    b: T,
    c: T,
    d: T,
    sse: T,
}

impl<T: Real> Profile<T> {
    /// `mean` is the offset removed from `y` before profiling.
    fn into_fit(self, model: GenModel, y: &[T], mean: T, converged: bool) -> GenFit<T> {
        GenFit {
            model,
            amplitude: T::lit(10.0).powf(self.log_a + mean),
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            n_max: y.len(),
            sse: self.sse,
            aic: snapped_aic(y, self.sse, model.param_count()),
            converged,
        }
    }
}

fn snapped_aic<T: Real>(y: &[T], sse: T, p: usize) -> Option<f64> {
    let s = if sse <= zero_sse_tolerance(y.len(), y) {
        0.0
    } else {
        sse.to_f64_lossy()
    };
    aic(y.len(), s, p).ok()
}

fn centred<T: Real>(y: &[T]) -> (Vec<T>, T) {
    let mean = y.iter().copied().sum::<T>() / T::from_usize_lossy(y.len());
    (y.iter().map(|v| *v - mean).collect(), mean)
}

/// Expects centred `y`. Shifts whose intercept exceeds half the float
/// exponent range are infeasible.
fn profile<T: Real>(y: &[T], c: T, d: T) -> Option<Profile<T>> {
    let n = y.len();
    let lr: Vec<T> = (1..=n)
        .map(|r| (T::from_usize_lossy(r) + c).log10())
        .collect();
    let lt: Vec<T> = (1..=n)
        .map(|r| (T::from_usize_lossy(n + 1 - r) + d).log10())
        .collect();
    if lr.iter().chain(&lt).any(|v| !v.is_finite()) {
        return None;
    }
    let ls = lstsq(&[vec![T::one(); n], lr, lt], y)?;
    if !(ls.coef[0].abs() <= T::max_value().log10() / T::lit(2.0)) {
        return None;
    }
    Some(Profile {
        log_a: ls.coef[0],
        a: -ls.coef[1],
        b: ls.coef[2],
        c,
        d,
        sse: ls.sse,
    })
}

const SHIFT_MAX: f64 = 1e6;
const MAX_ITER: usize = 500;

/// Maps an unconstrained variable to a shift in `(-1, 1e6]`.
fn to_shift<T: Real>(u: T) -> T {
    let sp = if u > T::lit(30.0) { u } else { u.exp().ln_1p() };
    (sp - T::one()).min(T::lit(SHIFT_MAX))
}

fn from_shift<T: Real>(s: T) -> T {
    // softplus^-1(v) = ln(e^v - 1)
    let v = s + T::one();
    if v > T::lit(30.0) {
        v
    } else {
        v.exp_m1().ln()
    }
}

/// Profile least squares over `(c, d)`, or over `d` with `c = 0`.
///
/// Nelder-Mead runs on softplus-transformed shifts starting at `c = d = 0`.
/// If that run hits the iteration cap it is restarted from each
/// `(c, d)` in `{0, 1, 10}^2` and the best run is kept.
pub fn fit_ac<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
    fix_c_zero: bool,
) -> Result<GenFit<T>, GenError> {
    let n = data.rank_values().len();
    if n < 6 {
        return Err(GenError::TooFewPoints {
            needed: 6,
            found: n,
        });
    }
    let (_, y) = log_points(data)?;
    let (yc, mean) = centred(&y);
    let finish = |model, (p, converged): (Profile<T>, bool)| p.into_fit(model, &y, mean, converged);
    if fix_c_zero {
        let best = search(&yc, true, &[(T::zero(), T::zero())]);
        return Ok(finish(GenModel::Ac4C0, best));
    }
    let mut best = search(&yc, false, &[(T::zero(), T::zero())]);
    // A second start at the c = 0 optimum keeps the five-parameter fit at
    // least as good as the four-parameter one.
    let c0 = search(&yc, true, &[(T::zero(), T::zero())]);
    let alt = search(&yc, false, &[(T::zero(), c0.0.d)]);
    if alt.0.sse < best.0.sse {
        best = alt;
    }
    Ok(finish(GenModel::Ac5, best))
}

fn search<T: Real>(y: &[T], fix_c_zero: bool, starts: &[(T, T)]) -> (Profile<T>, bool) {
    let run = |c0: T, d0: T| -> (Profile<T>, bool) {
        let shifts = |u: &[T]| -> (T, T) {
            if fix_c_zero {
                (T::zero(), to_shift(u[0]))
            } else {
                (to_shift(u[0]), to_shift(u[1]))
            }
        };
        let objective = |u: &[T]| {
            let (c, d) = shifts(u);
            profile(y, c, d).map_or(T::infinity(), |p| p.sse)
        };
        let x0: Vec<T> = if fix_c_zero {
            vec![from_shift(d0)]
        } else {
            vec![from_shift(c0), from_shift(d0)]
        };
        let settings = nelder_mead::Settings {
            step: T::one(),
            max_iter: MAX_ITER,
            rel: T::lit(1e-10),
            abs: zero_sse_tolerance(y.len(), y),
        };
        let m = nelder_mead::minimize(objective, &x0, settings);
        // Keep the start exactly when it is still the best vertex.
        let (c, d) = if m.x == x0 { (c0, d0) } else { shifts(&m.x) };
        let p = profile(y, c, d).unwrap_or(Profile {
            log_a: T::nan(),
            a: T::nan(),
            b: T::nan(),
            c,
            d,
            sse: T::infinity(),
        });
        (p, m.converged)
    };

    let mut best: Option<(Profile<T>, bool)> = None;
    for &(c0, d0) in starts {
        let r = run(c0, d0);
        if best.as_ref().is_none_or(|b| r.0.sse < b.0.sse) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    if best.1 {
        return best;
    }
    let grid = [T::zero(), T::one(), T::lit(10.0)];
    let mut out = best;
    for c0 in grid {
        for d0 in grid {
            if fix_c_zero && c0 != T::zero() {
                continue;
            }
            let r = run(c0, d0);
            if r.0.sse < out.0.sse || (r.0.sse == out.0.sse && r.1 && !out.1) {
                out = r;
            }
        }
    }
    out
}

/// One candidate in a model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateFit<T> {
    Power(PowerFit<T>),
    Segmented(SegmentedFit<T>),
    Generalized(GenFit<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow<T> {
    pub model: String,
    pub params: usize,
    pub sse: f64,
    pub aic: f64,
    pub delta_aic: f64,
    pub akaike_weight: f64,
    pub fit: CandidateFit<T>,
}

/// Models ranked by AIC, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTable<T> {
    pub rows: Vec<ModelRow<T>>,
}

impl<T: Real> ModelTable<T> {
    pub fn best(&self) -> Option<&ModelRow<T>> {
        self.rows.first()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "model",
            "params",
            "sse",
            "aic",
            "delta_aic",
            "akaike_weight",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.params.to_string(),
                r.sse.to_string(),
                r.aic.to_string(),
                r.delta_aic.to_string(),
                r.akaike_weight.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits the power law, segmented fits with `1..=max_breakpoints` breakpoints
/// and the three generalized laws, and ranks them by AIC.
///
/// Models that cannot be fitted to the series are left out.
pub fn compare_models<T: Real, D: RankedData<T> + Sync + ?Sized>(
    data: &D,
    max_breakpoints: usize,
) -> ModelTable<T> {
    let (_, y) = match log_points(data) {
        Ok(p) => p,
        Err(_) => return ModelTable { rows: vec![] },
    };
    // Segmented fits share one breakpoint search; the rest run in parallel.
    let mut k_max = max_breakpoints;
    let min_seg = SegmentOptions::default().min_segment_size;
    while k_max > 0 && y.len() < (k_max + 1) * min_seg {
        k_max -= 1;
    }
    let gens = [GenModel::Dgbd3, GenModel::Ac4C0, GenModel::Ac5];
    let (segmented, generalized) = rayon::join(
        || segmented_path(data, k_max, SegmentOptions::default()).unwrap_or_default(),
        || {
            gens.par_iter()
                .map(|m| match m {
                    GenModel::Dgbd3 => fit_dgbd(data),
                    GenModel::Ac4C0 => fit_ac(data, true),
                    GenModel::Ac5 => fit_ac(data, false),
                })
                .collect::<Vec<_>>()
        },
    );

    let mut fitted: Vec<(String, usize, T, CandidateFit<T>)> = Vec::new();
    if let Ok(f) = fit_power(data) {
        fitted.push(("power".to_string(), 2, f.sse, CandidateFit::Power(f)));
    }
    for f in segmented.into_iter().filter(|f| f.k > 0) {
        fitted.push((
            format!("segmented_k{}", f.k),
            f.param_count(),
            f.sse,
            CandidateFit::Segmented(f),
        ));
    }
    for (m, f) in gens.iter().zip(generalized) {
        if let Ok(f) = f
            .map_err(drop)
            .and_then(|f| if f.sse.is_finite() { Ok(f) } else { Err(()) })
        {
            fitted.push((
                m.name().to_string(),
                m.param_count(),
                f.sse,
                CandidateFit::Generalized(f),
            ));
        }
    }

    let mut rows: Vec<ModelRow<T>> = fitted
        .into_iter()
        .filter_map(|(model, params, sse, fit)| {
            let aic = snapped_aic(&y, sse, params)?;
            Some(ModelRow {
                model,
                params,
                sse: sse.to_f64_lossy(),
                aic,
                delta_aic: 0.0,
                akaike_weight: 0.0,
                fit,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.aic.total_cmp(&b.aic).then(a.params.cmp(&b.params)));
    if let Some(min) = rows.first().map(|r| r.aic) {
        for r in rows.iter_mut() {
            r.delta_aic = r.aic - min;
            r.akaike_weight = (-0.5 * r.delta_aic).exp();
        }
        let total: f64 = rows.iter().map(|r| r.akaike_weight).sum();
        rows.iter_mut().for_each(|r| r.akaike_weight /= total);
    }
    ModelTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(
        model: GenModel,
        amplitude: f64,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        n: usize,
    ) -> GenFit<f64> {
        GenFit::from_params(model, amplitude, a, b, c, d, n)
    }

    fn series(g: &GenFit<f64>) -> Vec<f64> {
        (1..=g.n_max).map(|r| eval_gen(g, r).unwrap()).collect()
    }

    #[test]
    fn eval_examples() {
        let flat = gen(GenModel::Dgbd3, 1000.0, 0.0, 0.0, 0.0, 0.0, 10);
        assert!((1..=10).all(|r| eval_gen(&flat, r).unwrap() == 1000.0));
        let zipf = gen(GenModel::Dgbd3, 1.0, 1.0, 0.0, 0.0, 0.0, 10);
        assert_eq!(eval_gen(&zipf, 4).unwrap(), 0.25);
        let g = gen(GenModel::Dgbd3, 1000.0, 0.5, 0.3, 0.0, 0.0, 100);
        assert!((eval_gen(&g, 1).unwrap() - 1000.0 * 100f64.powf(0.3)).abs() < 1e-9);
        assert!((eval_gen(&g, 1).unwrap() - 3981.07).abs() < 0.01);
        assert_eq!(eval_gen(&g, 0), Err(GenError::OutOfRange { r: 0, n: 100 }));
        assert!(eval_gen(&g, 101).is_err());
    }

    #[test]
    fn dgbd_exact_recovery() {
        let truth = gen(GenModel::Dgbd3, 1000.0, 0.5, 0.3, 0.0, 0.0, 100);
        let f = fit_dgbd(&series(&truth)).unwrap();
        assert!((f.amplitude - 1000.0).abs() < 1e-9 * 1000.0);
        assert!((f.a - 0.5).abs() < 1e-9 && (f.b - 0.3).abs() < 1e-9);
        assert_eq!((f.c, f.d), (0.0, 0.0));
        assert!(matches!(
            fit_dgbd(&vec![3.0, 2.0, 1.0]),
            Err(GenError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn ac_at_start_when_truth_is_dgbd() {
        let truth = gen(GenModel::Dgbd3, 50.0, 0.9, 0.2, 0.0, 0.0, 80);
        let v = series(&truth);
        let dg = fit_dgbd(&v).unwrap();
        let ac = fit_ac(&v, false).unwrap();
        assert!(
            ac.c.abs() < 0.05 && ac.d.abs() < 0.05,
            "c {} d {}",
            ac.c,
            ac.d
        );
        assert!(ac.sse <= dg.sse + 1e-12);
    }

    #[test]
    fn ac5_exact_recovery() {
        let truth = gen(GenModel::Ac5, 500.0, 0.8, 0.4, 2.0, 5.0, 200);
        let f = fit_ac(&series(&truth), false).unwrap();
        assert!(f.sse < 1e-12, "sse {}", f.sse);
        assert!(
            (f.c - 2.0).abs() < 0.01 && (f.d - 5.0).abs() < 0.01,
            "c {} d {}",
            f.c,
            f.d
        );
        assert!(f.converged);
    }

    #[test]
    fn ac4_worse_when_c_matters() {
        let truth = gen(GenModel::Ac5, 500.0, 0.8, 0.4, 3.0, 1.0, 150);
        let v = series(&truth);
        let ac4 = fit_ac(&v, true).unwrap();
        let ac5 = fit_ac(&v, false).unwrap();
        assert_eq!(ac4.c, 0.0);
        assert!(ac4.sse > ac5.sse);
    }

    #[test]
    fn shift_transform_round_trip() {
        for s in [-0.5f64, 0.0, 1.0, 10.0, 1e3] {
            assert!((to_shift(from_shift(s)) - s).abs() < 1e-9 * (1.0 + s));
        }
        assert!(to_shift(-1e3f64) >= -1.0);
        assert_eq!(to_shift(1e9f64), SHIFT_MAX);
    }

    #[test]
    fn comparison_weights_normalized() {
        let truth = gen(GenModel::Dgbd3, 200.0, 0.7, 0.5, 0.0, 0.0, 60);
        let t = compare_models(&series(&truth), 2);
        let w: f64 = t.rows.iter().map(|r| r.akaike_weight).sum();
        assert!((w - 1.0).abs() < 1e-9);
        assert!(t.rows.iter().all(|r| r.delta_aic >= 0.0));
        assert_eq!(t.best().unwrap().model, "DGBD3");
        assert_eq!(t.rows.len(), 6);
    }
}
