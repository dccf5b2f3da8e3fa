//! Broken-line fits with breakpoints on the grid of log-rank midpoints.
//!
//! A split index `j` places a breakpoint between points `j - 1` and `j`, at
//! `psi_j = (x[j-1] + x[j]) / 2`. Candidate SSEs come from suffix sums, so
//! each candidate costs O(1) for a fixed set of other breakpoints; the winning
//! set is refitted by QR.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::power::fit_line;
use super::{aic_snapped, log_points, RankFitError, RankedData};
use crate::linalg::{cholesky_factor, forward_subst, lstsq};
use crate::scalar::{zero_sse_tolerance, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Adjacent segments meet at each breakpoint.
    pub continuous: bool,
    /// Fewest data points any segment may contain.
    pub min_segment_size: usize,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            continuous: true,
            min_segment_size: 5,
        }
    }
}

/// `log10 y = intercept + slope * log10 r` on one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub intercept: T,
    pub slope: T,
}

impl<T: Real> Segment<T> {
    pub fn at(&self, x: T) -> T {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit<T> {
    pub k: usize,
    /// Breakpoints in log10 rank, ascending.
    pub breakpoints: Vec<T>,
    /// For each breakpoint, the 0-based index of the first point after it.
    pub split_indices: Vec<usize>,
    pub segments: Vec<Segment<T>>,
    pub continuous: bool,
    pub sse: T,
    /// `None` when there are no more points than parameters.
    pub aic: Option<f64>,
    pub n: usize,
}

impl<T: Real> SegmentedFit<T> {
    pub fn param_count(&self) -> usize {
        param_count(self.k, self.continuous)
    }

    /// Fitted log10 value at log10 rank `x`.
    pub fn predict_log(&self, x: T) -> T {
        let i = self.breakpoints.iter().take_while(|b| x >= **b).count();
        self.segments[i].at(x)
    }

    pub fn breakpoint_ranks(&self) -> Vec<T> {
        self.breakpoints
            .iter()
            .map(|b| T::lit(10.0).powf(*b))
            .collect()
    }
}

fn param_count(k: usize, continuous: bool) -> usize {
    if continuous {
        2 + 2 * k
    } else {
        2 + 3 * k
    }
}

/// Fits `k` breakpoints by minimizing SSE over the candidate grid.
///
/// The search is exhaustive for `k <= 2`. For larger `k`, breakpoints are
/// added one at a time to the `k - 1` solution and then moved one at a time
/// until no move lowers the SSE.
pub fn fit_segmented<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
    k: usize,
    opts: SegmentOptions,
) -> Result<SegmentedFit<T>, RankFitError> {
    let (x, y) = prepare(data, k, opts)?;
    if k == 0 {
        return Ok(from_line(&x, &y, opts.continuous));
    }
    let search = Search::new(&x, &y, opts);
    let splits = search.path(k).pop().ok_or(RankFitError::Singular)?;
    refit(&x, &y, &splits, opts.continuous)
}

/// Fits for every `k = 0..=max_k` from one shared search.
///
/// Stops early, without error, once a further breakpoint cannot be placed.
pub fn segmented_path<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
    max_k: usize,
    opts: SegmentOptions,
) -> Result<Vec<SegmentedFit<T>>, RankFitError> {
    let (x, y) = prepare(data, max_k, opts)?;
    let mut fits = vec![from_line(&x, &y, opts.continuous)];
    if max_k > 0 {
        let search = Search::new(&x, &y, opts);
        for splits in search.path(max_k) {
            fits.push(refit(&x, &y, &splits, opts.continuous)?);
        }
    }
    Ok(fits)
}

/// Fits `k = 0..=max_k` and returns the fit with the lowest AIC.
///
/// A fit whose SSE is at round-off level counts as exact, so among exact
/// fits the smallest `k` wins.
pub fn select_segments<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
    max_k: usize,
    opts: SegmentOptions,
) -> Result<SegmentedFit<T>, RankFitError> {
    let mut best: Option<SegmentedFit<T>> = None;
    for fit in segmented_path(data, max_k, opts)? {
        let better = match (&best, fit.aic) {
            (None, _) => true,
            (Some(b), Some(a)) => b.aic.is_none_or(|ba| a < ba),
            (Some(_), None) => false,
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("path includes k = 0"))
}

fn prepare<T: Real, D: RankedData<T> + ?Sized>(
    data: &D,
    k: usize,
    opts: SegmentOptions,
) -> Result<(Vec<T>, Vec<T>), RankFitError> {
    if opts.min_segment_size < 2 {
        return Err(RankFitError::InvalidOptions(format!(
            "min_segment_size must be at least 2, got {}",
            opts.min_segment_size
        )));
    }
    let n = data.rank_values().len();
    if n < 3 {
        return Err(RankFitError::TooFewPoints {
            needed: 3,
            found: n,
        });
    }
    let needed = (k + 1).saturating_mul(opts.min_segment_size);
    if n < needed {
        return Err(RankFitError::InfeasibleSegmentation {
            k,
            min_segment_size: opts.min_segment_size,
            needed,
            found: n,
        });
    }
    log_points(data)
}

fn from_line<T: Real>(x: &[T], y: &[T], continuous: bool) -> SegmentedFit<T> {
    let line = fit_line(x, y).expect("distinct log ranks");
    SegmentedFit {
        k: 0,
        breakpoints: vec![],
        split_indices: vec![],
        segments: vec![Segment {
            intercept: line.log_y0,
            slope: line.beta,
        }],
        continuous,
        sse: line.sse,
        aic: aic_snapped(y.len(), line.sse, 2, y),
        n: y.len(),
    }
}

fn midpoint<T: Real>(x: &[T], j: usize) -> T {
    (x[j - 1] + x[j]) * T::lit(0.5)
}

fn refit<T: Real>(
    x: &[T],
    y: &[T],
    splits: &[usize],
    continuous: bool,
) -> Result<SegmentedFit<T>, RankFitError> {
    let n = y.len();
    let k = splits.len();
    let breakpoints: Vec<T> = splits.iter().map(|&j| midpoint(x, j)).collect();
    let (segments, sse) = if continuous {
        let mut cols = vec![vec![T::one(); n], x.to_vec()];
        for psi in &breakpoints {
            cols.push(x.iter().map(|v| (*v - *psi).max(T::zero())).collect());
        }
        let ls = lstsq(&cols, y).ok_or(RankFitError::Singular)?;
        let mut segments = Vec::with_capacity(k + 1);
        let (mut a, mut b) = (ls.coef[0], ls.coef[1]);
        segments.push(Segment {
            intercept: a,
            slope: b,
        });
        for (l, psi) in breakpoints.iter().enumerate() {
            let d = ls.coef[2 + l];
            a -= d * *psi;
            b += d;
            segments.push(Segment {
                intercept: a,
                slope: b,
            });
        }
        (segments, ls.sse)
    } else {
        let mut bounds = vec![0];
        bounds.extend_from_slice(splits);
        bounds.push(n);
        let mut segments = Vec::with_capacity(k + 1);
        let mut sse = T::zero();
        for w in bounds.windows(2) {
            let line = fit_line(&x[w[0]..w[1]], &y[w[0]..w[1]])?;
            sse += line.sse;
            segments.push(Segment {
                intercept: line.log_y0,
                slope: line.beta,
            });
        }
        (segments, sse)
    };
    Ok(SegmentedFit {
        k,
        breakpoints,
        split_indices: splits.to_vec(),
        segments,
        continuous,
        sse,
        aic: aic_snapped(n, sse, param_count(k, continuous), y),
        n,
    })
}

/// Candidate `(sse, splits)` ordering: lower SSE, then earlier breakpoints.
fn better<T: Real>(a: &(T, Vec<usize>), b: &(T, Vec<usize>)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

/// Suffix sums of centered data (`s[j]` sums over `i >= j`) and, per split
/// index `j`, inner products of the hinge `(x - psi_j)+` with `1`, `x`, `y`
/// and itself.
struct Sums<T> {
    n: usize,
    x: Vec<T>,
    sx: Vec<T>,
    sxx: Vec<T>,
    sy: Vec<T>,
    sxy: Vec<T>,
    syy: Vec<T>,
    psi: Vec<T>,
    h1: Vec<T>,
    hx: Vec<T>,
    hh: Vec<T>,
    hy: Vec<T>,
    /// `inv[c] = 1 / c`.
    inv: Vec<T>,
}

impl<T: Real> Sums<T> {
    fn new(x: &[T], y: &[T]) -> Self {
        let n = x.len();
        let nf = T::from_usize_lossy(n);
        let mx = x.iter().copied().sum::<T>() / nf;
        let my = y.iter().copied().sum::<T>() / nf;
        let xc: Vec<T> = x.iter().map(|v| *v - mx).collect();
        let zeros = || vec![T::zero(); n + 1];
        let mut s = Sums {
            n,
            sx: zeros(),
            sxx: zeros(),
            sy: zeros(),
            sxy: zeros(),
            syy: zeros(),
            psi: zeros(),
            h1: zeros(),
            hx: zeros(),
            hh: zeros(),
            hy: zeros(),
            inv: (0..=n)
                .map(|c| {
                    if c == 0 {
                        T::zero()
                    } else {
                        T::one() / T::from_usize_lossy(c)
                    }
                })
                .collect(),
            x: xc,
        };
        for i in (0..n).rev() {
            let (a, b) = (s.x[i], y[i] - my);
            s.sx[i] = s.sx[i + 1] + a;
            s.sxx[i] = s.sxx[i + 1] + a * a;
            s.sy[i] = s.sy[i + 1] + b;
            s.sxy[i] = s.sxy[i + 1] + a * b;
            s.syy[i] = s.syy[i + 1] + b * b;
        }
        for j in 1..n {
            let p = midpoint(&s.x, j);
            let c = T::from_usize_lossy(n - j);
            s.psi[j] = p;
            s.h1[j] = s.sx[j] - p * c;
            s.hx[j] = s.sxx[j] - p * s.sx[j];
            s.hh[j] = s.hx[j] - p * s.h1[j];
            s.hy[j] = s.sxy[j] - p * s.sy[j];
        }
        s
    }
}

/// Regressor in the continuous model.
#[derive(Clone, Copy)]
enum Col {
    One,
    X,
    Hinge(usize),
}

struct Continuous<'a, T> {
    s: &'a Sums<T>,
}

impl<T: Real> Continuous<'_, T> {
    fn dot(&self, a: Col, b: Col) -> T {
        let s = self.s;
        match (a, b) {
            (Col::One, Col::One) => T::from_usize_lossy(s.n),
            (Col::One, Col::X) | (Col::X, Col::One) => s.sx[0],
            (Col::X, Col::X) => s.sxx[0],
            (Col::One, Col::Hinge(j)) | (Col::Hinge(j), Col::One) => s.h1[j],
            (Col::X, Col::Hinge(j)) | (Col::Hinge(j), Col::X) => s.hx[j],
            (Col::Hinge(a), Col::Hinge(b)) => {
                let (lo, hi) = (a.min(b), a.max(b));
                if lo == hi {
                    s.hh[lo]
                } else {
                    s.hx[hi] - s.psi[lo] * s.h1[hi]
                }
            }
        }
    }

    fn dot_y(&self, a: Col) -> T {
        let s = self.s;
        match a {
            Col::One => s.sy[0],
            Col::X => s.sxy[0],
            Col::Hinge(j) => s.hy[j],
        }
    }

    fn base(&self, fixed: &[usize]) -> Vec<Col> {
        let mut cols = vec![Col::One, Col::X];
        cols.extend(fixed.iter().map(|&j| Col::Hinge(j)));
        cols
    }

    /// Cholesky factor of the Gram matrix and `L^-1 X'y`.
    fn factor(&self, cols: &[Col]) -> Option<(Vec<T>, Vec<T>)> {
        let p = cols.len();
        let mut g = vec![T::zero(); p * p];
        for i in 0..p {
            for j in 0..=i {
                g[i * p + j] = self.dot(cols[i], cols[j]);
            }
        }
        cholesky_factor(&mut g, p)?;
        let mut z: Vec<T> = cols.iter().map(|c| self.dot_y(*c)).collect();
        forward_subst(&g, p, &mut z);
        Some((g, z))
    }

    fn evaluate(&self, splits: &[usize]) -> Option<T> {
        let (_, z) = self.factor(&self.base(splits))?;
        Some(self.s.syy[0] - z.iter().map(|v| *v * *v).sum::<T>())
    }

    /// Adds one hinge at each candidate and returns the lowest SSE.
    ///
    /// The products of a candidate hinge `h_j` with the base columns are
    /// `h1[j] u + hx[j] v + psi[j] p + q` for vectors that only change when
    /// `j` crosses a fixed split, so `L^-1` of each is computed once per gap.
    fn best_single(
        &self,
        fixed: &[usize],
        candidates: impl Iterator<Item = usize>,
    ) -> Option<(T, usize)> {
        let s = self.s;
        let cols = self.base(fixed);
        let p = cols.len();
        let (l, z) = self.factor(&cols)?;
        let base_sse = s.syy[0] - z.iter().map(|v| *v * *v).sum::<T>();
        let guard = T::lit(1e3) * T::epsilon();
        // basis[i] = (u_i, v_i, p_i, q_i) after the triangular solve.
        let mut basis = vec![[T::zero(); 4]; p];
        let mut gap = usize::MAX;
        let mut best: Option<(T, usize)> = None;
        for j in candidates {
            let g = fixed.iter().filter(|f| **f < j).count();
            if g != gap {
                gap = g;
                let mut cols4 = [
                    vec![T::zero(); p],
                    vec![T::zero(); p],
                    vec![T::zero(); p],
                    vec![T::zero(); p],
                ];
                for (i, c) in cols.iter().enumerate() {
                    match *c {
                        Col::One => cols4[0][i] = T::one(),
                        Col::X => cols4[1][i] = T::one(),
                        Col::Hinge(f) if f < j => {
                            cols4[0][i] = -s.psi[f];
                            cols4[1][i] = T::one();
                        }
                        Col::Hinge(f) => {
                            cols4[2][i] = -s.h1[f];
                            cols4[3][i] = s.hx[f];
                        }
                    }
                }
                for (k, col) in cols4.iter_mut().enumerate() {
                    forward_subst(&l, p, col);
                    for i in 0..p {
                        basis[i][k] = col[i];
                    }
                }
            }
            let (a, b, c) = (s.h1[j], s.hx[j], s.psi[j]);
            let mut ww = T::zero();
            let mut wz = T::zero();
            for (bi, zi) in basis.iter().zip(&z) {
                let w = a * bi[0] + b * bi[1] + c * bi[2] + bi[3];
                ww += w * w;
                wz += w * *zi;
            }
            let hh = s.hh[j];
            let denom = hh - ww;
            if !(denom > guard * hh) {
                continue;
            }
            let num = s.hy[j] - wz;
            let sse = base_sse - num * num / denom;
            if sse.is_finite() && best.is_none_or(|(b, _)| sse < b) {
                best = Some((sse, j));
            }
        }
        best
    }

    /// [`Self::best_single`] for one fixed hinge `f` and candidates after it,
    /// where the candidate products reduce to `h1[j] u + hx[j] v`.
    fn scan_after(
        &self,
        f: usize,
        candidates: std::ops::RangeInclusive<usize>,
    ) -> Option<(T, usize)> {
        let s = self.s;
        let cols = [Col::One, Col::X, Col::Hinge(f)];
        let (l, z) = self.factor(&cols)?;
        let base_sse = s.syy[0] - z.iter().map(|v| *v * *v).sum::<T>();
        let mut u = [T::one(), T::zero(), -s.psi[f]];
        let mut v = [T::zero(), T::one(), T::one()];
        forward_subst(&l, 3, &mut u);
        forward_subst(&l, 3, &mut v);
        let dot = |a: &[T; 3], b: &[T]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let (uu, uv, vv) = (dot(&u, &u), dot(&u, &v), dot(&v, &v));
        let (uz, vz) = (dot(&u, &z), dot(&v, &z));
        let guard = T::lit(1e3) * T::epsilon();
        let two = T::lit(2.0);
        // Maximize the SSE reduction num^2 / denom without dividing per candidate.
        let (mut best_num2, mut best_den, mut best_j) = (-T::one(), T::one(), usize::MAX);
        let (lo, hi) = (*candidates.start(), *candidates.end());
        if lo > hi {
            return None;
        }
        let r = lo..hi + 1;
        let rows = s.h1[r.clone()]
            .iter()
            .zip(&s.hx[r.clone()])
            .zip(&s.hh[r.clone()])
            .zip(&s.hy[r]);
        for (i, (((&a, &b), &hh), &hy)) in rows.enumerate() {
            let denom = hh - (a * a * uu + two * a * b * uv + b * b * vv);
            let num = hy - (a * uz + b * vz);
            let num2 = num * num;
            if denom > guard * hh && num2 * best_den > best_num2 * denom {
                (best_num2, best_den, best_j) = (num2, denom, lo + i);
            }
        }
        if best_j == usize::MAX {
            return None;
        }
        let sse = base_sse - best_num2 / best_den;
        sse.is_finite().then_some((sse, best_j))
    }
}

struct Discontinuous<'a, T> {
    s: &'a Sums<T>,
}

impl<T: Real> Discontinuous<'_, T> {
    /// OLS residual sum of squares of the points `a..b`.
    #[inline]
    fn seg(&self, a: usize, b: usize) -> T {
        let s = self.s;
        let ic = s.inv[b - a];
        let sx = s.sx[a] - s.sx[b];
        let sy = s.sy[a] - s.sy[b];
        let sxx = s.sxx[a] - s.sxx[b] - sx * sx * ic;
        let sxy = s.sxy[a] - s.sxy[b] - sx * sy * ic;
        let syy = s.syy[a] - s.syy[b] - sy * sy * ic;
        let r = if sxx > T::zero() {
            syy - sxy * sxy / sxx
        } else {
            syy
        };
        r.max(T::zero())
    }

    /// Best `j` for the segmentation `[0, a) [a, j) [j, n)` given `tails[j] = seg(j, n)`.
    fn scan_middle(
        &self,
        a: usize,
        candidates: std::ops::RangeInclusive<usize>,
        tails: &[T],
    ) -> Option<(T, usize)> {
        let s = self.s;
        let (lo, hi) = (*candidates.start(), *candidates.end());
        if lo > hi {
            return None;
        }
        let head = self.seg(0, a);
        let (ax, axx, ay, axy, ayy) = (s.sx[a], s.sxx[a], s.sy[a], s.sxy[a], s.syy[a]);
        let r = lo..hi + 1;
        let rows = s.sx[r.clone()]
            .iter()
            .zip(&s.sxx[r.clone()])
            .zip(&s.sy[r.clone()])
            .zip(&s.sxy[r.clone()])
            .zip(&s.syy[r.clone()])
            .zip(&s.inv[lo - a..hi - a + 1])
            .zip(&tails[r]);
        let mut best: Option<(T, usize)> = None;
        for (i, ((((((&bx, &bxx), &by), &bxy), &byy), &ic), &tail)) in rows.enumerate() {
            let sx = ax - bx;
            let sy = ay - by;
            let sxx = axx - bxx - sx * sx * ic;
            let sxy = axy - bxy - sx * sy * ic;
            let syy = ayy - byy - sy * sy * ic;
            let mid = if sxx > T::zero() {
                syy - sxy * sxy / sxx
            } else {
                syy
            };
            let sse = head + mid.max(T::zero()) + tail;
            if best.is_none_or(|(b, _)| sse < b) {
                best = Some((sse, lo + i));
            }
        }
        best
    }

    fn bounds(&self, splits: &[usize]) -> Vec<usize> {
        let mut b = Vec::with_capacity(splits.len() + 2);
        b.push(0);
        b.extend_from_slice(splits);
        b.push(self.s.n);
        b
    }

    fn evaluate(&self, splits: &[usize]) -> Option<T> {
        Some(
            self.bounds(splits)
                .windows(2)
                .map(|w| self.seg(w[0], w[1]))
                .sum(),
        )
    }

    fn best_single(
        &self,
        fixed: &[usize],
        candidates: impl Iterator<Item = usize>,
    ) -> Option<(T, usize)> {
        let bounds = self.bounds(fixed);
        let segs: Vec<T> = bounds.windows(2).map(|w| self.seg(w[0], w[1])).collect();
        let total: T = segs.iter().copied().sum();
        let mut best: Option<(T, usize)> = None;
        for j in candidates {
            let i = bounds.partition_point(|b| *b <= j) - 1;
            let (a, b) = (bounds[i], bounds[i + 1]);
            let sse = total - segs[i] + self.seg(a, j) + self.seg(j, b);
            if sse.is_finite() && best.is_none_or(|(bs, _)| sse < bs) {
                best = Some((sse, j));
            }
        }
        best
    }
}

struct Search<'a, T> {
    sums: Sums<T>,
    y: &'a [T],
    opts: SegmentOptions,
}

impl<'a, T: Real> Search<'a, T> {
    fn new(x: &[T], y: &'a [T], opts: SegmentOptions) -> Self {
        Search {
            sums: Sums::new(x, y),
            y,
            opts,
        }
    }

    fn n(&self) -> usize {
        self.sums.n
    }

    /// Split indices that keep every segment at least `min_segment_size` long.
    fn feasible<'b>(&self, fixed: &'b [usize], from: usize) -> impl Iterator<Item = usize> + 'b {
        let m = self.opts.min_segment_size;
        let lo = from.max(m);
        let hi = self.n() - m;
        (lo..=hi).filter(move |j| fixed.iter().all(|f| f.abs_diff(*j) >= m))
    }

    fn best_single(&self, fixed: &[usize], from: usize) -> Option<(T, usize)> {
        let cands = self.feasible(fixed, from);
        if self.opts.continuous {
            Continuous { s: &self.sums }.best_single(fixed, cands)
        } else {
            Discontinuous { s: &self.sums }.best_single(fixed, cands)
        }
    }

    fn evaluate(&self, splits: &[usize]) -> Option<T> {
        if self.opts.continuous {
            Continuous { s: &self.sums }.evaluate(splits)
        } else {
            Discontinuous { s: &self.sums }.evaluate(splits)
        }
    }

    /// Best split sets for `k = 1..=max_k`, stopping early if a `k` is infeasible.
    fn path(&self, max_k: usize) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(max_k);
        if max_k == 0 {
            return out;
        }
        match self.best_single(&[], 0) {
            Some((_, j)) => out.push(vec![j]),
            None => return out,
        }
        if max_k == 1 {
            return out;
        }
        match self.exhaustive_pair() {
            Some(pair) => out.push(pair),
            None => return out,
        }
        while out.len() < max_k {
            let mut splits = out.last().expect("nonempty").clone();
            let Some((sse, j)) = self.best_single(&splits, 0) else {
                break;
            };
            splits.push(j);
            splits.sort_unstable();
            out.push(self.refine(splits, sse));
        }
        out
    }

    fn exhaustive_pair(&self) -> Option<Vec<usize>> {
        let m = self.opts.min_segment_size;
        let n = self.n();
        let firsts: Vec<usize> = self.feasible(&[], 0).collect();
        let disc = Discontinuous { s: &self.sums };
        let tails: Vec<T> = if self.opts.continuous {
            vec![]
        } else {
            (0..=n)
                .map(|j| if j < n { disc.seg(j, n) } else { T::zero() })
                .collect()
        };
        firsts
            .into_par_iter()
            .filter_map(|j1| {
                if self.opts.continuous {
                    return Continuous { s: &self.sums }
                        .scan_after(j1, (j1 + m)..=(n - m))
                        .map(|(sse, j2)| (sse, vec![j1, j2]));
                }
                disc.scan_middle(j1, (j1 + m)..=(n - m), &tails)
                    .map(|(sse, j2)| (sse, vec![j1, j2]))
            })
            .reduce_with(|a, b| if better(&b, &a) { b } else { a })
            .map(|(_, splits)| splits)
    }

    /// Moves one breakpoint at a time to its best position given the others.
    fn refine(&self, mut splits: Vec<usize>, mut sse: T) -> Vec<usize> {
        let tol = zero_sse_tolerance(self.n(), self.y).max(T::lit(1e-12) * sse.abs());
        for _ in 0..100 {
            let mut moved = false;
            for l in 0..splits.len() {
                let others: Vec<usize> = splits
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != l)
                    .map(|(_, j)| *j)
                    .collect();
                if let Some((s, j)) = self.best_single(&others, 0) {
                    if j != splits[l] && s < sse - tol {
                        splits[l] = j;
                        splits.sort_unstable();
                        sse = self.evaluate(&splits).unwrap_or(s);
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        splits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Continuous broken line in log10 space with breakpoint at `psi`.
    fn broken(n: usize, psi: f64, b1: f64, b2: f64) -> Vec<f64> {
        (1..=n)
            .map(|r| {
                let x = (r as f64).log10();
                10f64.powf(3.0 + b1 * x + (b2 - b1) * (x - psi).max(0.0))
            })
            .collect()
    }

    #[test]
    fn k0_matches_power() {
        let v: Vec<f64> = (1..=40)
            .map(|r| 5.0 * (r as f64).powf(-0.7) * (1.0 + 0.01 * (r % 3) as f64))
            .collect();
        let s = fit_segmented(&v, 0, SegmentOptions::default()).unwrap();
        let p = super::super::fit_power(&v).unwrap();
        assert_eq!(s.segments[0].intercept, p.log_y0);
        assert_eq!(s.segments[0].slope, p.beta);
        assert_eq!(s.sse, p.sse);
    }

    #[test]
    fn exact_one_break() {
        let psi = (100.0f64 * 101.0).sqrt().log10();
        let v = broken(1000, psi, -0.3, -1.5);
        let f = fit_segmented(&v, 1, SegmentOptions::default()).unwrap();
        assert!(f.sse < 1e-18, "sse {}", f.sse);
        assert_eq!(f.split_indices, [100]);
        assert!((f.breakpoints[0] - psi).abs() < 1e-12);
        assert!((f.segments[0].slope + 0.3).abs() < 1e-9);
        assert!((f.segments[1].slope + 1.5).abs() < 1e-9);
    }

    #[test]
    fn exact_two_breaks() {
        let p1 = (30.0f64 * 31.0).sqrt().log10();
        let p2 = (300.0f64 * 301.0).sqrt().log10();
        let v: Vec<f64> = (1..=800)
            .map(|r| {
                let x = (r as f64).log10();
                10f64.powf(2.0 - 0.2 * x - 0.8 * (x - p1).max(0.0) - 1.0 * (x - p2).max(0.0))
            })
            .collect();
        let f = fit_segmented(&v, 2, SegmentOptions::default()).unwrap();
        assert!(f.sse < 1e-18);
        assert_eq!(f.split_indices, [30, 300]);
    }

    #[test]
    fn continuity_at_breakpoints() {
        let v: Vec<f64> = (1..=200)
            .map(|r| 1e4 / (r as f64).powf(0.5 + (r % 7) as f64 * 0.01) + r as f64)
            .collect();
        for k in 1..=3 {
            let f = fit_segmented(&v, k, SegmentOptions::default()).unwrap();
            for (i, b) in f.breakpoints.iter().enumerate() {
                assert!((f.segments[i].at(*b) - f.segments[i + 1].at(*b)).abs() < 1e-9);
            }
            assert_eq!(f.param_count(), 2 + 2 * k);
        }
    }

    #[test]
    fn discontinuous_exact_steps() {
        let v: Vec<f64> = (1..=60)
            .map(|r| {
                let x = (r as f64).log10();
                if r <= 20 {
                    10f64.powf(3.0 - x)
                } else {
                    10f64.powf(1.0 - 0.2 * x)
                }
            })
            .collect();
        let opts = SegmentOptions {
            continuous: false,
            min_segment_size: 5,
        };
        let f = fit_segmented(&v, 1, opts).unwrap();
        assert_eq!(f.split_indices, [20]);
        assert!(f.sse < 1e-20);
        assert_eq!(f.param_count(), 5);
    }

    #[test]
    fn sse_nested_in_k() {
        let v: Vec<f64> = (1..=120)
            .map(|r| 1e3 / (r as f64) + 50.0 * ((r * 37) % 11) as f64)
            .collect();
        for continuous in [true, false] {
            let opts = SegmentOptions {
                continuous,
                min_segment_size: 5,
            };
            let sses: Vec<f64> = (0..=2)
                .map(|k| fit_segmented(&v, k, opts).unwrap().sse)
                .collect();
            assert!(
                sses[1] <= sses[0] + 1e-12 && sses[2] <= sses[1] + 1e-12,
                "{sses:?}"
            );
        }
    }

    #[test]
    fn exhaustive_pair_matches_brute_force() {
        let v: Vec<f64> = (1..=40)
            .map(|r| 1e3 / (r as f64).powf(1.1) * (1.0 + 0.3 * ((r * 13) % 7) as f64))
            .collect();
        let opts = SegmentOptions {
            continuous: true,
            min_segment_size: 3,
        };
        let f = fit_segmented(&v, 2, opts).unwrap();
        let (x, y) = log_points(&v).unwrap();
        let mut best = f64::INFINITY;
        for j1 in 3..=37 {
            for j2 in j1 + 3..=37 {
                best = best.min(refit(&x, &y, &[j1, j2], true).unwrap().sse);
            }
        }
        assert!((f.sse - best).abs() < 1e-10, "{} vs {}", f.sse, best);
    }

    #[test]
    fn errors() {
        let v = vec![3.0f64, 2.0, 1.0, 0.5];
        assert!(matches!(
            fit_segmented(&v, 1, SegmentOptions::default()),
            Err(RankFitError::InfeasibleSegmentation { needed: 10, .. })
        ));
        assert!(matches!(
            fit_segmented(&v[..2], 0, SegmentOptions::default()),
            Err(RankFitError::TooFewPoints { .. })
        ));
        let bad = SegmentOptions {
            continuous: true,
            min_segment_size: 1,
        };
        assert!(matches!(
            fit_segmented(&v, 0, bad),
            Err(RankFitError::InvalidOptions(_))
        ));
    }

    #[test]
    fn noise_free_line_selects_k0() {
        let v: Vec<f64> = (1..=300).map(|r| 40.0 * (r as f64).powf(-0.9)).collect();
        assert_eq!(
            select_segments(&v, 3, SegmentOptions::default()).unwrap().k,
            0
        );
    }

    #[test]
    fn noise_free_break_selects_k1() {
        let v = broken(500, (60.0f64 * 61.0).sqrt().log10(), -0.3, -1.5);
        let f = select_segments(&v, 3, SegmentOptions::default()).unwrap();
        assert_eq!(f.k, 1);
        assert_eq!(f.split_indices, [60]);
    }
}
