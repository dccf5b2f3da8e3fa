//! Small dense least-squares kernels.
//!
//! Problems here are tall and thin (thousands of rows, at most a dozen
//! columns), so a column-major Householder QR is both accurate and cheap.

use crate::scalar::Real;

/// Least-squares solution of a tall design matrix.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub coef: Vec<T>,
    /// Residual sum of squares, recomputed from the residuals.
    pub sse: T,
    /// Diagonal of `(X'X)^-1`, used for coefficient standard errors.
    pub inv_gram_diag: Vec<T>,
}

/// Solves `min ||X b - y||` where `columns[j]` is the j-th column of `X`.
///
/// Returns `None` when the design is rank deficient or has fewer rows than columns.
#[allow(clippy::needless_range_loop)]
pub fn lstsq<T: Real>(columns: &[Vec<T>], y: &[T]) -> Option<LeastSquares<T>> {
    let p = columns.len();
    let n = y.len();
    if p == 0 || n < p || columns.iter().any(|c| c.len() != n) {
        return None;
    }
    let mut a: Vec<Vec<T>> = columns.to_vec();
    let mut qty = y.to_vec();
    let mut rdiag = vec![T::zero(); p];

    let col_scale: Vec<T> = a
        .iter()
        .map(|c| c.iter().fold(T::zero(), |m, v| m.max(v.abs())))
        .collect();

    for k in 0..p {
        let norm = a[k][k..].iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        let tiny = T::lit(64.0) * T::epsilon() * col_scale[k].max(T::min_positive_value());
        if norm <= tiny * T::from_usize_lossy(n).sqrt() {
            return None;
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in place of column k.
        a[k][k] -= alpha;
        let vnorm2 = a[k][k..].iter().fold(T::zero(), |s, v| s + *v * *v);
        rdiag[k] = alpha;
        if vnorm2 == T::zero() {
            continue;
        }
        let (head, tail) = a.split_at_mut(k + 1);
        let v = &head[k];
        for col in tail.iter_mut() {
            let dot = v[k..]
                .iter()
                .zip(&col[k..])
                .fold(T::zero(), |s, (x, z)| s + *x * *z);
            let f = (dot + dot) / vnorm2;
            for (c, x) in col[k..].iter_mut().zip(&v[k..]) {
                *c -= f * *x;
            }
        }
        let dot = v[k..]
            .iter()
            .zip(&qty[k..])
            .fold(T::zero(), |s, (x, z)| s + *x * *z);
        let f = (dot + dot) / vnorm2;
        for (c, x) in qty[k..].iter_mut().zip(&v[k..]) {
            *c -= f * *x;
        }
    }

    // R is upper triangular: R[i][j] = a[j][i] for i < j, rdiag on the diagonal.
    let r = |i: usize, j: usize| if i == j { rdiag[i] } else { a[j][i] };

    let mut coef = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in i + 1..p {
            s -= r(i, j) * coef[j];
        }
        coef[i] = s / r(i, i);
    }

    // R^-1 by back substitution, column by column; diag((X'X)^-1) = row norms of R^-1.
    let mut rinv = vec![vec![T::zero(); p]; p];
    for j in 0..p {
        rinv[j][j] = T::one() / r(j, j);
        for i in (0..j).rev() {
            let mut s = T::zero();
            for m in i + 1..=j {
                s += r(i, m) * rinv[m][j];
            }
            rinv[i][j] = -s / r(i, i);
        }
    }
    let inv_gram_diag = (0..p)
        .map(|i| rinv[i][i..].iter().fold(T::zero(), |s, v| s + *v * *v))
        .collect();

    let sse = (0..n)
        .map(|i| {
            let fit = columns
                .iter()
                .zip(&coef)
                .fold(T::zero(), |s, (c, b)| s + c[i] * *b);
            let e = y[i] - fit;
            e * e
        })
        .sum();

    Some(LeastSquares {
        coef,
        sse,
        inv_gram_diag,
    })
}

/// In-place lower Cholesky factor of the row-major `p x p` matrix `g`.
///
/// Only the lower triangle is read and written. Returns `None` if `g` is not
/// numerically positive definite.
pub fn cholesky_factor<T: Real>(g: &mut [T], p: usize) -> Option<()> {
    for j in 0..p {
        let mut d = g[j * p + j];
        for k in 0..j {
            d -= g[j * p + k] * g[j * p + k];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        g[j * p + j] = d;
        for i in j + 1..p {
            let mut s = g[i * p + j];
            for k in 0..j {
                s -= g[i * p + k] * g[j * p + k];
            }
            g[i * p + j] = s / d;
        }
    }
    Some(())
}

/// Solves `L z = b` in place for a factor from [`cholesky_factor`].
#[inline]
pub fn forward_subst<T: Real>(l: &[T], p: usize, b: &mut [T]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

/// Solves the symmetric positive definite system `g x = b` in place via Cholesky.
///
/// `g` is row-major `p x p` and is overwritten by its factor.
pub fn cholesky_solve<T: Real>(g: &mut [T], b: &mut [T], p: usize) -> Option<()> {
    cholesky_factor(g, p)?;
    forward_subst(g, p, b);
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= g[k * p + i] * b[k];
        }
        b[i] = s / g[i * p + i];
    }
    Some(())
}
