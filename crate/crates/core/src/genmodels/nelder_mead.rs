//! Derivative-free simplex minimization.

use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub f: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Settings<T> {
    pub step: T,
    pub max_iter: usize,
    /// Stop when `f_worst - f_best <= rel * |f_best| + abs`.
    pub rel: T,
    pub abs: T,
}

/// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2).
///
/// Non-finite objective values are treated as `+inf`. The best vertex is never
/// discarded, so the result is no worse than `f(x0)`.
pub fn minimize<T: Real, F: FnMut(&[T]) -> T>(mut f: F, x0: &[T], s: Settings<T>) -> Minimum<T> {
    let dim = x0.len();
    let mut eval = |x: &[T]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += s.step;
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable sort keeps earlier vertices first on ties.
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN"));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread_ok = worst - best <= s.rel * best.abs() + s.abs;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        let scale = simplex[0].0.iter().fold(T::one(), |m, v| m.max(v.abs()));
        if (best.is_finite() && spread_ok) || diameter <= T::lit(1e-12) * scale {
            converged = true;
            break;
        }
        if iterations >= s.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += *v;
            }
        }
        let nd = T::from_usize_lossy(dim);
        centroid.iter_mut().for_each(|c| *c /= nd);
        let along = |t: T, w: &[T]| -> Vec<T> {
            centroid
                .iter()
                .zip(w)
                .map(|(c, v)| *c + t * (*v - *c))
                .collect()
        };

        let xw = simplex[dim].0.clone();
        let xr = along(-T::one(), &xw);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-two, &xw);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = along(half, &xr);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(half, &xw);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let x0 = simplex[0].0.clone();
        for (x, fx) in simplex[1..].iter_mut() {
            for (v, b) in x.iter_mut().zip(&x0) {
                *v = *b + half * (*v - *b);
            }
            *fx = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN"));
    let (x, f) = simplex.swap_remove(0);
    Minimum {
        x,
        f,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> Settings<f64> {
        Settings {
            step: 1.0,
            max_iter: 2000,
            rel: 1e-14,
            abs: 1e-30,
        }
    }

    #[test]
    fn rosenbrock() {
        let m = minimize(
            |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            settings(),
        );
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn one_dimensional() {
        let m = minimize(|x: &[f64]| (x[0] - 3.0).powi(2), &[0.0], settings());
        assert!((m.x[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn never_worse_than_start() {
        let m = minimize(
            |x: &[f64]| if x[0] == 0.0 { 0.0 } else { 1.0 + x[0].abs() },
            &[0.0],
            settings(),
        );
        assert_eq!(m.f, 0.0);
        assert_eq!(m.x, [0.0]);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let mut s = settings();
        s.max_iter = 3;
        let m = minimize(
            |x: &[f64]| (x[0] - 100.0).powi(2) + (x[1] + 50.0).powi(2),
            &[0.0, 0.0],
            s,
        );
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }
}
