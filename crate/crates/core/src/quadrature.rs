//! One-dimensional quadrature rules.
//!
//! Integrands in this crate are entire functions times Gaussians. The
//! trapezoid rule converges geometrically for such integrands, and its
//! step-halving refinement reuses every previous node, so it doubles as the
//! convergence check. Gauss–Legendre nodes (from `gauss-quad`) are used for
//! finite intervals with smooth integrands.

use gauss_quad::legendre::GaussLegendre;

/// Adaptive trapezoid for a vector-valued integrand on `[a, b]`.
///
/// `f(x, out)` must add nothing and overwrite `out` with the integrand
/// values at `x`. Step halving stops when every component changes by less
/// than `tol · max(1, |I|)` or after `max_levels` halvings.
pub fn trapezoid_vec<F>(f: F, len: usize, a: f64, b: f64, initial_points: usize, tol: f64) -> Vec<f64>
where
    F: Fn(f64, &mut [f64]),
{
    const MAX_LEVELS: usize = 12;
    let n0 = initial_points.max(2);
    let mut h = (b - a) / (n0 - 1) as f64;
    let mut buf = vec![0.0; len];
    let mut sum = vec![0.0; len];
    for i in 0..n0 {
        let x = a + i as f64 * h;
        f(x, &mut buf);
        let w = if i == 0 || i == n0 - 1 { 0.5 } else { 1.0 };
        for (s, v) in sum.iter_mut().zip(&buf) {
            *s += w * v;
        }
    }
    let mut estimate: Vec<f64> = sum.iter().map(|s| s * h).collect();
    let mut intervals = n0 - 1;
    for _ in 0..MAX_LEVELS {
        for i in 0..intervals {
            let x = a + (i as f64 + 0.5) * h;
            f(x, &mut buf);
            for (s, v) in sum.iter_mut().zip(&buf) {
                *s += v;
            }
        }
        intervals *= 2;
        h *= 0.5;
        let refined: Vec<f64> = sum.iter().map(|s| s * h).collect();
        let done = refined
            .iter()
            .zip(&estimate)
            .all(|(r, e)| (r - e).abs() <= tol * r.abs().max(1.0));
        estimate = refined;
        if done {
            break;
        }
    }
    estimate
}

/// Scalar version of [`trapezoid_vec`].
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, initial_points: usize, tol: f64) -> f64 {
    trapezoid_vec(|x, out| out[0] = f(x), 1, a, b, initial_points, tol)[0]
}

/// Trapezoid rule on a user-supplied (possibly non-uniform) grid.
pub fn trapezoid_grid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Gauss–Legendre integral of `f` on `[a, b]` with `n` nodes.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let rule = GaussLegendre::new(n.max(2)).expect("degree checked above");
    rule.integrate(a, b, f)
}
