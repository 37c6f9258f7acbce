//! Composite Simpson quadrature over (possibly irregular) sample grids.

use std::ops::{AddAssign, Mul};

/// Number of subintervals of a uniform grid over `[a, b]` with step at most
/// `max_step`, rounded up to an even count.
pub fn even_subdivisions(a: f64, b: f64, max_step: f64) -> usize {
    let raw = ((b - a) / max_step).ceil().max(1.0) as usize;
    raw + raw % 2
}

/// Uniform grid of `n + 1` nodes over `[a, b]` with exact endpoints.
pub fn uniform_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    let mut nodes: Vec<f64> = (0..=n).map(|k| a + h * k as f64).collect();
    nodes[n] = b;
    nodes
}

/// Composite Simpson weights for the nodes `t`, valid for irregular spacing.
///
/// Pairs of intervals use the three-point rule for unequal widths; an odd
/// trailing interval is closed with the quadratic through the last three
/// nodes. Two nodes degrade to the trapezoid rule.
pub fn simpson_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    if n == 2 {
        let h = t[1] - t[0];
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut i = 0;
    while i < paired {
        let h0 = t[i + 1] - t[i];
        let h1 = t[i + 2] - t[i + 1];
        let s = h0 + h1;
        w[i] += s / 6.0 * (2.0 - h1 / h0);
        w[i + 1] += s / 6.0 * (s * s / (h0 * h1));
        w[i + 2] += s / 6.0 * (2.0 - h0 / h1);
        i += 2;
    }
    if intervals % 2 == 1 {
        let h0 = t[n - 2] - t[n - 3];
        let h1 = t[n - 1] - t[n - 2];
        w[n - 1] += (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        w[n - 2] += (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        w[n - 3] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    w
}

/// Integrate sampled values `f(t_k)` with [`simpson_weights`].
pub fn simpson<T>(t: &[f64], values: &[T]) -> Option<T>
where
    T: Clone + AddAssign + Mul<f64, Output = T>,
{
    assert_eq!(t.len(), values.len());
    let weights = simpson_weights(t);
    let mut iter = values.iter().zip(weights);
    let (v0, w0) = iter.next()?;
    let mut acc = v0.clone() * w0;
    for (v, w) in iter {
        acc += v.clone() * w;
    }
    Some(acc)
}
