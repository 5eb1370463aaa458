//! Composite Simpson quadrature, 1-d and tensorized on a rectangle.
//! Interval counts are rounded up to powers of two so halving the spacing for
//! refinement-ratio reports keeps grids nested.

use crate::domain::Rect;
use crate::exec;

/// Next power of two at or above `n`, at least 2.
pub fn pow2_at_least(n: usize) -> usize {
    let mut p = 2;
    while p < n {
        p *= 2;
    }
    p
}

/// Composite Simpson on `[a,b]` with `n` intervals (`n` even, >= 2).
pub fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    debug_assert!(n >= 2 && n % 2 == 0, "Simpson needs an even interval count");
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Tensor Simpson over `rect` with `nt` x `nx` intervals.  Rows (fixed t) are
/// evaluated concurrently; the weighted row combination is sequential, so the
/// result is independent of the worker count.
pub fn simpson2d<F>(rect: &Rect, nt: usize, nx: usize, f: F) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    debug_assert!(nt % 2 == 0 && nx % 2 == 0);
    let ht = rect.t_span() / nt as f64;
    let rows = exec::map_indexed(nt + 1, |i| {
        let t = rect.t0 + i as f64 * ht;
        simpson(rect.x0, rect.x1, nx, |x| f(t, x))
    });
    let mut total = rows[0] + rows[nt];
    for (i, row) in rows.iter().enumerate().take(nt).skip(1) {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * row;
    }
    total * ht / 3.0
}
