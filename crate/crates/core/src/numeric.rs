//! Small scalar numerics shared by the solver modules: bracketing
//! bisection, golden-section minimization, log-spaced scans and the
//! area of the unit sphere.

use std::f64::consts::PI;

/// Area of the unit sphere `S^{n-1}` in `R^n`, `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    assert!(dim >= 1, "dimension must be positive");
    // Γ(n/2) by the half-integer recursion; exact enough for small n.
    let gamma_half = if dim.is_multiple_of(2) {
        (1..dim / 2).map(|k| k as f64).product::<f64>()
    } else {
        let k = (dim - 1) / 2;
        (0..k).map(|j| j as f64 + 0.5).product::<f64>() * PI.sqrt()
    };
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half
}

/// `count` points geometrically spaced between `lo` and `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && count >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == count - 1 {
                hi
            } else {
                (llo + (lhi - llo) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// `count` points uniformly spaced between `lo` and `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

/// Bisection on a boolean predicate. `inside(lo)` and `inside(hi)` must
/// differ; returns the final `(lo, hi)` pair, which keeps the predicate
/// value of each original end. Stops when the interval can no longer be
/// split or after `max_iter` halvings.
pub fn bisect_predicate<P>(mut lo: f64, mut hi: f64, max_iter: usize, mut inside: P) -> (f64, f64)
where
    P: FnMut(f64) -> bool,
{
    let lo_state = inside(lo);
    for _ in 0..max_iter {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo.min(hi) || mid >= hi.max(lo) {
            break;
        }
        if inside(mid) == lo_state {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Root of a continuous `f` with `f(lo)` and `f(hi)` of opposite signs.
/// Returns the endpoint with the smaller residual.
pub fn bisect_root<F>(lo: f64, hi: f64, max_iter: usize, mut f: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    let negative_at_lo = f(lo) < 0.0;
    let (a, b) = bisect_predicate(lo, hi, max_iter, |x| {
        let y = f(x);
        if y == 0.0 {
            // an exact zero belongs to whichever side we are not tracking
            !negative_at_lo
        } else {
            y < 0.0
        }
    });
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub fn golden_min<F>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimum of `f` over a monotone scan grid, refined by golden section on
/// the two cells around the best scan point, optionally in log coordinates.
pub fn minimize_on_scan<F>(points: &[f64], log_coords: bool, mut f: F) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let values: Vec<f64> = points.iter().map(|&t| f(t)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold((0usize, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let lo = points[best.saturating_sub(1)];
    let hi = points[(best + 1).min(points.len() - 1)];
    if lo == hi {
        return (points[best], values[best]);
    }
    let (x, fx) = if log_coords {
        let (lx, fx) = golden_min(lo.ln(), hi.ln(), 1e-13, |y| f(y.exp()));
        (lx.exp(), fx)
    } else {
        golden_min(lo, hi, 1e-13 * (1.0 + hi.abs()), &mut f)
    };
    if fx <= values[best] {
        (x, fx)
    } else {
        (points[best], values[best])
    }
}
