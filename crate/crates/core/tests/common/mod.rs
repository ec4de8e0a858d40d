//! Independent reference solver for the radial ground state of
//! `v'' + (N−1)/r v' + g(v) = 0`: adaptive Dormand–Prince 5(4) with
//! event detection, and bisection on the initial value.

#![allow(dead_code)]

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shot {
    Overshoot,
    Undershoot,
    Undecided,
}

fn rhs(g: &dyn Fn(f64) -> f64, dim: f64, r: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -(dim - 1.0) / r * y[1] - g(y[0])]
}

/// Integrate from `v(0) = beta` to `r_max` and report which way the
/// trajectory leaves.
pub fn shoot(g: &dyn Fn(f64) -> f64, dim: usize, beta: f64, r_max: f64, rtol: f64) -> Shot {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let n = dim as f64;
    // Taylor start away from the singular point
    let mut r = 1e-6;
    let mut y = [beta - g(beta) * r * r / (2.0 * n), -g(beta) * r / n];
    let mut h: f64 = 1e-4;
    while r < r_max {
        h = h.min(r_max - r);
        let mut k = [[0.0; 2]; 7];
        for s in 0..7 {
            let mut ys = y;
            for j in 0..s {
                ys[0] += h * A[s][j] * k[j][0];
                ys[1] += h * A[s][j] * k[j][1];
            }
            k[s] = rhs(g, n, r + C[s] * h, ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..2 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][c];
                d4 += B4[s] * k[s][c];
            }
            y5[c] += h * d5;
            let scale = 1e-14 + rtol * y[c].abs().max(y5[c].abs());
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        if err <= 1.0 {
            r += h;
            y = y5;
            if y[0] < 0.0 {
                return Shot::Overshoot;
            }
            if y[1] > 0.0 {
                return Shot::Undershoot;
            }
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    Shot::Undecided
}

/// Initial value of the ground state by bisection on `[lo, hi]`.
pub fn ground_state_beta(g: &dyn Fn(f64) -> f64, dim: usize, lo: f64, hi: f64, r_max: f64, rtol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    assert_eq!(shoot(g, dim, lo, r_max, rtol), Shot::Undershoot);
    assert_eq!(shoot(g, dim, hi, r_max, rtol), Shot::Overshoot);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match shoot(g, dim, mid, r_max, rtol) {
            Shot::Undershoot => lo = mid,
            Shot::Overshoot => hi = mid,
            Shot::Undecided => return mid,
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn cubic(s: f64) -> f64 {
    s * s * s - s
}
