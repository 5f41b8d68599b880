//! Periodic coordinates and small sphere helpers.

use std::f64::consts::PI;

/// Reduce `x` into `[0, period)`.
pub fn reduce(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Signed difference `b - a` folded into `[-period/2, period/2)`.
pub fn wrapped_difference(a: f64, b: f64, period: f64) -> f64 {
    let d = reduce(b - a, period);
    if d >= 0.5 * period {
        d - period
    } else {
        d
    }
}

/// `min(|Δ|, period - |Δ|)` for reduced `Δ`.
pub fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = reduce(b - a, period);
    d.min(period - d)
}

/// Angle in `[0, π]` between two vectors of equal length, accurate near 0 and π.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x / na, y / nb);
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Surface measure of the unit sphere `S^k ⊂ ℝ^{k+1}`.
pub fn unit_sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}
