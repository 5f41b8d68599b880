//! Sampling of inward boundary vectors: open-node grids and seeded uniform
//! Monte Carlo over boundary area × solid angle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::manifold::{BoundaryPoint, BoundaryType, BoundaryVector, End};

/// Samples per Monte Carlo chunk; chunk `k` draws from ChaCha stream `k`, so
/// the sample sequence depends only on the seed.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Sampling {
    /// Product grid, one node count per axis (see [`grid_axes`]). Nodes are
    /// interval midpoints unless `include_endpoints` is set, in which case the
    /// closed interval is sampled and exact tangential vectors can appear.
    Grid {
        counts: Vec<usize>,
        #[serde(default)]
        include_endpoints: bool,
    },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Sampling {
    pub fn len(&self) -> usize {
        match self {
            Sampling::Grid { counts, .. } => counts.iter().product(),
            Sampling::MonteCarlo { samples, .. } => *samples,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Sampling::MonteCarlo { seed, .. } => Some(*seed),
            Sampling::Grid { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    Sign,
    Interval(f64, f64),
    Periodic(f64),
}

/// Axis names of the grid for a boundary type, in order.
pub fn grid_axes(ty: &BoundaryType) -> Vec<&'static str> {
    axes(ty).into_iter().map(|(name, _)| name).collect()
}

fn axes(ty: &BoundaryType) -> Vec<(&'static str, Axis)> {
    match *ty {
        BoundaryType::Cylinder {
            n, circle_length, ..
        } => {
            let mut v = Vec::new();
            push_sphere_axes(&mut v, n - 1, "point");
            v.push(("theta", Axis::Periodic(circle_length)));
            v.push(("polar", Axis::Interval(0.0, FRAC_PI_2)));
            push_sphere_axes(&mut v, n - 1, "azimuth");
            v
        }
        BoundaryType::RevolutionEnds => vec![
            ("end", Axis::Sign),
            ("alpha", Axis::Periodic(TAU)),
            ("phi", Axis::Interval(-FRAC_PI_2, FRAC_PI_2)),
        ],
    }
}

/// Hyperspherical coordinates on `S^k`: a sign for `k = 0`, otherwise `k - 1`
/// angles in `[0, π]` and one periodic angle.
fn push_sphere_axes(v: &mut Vec<(&'static str, Axis)>, k: usize, name: &'static str) {
    if k == 0 {
        v.push((name, Axis::Sign));
        return;
    }
    for _ in 0..k - 1 {
        v.push((name, Axis::Interval(0.0, PI)));
    }
    v.push((name, Axis::Periodic(TAU)));
}

fn node(axis: Axis, k: usize, m: usize, endpoints: bool) -> f64 {
    let frac = if endpoints && m > 1 {
        k as f64 / (m - 1) as f64
    } else {
        (k as f64 + 0.5) / m as f64
    };
    match axis {
        Axis::Sign => {
            if m == 1 || 2 * k < m {
                -1.0
            } else {
                1.0
            }
        }
        Axis::Interval(a, b) => a + frac * (b - a),
        Axis::Periodic(p) => {
            if endpoints && m > 1 {
                k as f64 * p / m as f64
            } else {
                frac * p
            }
        }
    }
}

/// `S^k` from `k` hyperspherical angles, or from a single sign when `k = 0`.
fn sphere_point(k: usize, coords: &[f64]) -> Vec<f64> {
    if k == 0 {
        return vec![coords[0]];
    }
    let mut out = vec![0.0; k + 1];
    let mut s = 1.0;
    for i in 0..k {
        out[i] = s * coords[i].cos();
        s *= coords[i].sin();
    }
    out[k] = s;
    out
}

/// Orthonormal basis of `u^⊥ ⊂ ℝⁿ` by Gram–Schmidt against the standard basis.
pub(crate) fn complement_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut basis: Vec<Vec<f64>> = vec![u.to_vec()];
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut w = vec![0.0; n];
        w[e] = 1.0;
        for b in &basis {
            let d: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= d * bi;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(w.iter().map(|x| x / norm).collect());
        }
    }
    basis.remove(0);
    basis
}

/// Inward vector at `(u, θ)` with polar angle `a` from the inward normal and
/// unit tangent direction `w ∈ S^{n-1}` expressed in the frame
/// `(complement basis of u, vertical)`.
fn cylinder_vector(u: Vec<f64>, theta: f64, a: f64, w: &[f64]) -> Result<BoundaryVector> {
    let n = u.len();
    let frame = complement_basis(&u);
    let mut dir = vec![0.0; n + 1];
    for i in 0..n {
        dir[i] = -a.cos() * u[i];
    }
    for (j, e) in frame.iter().enumerate() {
        for i in 0..n {
            dir[i] += a.sin() * w[j] * e[i];
        }
    }
    dir[n] += a.sin() * w[n - 1];
    BoundaryVector::cylinder(u, theta, dir)
}

pub fn grid_entries(ty: &BoundaryType, counts: &[usize], endpoints: bool) -> Result<Vec<BoundaryVector>> {
    let ax = axes(ty);
    if counts.len() != ax.len() {
        return Err(Error::SamplingMismatch(format!(
            "grid needs {} axis counts ({}) for this boundary, got {}",
            ax.len(),
            grid_axes(ty).join(", "),
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::SamplingMismatch("grid counts must be positive".into()));
    }
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        let vals: Vec<f64> = ax
            .iter()
            .zip(&idx)
            .zip(counts)
            .map(|(((_, a), &k), &m)| node(*a, k, m, endpoints))
            .collect();
        out.push(grid_vector(ty, &vals)?);
        // Last axis varies fastest.
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}

fn grid_vector(ty: &BoundaryType, vals: &[f64]) -> Result<BoundaryVector> {
    match *ty {
        BoundaryType::Cylinder { n, .. } => {
            let k = n - 1;
            let pk = k.max(1);
            let u = sphere_point(k, &vals[..pk]);
            let theta = vals[pk];
            let a = vals[pk + 1];
            let w = sphere_point(k, &vals[pk + 2..]);
            cylinder_vector(u, theta, a, &w)
        }
        BoundaryType::RevolutionEnds => {
            BoundaryVector::meridian(End::from_sign(vals[0]), vals[1], vals[2])
        }
    }
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// One inward vector, uniform with respect to boundary area × solid angle.
pub fn uniform_inward(ty: &BoundaryType, rng: &mut ChaCha8Rng) -> BoundaryVector {
    match *ty {
        BoundaryType::Cylinder {
            n, circle_length, ..
        } => {
            let u = gaussian_unit(rng, n);
            let theta = rng.gen_range(0.0..circle_length);
            let mut dir = gaussian_unit(rng, n + 1);
            let c: f64 = -u.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            if c < 0.0 {
                // Reflect through the tangent hyperplane.
                for i in 0..n {
                    dir[i] += 2.0 * c * u[i];
                }
            }
            BoundaryVector::cylinder(u, theta, dir).expect("unit sample")
        }
        BoundaryType::RevolutionEnds => {
            let end = if rng.gen::<bool>() { End::Upper } else { End::Lower };
            let alpha = rng.gen_range(0.0..TAU);
            let d = gaussian_unit(rng, 2);
            let inward = -end.sign();
            let along = if d[0] * inward < 0.0 { -d[0] } else { d[0] };
            BoundaryVector::new(BoundaryPoint::End { end, alpha }, vec![along, d[1]])
                .expect("unit sample")
        }
    }
}

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// The first `len` samples of chunk `chunk` (stream `chunk` of the seeded generator).
pub fn monte_carlo_chunk(ty: &BoundaryType, seed: u64, chunk: usize, len: usize) -> Vec<BoundaryVector> {
    let mut rng = chunk_rng(seed, chunk);
    (0..len).map(|_| uniform_inward(ty, &mut rng)).collect()
}

pub fn entries(ty: &BoundaryType, sampling: &Sampling) -> Result<Vec<BoundaryVector>> {
    match sampling {
        Sampling::Grid {
            counts,
            include_endpoints,
        } => grid_entries(ty, counts, *include_endpoints),
        Sampling::MonteCarlo { samples, seed } => {
            let mut out = Vec::with_capacity(*samples);
            let chunks = samples.div_ceil(CHUNK);
            for c in 0..chunks {
                let len = CHUNK.min(samples - c * CHUNK);
                out.extend(monte_carlo_chunk(ty, *seed, c, len));
            }
            Ok(out)
        }
    }
}
