//! Santaló volumes, trapped-set fractions and Busemann functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::angles::unit_sphere_area;
use crate::error::{Error, Result};
use crate::geodesic::{cover_distance, geodesic_flow, integrate_until_exit, ExitVerdict, Start, StepControl};
use crate::manifold::{BoundaryVector, ManifoldKind, ManifoldSpec};
use crate::quadrature::integrate;
use crate::sampling::{monte_carlo_chunk, CHUNK};
use crate::scattering::{record_for, with_workers, LensPath, Status};

/// Evaluate `f` on every chunk of the seeded sample sequence in parallel and
/// return the per-chunk results in chunk order.
fn over_chunks<A: Send>(
    spec: &ManifoldSpec,
    samples: usize,
    seed: u64,
    workers: usize,
    f: impl Fn(&[BoundaryVector]) -> Result<A> + Sync + Send,
) -> Result<Vec<A>> {
    let ty = spec.boundary_type();
    let chunks = samples.div_ceil(CHUNK);
    with_workers(workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(samples - c * CHUNK);
                f(&monte_carlo_chunk(&ty, seed, c, len))
            })
            .collect::<Result<Vec<A>>>()
    })?
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SantaloEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub samples: usize,
    pub budget: f64,
    pub censored_fraction: f64,
    pub seed: u64,
}

/// Running mean and centered second moment (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
    censored: usize,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        let count = self.count + o.count;
        if count == 0.0 {
            return self;
        }
        let d = o.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * o.count / count,
            m2: self.m2 + o.m2 + d * d * self.count * o.count / count,
            censored: self.censored + o.censored,
        }
    }
}

/// Volume from boundary data by Santaló's formula,
///
/// ```text
/// Vol(M) · |S^{d-1}| = ∫_{U⁺∂M} TT(V) ⟨V, η⁺⟩ dσ,
/// ```
///
/// with the boundary integral estimated by uniform sampling of
/// `U⁺∂M`, whose total mass is `Area(∂M) · |S^{d-1}| / 2`. Samples still
/// inside at `budget` contribute `budget · ⟨V, η⁺⟩`, a lower bound.
pub fn santalo_volume(
    spec: &ManifoldSpec,
    samples: usize,
    budget: f64,
    seed: u64,
    path: LensPath,
    ctrl: &StepControl,
    workers: usize,
) -> Result<SantaloEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("santalo_volume needs at least 2 samples".into()));
    }
    let spec = spec.clone().with_budget(budget)?;
    let d = spec.dim();
    let sphere = unit_sphere_area(d - 1);
    let mass = spec.boundary_type().area() * 0.5 * sphere;
    let scale = mass / sphere;
    let chunks = over_chunks(&spec, samples, seed, workers, |batch| {
        let mut m = Moments::default();
        for b in batch {
            let r = record_for(&spec, b, path, ctrl)?;
            let tt = match r.status {
                Status::Trapped { budget: bound } => {
                    m.censored += 1;
                    bound.unwrap_or(budget)
                }
                _ => r.travel_time,
            };
            m.push(tt * b.normal_component());
        }
        Ok(m)
    })?;
    let total = chunks.into_iter().fold(Moments::default(), Moments::merge);
    let n = samples as f64;
    let var = total.m2 / (n - 1.0);
    Ok(SantaloEstimate {
        volume: scale * total.mean,
        std_error: scale * (var / n).sqrt(),
        samples,
        budget,
        censored_fraction: total.censored as f64 / n,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappedFraction {
    pub budget: f64,
    /// Non-grazing samples (the denominator).
    pub samples: usize,
    pub grazing_excluded: usize,
    pub trapped: usize,
    pub fraction: f64,
    /// Binomial standard error at the observed fraction.
    pub std_error: f64,
    /// Normal-approximation 95% interval, clipped to `[0, 1]`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

/// Fraction of uniformly sampled inward vectors still inside at `budget`.
pub fn trapped_fraction(
    spec: &ManifoldSpec,
    budget: f64,
    samples: usize,
    seed: u64,
    ctrl: &StepControl,
    workers: usize,
) -> Result<TrappedFraction> {
    let counts = over_chunks(spec, samples, seed, workers, |batch| {
        let (mut trapped, mut grazing) = (0usize, 0usize);
        for b in batch {
            let t = integrate_until_exit(spec, &Start::Boundary(b.clone()), budget, ctrl, false)?;
            match t.verdict {
                ExitVerdict::Trapped { .. } => trapped += 1,
                ExitVerdict::Grazing => grazing += 1,
                ExitVerdict::Exited { .. } => {}
            }
        }
        Ok((trapped, grazing))
    })?;
    let trapped: usize = counts.iter().map(|c| c.0).sum();
    let grazing: usize = counts.iter().map(|c| c.1).sum();
    let n = samples - grazing;
    if n == 0 {
        return Err(Error::InvalidParameter("every sample was grazing".into()));
    }
    let p = trapped as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    Ok(TrappedFraction {
        budget,
        samples: n,
        grazing_excluded: grazing,
        trapped,
        fraction: p,
        std_error: se,
        ci_low: (p - 1.96 * se).max(0.0),
        ci_high: (p + 1.96 * se).min(1.0),
        seed,
    })
}

/// Exact `P(TT > budget)` under uniform sampling of `U⁺∂M` on the flat
/// specs where the tail has a closed form:
///
/// * flat `D² × S¹` of radius `R`: with `β` the horizontal angle from the
///   inward normal and `ψ` the polar angle from the fiber, `TT = 2R cos β / sin ψ`
///   and `P = (1/π) ∫_{-π/2}^{π/2} 1 - √(1 - a²) dβ`, `a = min(1, 2R cos β / T)`;
/// * flat cylinder: `TT = 2 / cos φ`, `P = 1 - (2/π) arccos(2/T)`.
pub fn flat_trapped_tail(spec: &ManifoldSpec, budget: f64) -> Result<f64> {
    match spec.kind() {
        ManifoldKind::FlatProduct(f) if f.n == 2 => {
            let r = f.disc_radius;
            let g = |beta: f64| {
                let a = (2.0 * r * beta.cos() / budget).min(1.0);
                a * a / (1.0 + (1.0 - a * a).sqrt())
            };
            let scale = (r / budget).powi(2).min(1.0);
            Ok(integrate(g, -FRAC_PI_2, FRAC_PI_2, 1e-9 * scale).value / PI)
        }
        ManifoldKind::SurfaceOfRevolution { profile } if profile.is_flat() => {
            if budget <= 2.0 {
                Ok(1.0)
            } else {
                Ok(1.0 - 2.0 * (2.0 / budget).acos() / PI)
            }
        }
        _ => Err(Error::InvalidParameter(
            "closed-form trapped tail is available for flat D²×S¹ and the flat cylinder only".into(),
        )),
    }
}

/// Approximating function `f_t(p) = d(p, γ_V(t)) - t` in the universal-cover
/// model, where the chart is taken literally (angle unwrapped) and the metric
/// formulas extend flatly past the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Horofunction {
    spec: ManifoldSpec,
    base: Vec<f64>,
    direction: Vec<f64>,
    t: f64,
    target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusemannSample {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub point: Vec<f64>,
    pub t: f64,
    pub value: f64,
}

/// Smallest horizontal speed accepted for a defining vector: lines closer to
/// vertical are excluded (they are the fibers, which never leave).
pub const MIN_HORIZONTAL: f64 = 1e-3;

impl Horofunction {
    pub fn new(spec: &ManifoldSpec, base: &[f64], direction: &[f64], t: f64) -> Result<Self> {
        let n = spec
            .product_base()
            .ok_or_else(|| Error::InvalidParameter("Busemann functions need a product spec".into()))?
            .n;
        if base.len() != n + 1 || direction.len() != n + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {}-dimensional base point and direction",
                n + 1
            )));
        }
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("truncation time t = {t} must be positive")));
        }
        let g = spec.metric_raw(base);
        let mut norm2 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                norm2 += g[(i, j)] * direction[i] * direction[j];
            }
        }
        let drift = (norm2 - 1.0).abs();
        if drift > crate::geodesic::UNIT_TOL {
            return Err(Error::NonUnit(drift));
        }
        let horizontal = direction[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        if horizontal < MIN_HORIZONTAL {
            return Err(Error::VerticalLine(format!(
                "defining vector has horizontal speed {horizontal:.3e}; its line is vertical"
            )));
        }
        let (target, _) = geodesic_flow(spec, base, direction, t, &StepControl::default())?;
        Ok(Horofunction {
            spec: spec.clone(),
            base: base.to_vec(),
            direction: direction.to_vec(),
            t,
            target,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `γ_V(t)` in cover coordinates.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(cover_distance(&self.spec, p, &self.target)? - self.t)
    }

    pub fn sample(&self, p: &[f64]) -> Result<BusemannSample> {
        Ok(BusemannSample {
            base: self.base.clone(),
            direction: self.direction.clone(),
            point: p.to_vec(),
            t: self.t,
            value: self.value(p)?,
        })
    }

    /// Central-difference gradient (chart components) with step `h`.
    pub fn gradient(&self, p: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[i] += h;
            b[i] -= h;
            out.push((self.value(&a)? - self.value(&b)?) / (2.0 * h));
        }
        Ok(out)
    }

    /// `|∇f_t|` measured in the metric at `p`.
    pub fn gradient_norm(&self, p: &[f64], h: f64) -> Result<f64> {
        let df = self.gradient(p, h)?;
        let ginv = self
            .spec
            .metric_raw(p)
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular metric".into()))?;
        let mut s = 0.0;
        for i in 0..df.len() {
            for j in 0..df.len() {
                s += ginv[(i, j)] * df[i] * df[j];
            }
        }
        Ok(s.sqrt())
    }
}

/// `f_t(p)` for the line through `base` with direction `direction`.
pub fn busemann_value(spec: &ManifoldSpec, base: &[f64], direction: &[f64], p: &[f64], t: f64) -> Result<f64> {
    Horofunction::new(spec, base, direction, t)?.value(p)
}

/// Default finite-difference step for gradient checks; the central-difference
/// error is `O(h²)` times the Hessian scale `1/t`, well below `1e-6`.
pub const GRADIENT_STEP: f64 = 1e-3;

pub fn busemann_gradient_check(
    spec: &ManifoldSpec,
    base: &[f64],
    direction: &[f64],
    p: &[f64],
    t: f64,
    h: f64,
) -> Result<f64> {
    Horofunction::new(spec, base, direction, t)?.gradient_norm(p, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelCheck {
    pub min_difference: f64,
    pub max_difference: f64,
    /// `max - min` of `f^V - f^W` over the probes.
    pub spread: f64,
}

/// Spread of `f^V - f^W` over `probes`.
pub fn parallel_difference(v: &Horofunction, w: &Horofunction, probes: &[Vec<f64>]) -> Result<ParallelCheck> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in probes {
        let d = v.value(p)? - w.value(p)?;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(ParallelCheck {
        min_difference: lo,
        max_difference: hi,
        spread: hi - lo,
    })
}

/// Point of the level set `{f^W = level}` above horizontal position `x`.
///
/// Requires `W` to rise (positive vertical component), so that `f^W` is
/// strictly decreasing in the fiber coordinate to leading order. Secant
/// iteration safeguarded by bisection.
pub fn level_set_point(w: &Horofunction, x: &[f64], level: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let rise = w.direction[n];
    if rise <= MIN_HORIZONTAL {
        return Err(Error::InvalidParameter(
            "level-set probes need a defining vector with positive vertical component".into(),
        ));
    }
    let at = |z: f64| -> Result<f64> {
        let mut p = x.to_vec();
        p.push(z);
        Ok(w.value(&p)? - level)
    };
    // Leading order: f^W ≈ -⟨p - base, w⟩.
    let lin: f64 = x.iter().zip(&w.base).zip(&w.direction).map(|((a, b), c)| (a - b) * c).sum();
    let z0 = w.base[n] + (-level - lin) / rise;
    let (mut a, mut b) = (z0 - 1.0, z0 + 1.0);
    let (mut fa, mut fb) = (at(a)?, at(b)?);
    let mut widen = 0;
    while fa.signum() == fb.signum() {
        widen += 1;
        if widen > 40 {
            return Err(Error::NoConnection {
                attempts: widen,
                residual: fa.abs().min(fb.abs()),
            });
        }
        let grow = 2.0 * (b - a);
        if fa > 0.0 {
            b += grow;
            fb = at(b)?;
        } else {
            a -= grow;
            fa = at(a)?;
        }
    }
    for _ in 0..100 {
        let mut z = b - fb * (b - a) / (fb - fa);
        if !(z > a.min(b) && z < a.max(b)) {
            z = 0.5 * (a + b);
        }
        let fz = at(z)?;
        if fz.abs() < 1e-11 || (b - a).abs() < 1e-12 {
            let mut p = x.to_vec();
            p.push(z);
            return Ok(p);
        }
        if fz.signum() == fa.signum() {
            a = z;
            fa = fz;
        } else {
            b = z;
            fb = fz;
        }
    }
    Err(Error::NoConnection {
        attempts: 100,
        residual: fa.abs().min(fb.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetProbe {
    pub boundary_min: f64,
    pub boundary_max: f64,
    pub interior_min: f64,
    pub interior_max: f64,
    /// Amount by which interior extrema exceed the boundary range (0 if none).
    pub excess: f64,
}

/// Extrema of `f^V` over `H_W(0) ∩ (Dⁿ × ℝ)` sampled at horizontal positions
/// on `∂Dⁿ` (`boundary_xs`) and inside (`interior_xs`).
pub fn level_set_extrema(
    v: &Horofunction,
    w: &Horofunction,
    boundary_xs: &[Vec<f64>],
    interior_xs: &[Vec<f64>],
) -> Result<LevelSetProbe> {
    let values = |xs: &[Vec<f64>]| -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in xs {
            let p = level_set_point(w, x, 0.0)?;
            let f = v.value(&p)?;
            lo = lo.min(f);
            hi = hi.max(f);
        }
        Ok((lo, hi))
    };
    let (bmin, bmax) = values(boundary_xs)?;
    let (imin, imax) = values(interior_xs)?;
    Ok(LevelSetProbe {
        boundary_min: bmin,
        boundary_max: bmax,
        interior_min: imin,
        interior_max: imax,
        excess: (imax - bmax).max(bmin - imin).max(0.0),
    })
}

/// Directions of a `polar × azimuth` grid at interior point `x` (polar
/// angle measured from the fiber, endpoints included) whose geodesic is still
/// inside after `budget`.
pub fn trapped_directions(
    spec: &ManifoldSpec,
    x: &[f64],
    polar: usize,
    azimuth: usize,
    budget: f64,
    ctrl: &StepControl,
) -> Result<Vec<Vec<f64>>> {
    let n = spec
        .product_base()
        .ok_or_else(|| Error::InvalidParameter("trapped-direction probe needs a product spec".into()))?
        .n;
    if n != 2 || polar < 2 || azimuth == 0 {
        return Err(Error::InvalidParameter(
            "trapped-direction probe supports D²×S¹ with at least 2 polar nodes".into(),
        ));
    }
    let p = spec.chart_point(x)?;
    let lambda = spec.metric_raw(x)[(0, 0)].sqrt();
    let mut out = Vec::new();
    for i in 0..polar {
        let psi = PI * i as f64 / (polar - 1) as f64;
        let ring = if i == 0 || i == polar - 1 { 1 } else { azimuth };
        for j in 0..ring {
            let a = std::f64::consts::TAU * j as f64 / azimuth as f64;
            let dir = vec![
                psi.sin() * a.cos() / lambda,
                psi.sin() * a.sin() / lambda,
                psi.cos() / lambda,
            ];
            let tv = spec.tangent_vector(&p, &dir)?;
            let t = integrate_until_exit(spec, &Start::Interior(tv), budget, ctrl, false)?;
            if matches!(t.verdict, ExitVerdict::Trapped { .. }) {
                out.push(dir);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn flat2() -> ManifoldSpec {
        ManifoldSpec::preset("flat-d2s1").unwrap()
    }

    #[test]
    fn santalo_flat_small_sample() {
        let est = santalo_volume(&flat2(), 20_000, 1e4, 1, LensPath::FlatOracle, &StepControl::default(), 2).unwrap();
        let exact = 2.0 * PI * PI;
        assert!((est.volume - exact).abs() < 4.0 * est.std_error, "{est:?}");
        assert!(est.std_error > 0.0);
    }

    #[test]
    fn santalo_flat_cylinder_is_exact() {
        let spec = ManifoldSpec::preset("flat-cylinder").unwrap();
        let est = santalo_volume(&spec, 5000, 1e4, 1, LensPath::Ode, &StepControl::default(), 1).unwrap();
        // TT · cos φ = 2 for every sample.
        assert!((est.volume - 4.0 * PI).abs() < 1e-8, "{est:?}");
        assert!(est.std_error < 1e-8, "{est:?}");
    }

    #[test]
    fn santalo_is_worker_independent() {
        let run = |w| santalo_volume(&flat2(), 9000, 1e3, 5, LensPath::Ode, &StepControl::default(), w).unwrap();
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn tail_oracle_asymptotics() {
        for t in [1e2, 1e3, 1e4] {
            let p = flat_trapped_tail(&flat2(), t).unwrap();
            assert!((p * t * t - 1.0).abs() < 1e-3 * 1e2 / t + 1e-6, "{t}: {}", p * t * t);
        }
        let cyl = ManifoldSpec::preset("flat-cylinder").unwrap();
        let p = flat_trapped_tail(&cyl, 1e3).unwrap();
        assert!((p * 1e3 - 4.0 / PI).abs() < 1e-3);
    }

    #[test]
    fn tail_oracle_matches_brute_force_grid() {
        // Midpoint rule over (β, ψ) with the sin ψ density.
        let t = 30.0;
        let (nb, np) = (800, 4000);
        let mut acc = 0.0;
        for i in 0..nb {
            let beta = -FRAC_PI_2 + PI * (i as f64 + 0.5) / nb as f64;
            for j in 0..np {
                let psi = PI * (j as f64 + 0.5) / np as f64;
                if 2.0 * beta.cos() / psi.sin() > t {
                    acc += psi.sin();
                }
            }
        }
        let brute = acc * (PI / nb as f64) * (PI / np as f64) / (2.0 * PI);
        let exact = flat_trapped_tail(&flat2(), t).unwrap();
        assert!((brute - exact).abs() < 2e-2 * exact, "{brute} {exact}");
    }

    #[test]
    fn trapped_fraction_decreases_and_excludes_grazing() {
        let f = |t| trapped_fraction(&flat2(), t, 20_000, 9, &StepControl::default(), 2).unwrap();
        let (a, b) = (f(10.0), f(100.0));
        assert!(a.fraction > b.fraction);
        assert_eq!(a.samples + a.grazing_excluded, 20_000);
        let p = flat_trapped_tail(&flat2(), 10.0).unwrap();
        let se = (p * (1.0 - p) / a.samples as f64).sqrt();
        assert!((a.fraction - p).abs() < 4.0 * se);
    }

    #[test]
    fn busemann_along_and_across_the_line() {
        let spec = flat2();
        let v = [1.0, 0.0, 0.0];
        let h = Horofunction::new(&spec, &[0.0; 3], &v, 100.0).unwrap();
        assert!((h.value(&[0.7, 0.0, 0.0]).unwrap() + 0.7).abs() < 1e-9);
        let r: f64 = 2.0;
        let h = Horofunction::new(&spec, &[0.0; 3], &v, 10.0 * r).unwrap();
        let exact = (r * r + 100.0 * r * r).sqrt() - 10.0 * r;
        let got = h.value(&[0.0, r, 0.0]).unwrap();
        assert!((got - exact).abs() < 1e-9);
        assert!((got - r / 20.0).abs() < 1e-3);
    }

    #[test]
    fn busemann_monotone_and_lipschitz() {
        let spec = flat2();
        let v = [0.6, 0.0, 0.8];
        let p = [1.5, -0.4, 2.0];
        let q = [-1.2, 1.1, -0.5];
        let f = |t| Horofunction::new(&spec, &[0.0; 3], &v, t).unwrap();
        assert!(f(20.0).value(&p).unwrap() <= f(10.0).value(&p).unwrap() + 1e-9);
        let d = cover_distance(&spec, &p, &q).unwrap();
        let h = f(50.0);
        assert!((h.value(&p).unwrap() - h.value(&q).unwrap()).abs() <= d * (1.0 + 1e-9));
    }

    #[test]
    fn vertical_lines_are_rejected() {
        assert!(matches!(
            Horofunction::new(&flat2(), &[2.0, 0.0, 0.0], &[0.0, 0.0, 1.0], 10.0),
            Err(Error::VerticalLine(_))
        ));
    }

    #[test]
    fn perturbed_exterior_value_equals_flat() {
        let spec = ManifoldSpec::preset("perturbed-d2s1").unwrap();
        // Line y = 3 stays far from the core at the origin.
        let base = [0.0, 3.0, 0.0];
        let v = [SQRT_2 / 2.0, 0.0, SQRT_2 / 2.0];
        let p = [2.0, 2.5, 1.0];
        let a = busemann_value(&spec, &base, &v, &p, 20.0).unwrap();
        let b = busemann_value(&flat2(), &base, &v, &p, 20.0).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn gradient_norm_is_one() {
        let v = [0.48, 0.64, 0.6];
        let g = busemann_gradient_check(&flat2(), &[1.0, 0.0, 0.0], &v, &[1.5, 1.5, 0.3], 1e3, GRADIENT_STEP).unwrap();
        assert!((g - 1.0).abs() < 1e-3, "{g}");
    }

    #[test]
    fn parallel_lines_differ_by_a_constant() {
        let spec = flat2();
        let dir = [0.6, 0.0, 0.8];
        let v = Horofunction::new(&spec, &[1.0, 0.0, 0.0], &dir, 1e4).unwrap();
        let w = Horofunction::new(&spec, &[-1.0, 1.0, 2.0], &dir, 1e4).unwrap();
        let probes = vec![vec![0.0, 0.0, 0.0], vec![0.5, -0.5, 1.0], vec![-0.3, 0.8, -2.0]];
        assert!(parallel_difference(&v, &w, &probes).unwrap().spread < 1e-3);
    }

    #[test]
    fn level_set_extrema_on_boundary() {
        let spec = flat2();
        let v = Horofunction::new(&spec, &[0.0; 3], &[0.6, 0.0, 0.8], 1e3).unwrap();
        let w = Horofunction::new(&spec, &[0.0; 3], &[0.0, 0.6, 0.8], 1e3).unwrap();
        let circle: Vec<Vec<f64>> = (0..128)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 128.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let inside = vec![vec![0.0, 0.0], vec![0.5, 0.1], vec![-0.3, -0.6]];
        let r = level_set_extrema(&v, &w, &circle, &inside).unwrap();
        assert!(r.excess < 1e-3, "{r:?}");
        let p = level_set_point(&w, &[0.2, 0.3], 0.0).unwrap();
        assert!(w.value(&p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn only_the_fiber_is_trapped() {
        let dirs = trapped_directions(&flat2(), &[0.2, -0.1, 1.0], 9, 8, 1e3, &StepControl::default()).unwrap();
        assert_eq!(dirs.len(), 2);
        assert!((dirs[0][2] - 1.0).abs() < 1e-12 && (dirs[1][2] + 1.0).abs() < 1e-12);
    }
}
