//! The acceptance suite as a library: each criterion runs on seeded inputs
//! and yields named checks with measured values and limits. Reports exclude
//! timings and worker counts, so they are byte-identical across runs with
//! the same seed and scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geodesic::{integrate_until_exit, Start, StepControl};
use crate::integralgeom::{
    flat_trapped_tail, level_set_extrema, parallel_difference, santalo_volume, trapped_fraction,
    Horofunction, GRADIENT_STEP,
};
use crate::manifold::{BumpProfile, ManifoldSpec};
use crate::revolution::{clairaut_drift, family_invariance_scan, ScanPath};
use crate::sampling::{uniform_inward, Sampling};
use crate::scattering::{
    compare, first_variation_residual, lens_table, scattering_map, with_workers, BoundaryCurve,
    LensPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Sample counts as stated in the acceptance criteria.
    Full,
    /// Reduced counts for smoke runs; same checks and tolerances.
    Quick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    pub seed: u64,
    pub workers: usize,
    pub scale: Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit,
            passed: value < limit,
        }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    fn new(id: u32, name: &str, checks: Vec<Check>) -> Self {
        CriterionResult {
            id,
            name: name.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One-line summary: `PASS`/`FAIL`, name, and any failing checks.
    pub fn line(&self) -> String {
        let failing: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:.3e} (limit {:.3e})", c.name, c.value, c.limit))
            .collect();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        if failing.is_empty() {
            format!("[{verdict}] {}. {}", self.id, self.name)
        } else {
            format!("[{verdict}] {}. {}: {}", self.id, self.name, failing.join("; "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub scale: Scale,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn new(seed: u64, scale: Scale, criteria: Vec<CriterionResult>) -> Self {
        SelftestReport {
            seed,
            scale,
            passed: criteria.iter().all(|c| c.passed),
            criteria,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const CRITERIA: [u32; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// Run one criterion; returns its result and wall time.
pub fn run_criterion(id: u32, opts: &SelftestOptions) -> Result<(CriterionResult, Duration)> {
    let start = Instant::now();
    let r = match id {
        1 => flat_oracle(opts)?,
        2 => family_invariance(opts)?,
        3 => clairaut_conservation(opts)?,
        4 => reversibility(opts)?,
        5 => first_variation(opts)?,
        6 => santalo(opts)?,
        7 => trapped_decay(opts)?,
        8 => busemann(opts)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "no criterion {other} (expected 1-8)"
            )))
        }
    };
    Ok((r, start.elapsed()))
}

pub fn run_selftest(opts: &SelftestOptions) -> Result<(SelftestReport, Vec<Duration>)> {
    let mut results = Vec::new();
    let mut times = Vec::new();
    for id in CRITERIA {
        let (r, t) = run_criterion(id, opts)?;
        results.push(r);
        times.push(t);
    }
    Ok((SelftestReport::new(opts.seed, opts.scale, results), times))
}

fn pick(opts: &SelftestOptions, full: usize, quick: usize) -> usize {
    match opts.scale {
        Scale::Full => full,
        Scale::Quick => quick,
    }
}

/// Distinct seeds per criterion and role, derived from the run seed.
fn sub_seed(opts: &SelftestOptions, tag: u64) -> u64 {
    opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

fn flat_oracle(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let samples = pick(opts, 10_000, 1_000);
    let mut checks = Vec::new();
    for (tag, name) in [(11, "flat-d2s1"), (12, "flat-d3s1")] {
        let spec = ManifoldSpec::preset(name)?;
        let s = Sampling::MonteCarlo {
            samples,
            seed: sub_seed(opts, tag),
        };
        let ode = lens_table(&spec, &s, LensPath::Ode, &ctrl, opts.workers)?;
        let oracle = lens_table(&spec, &s, LensPath::FlatOracle, &ctrl, opts.workers)?;
        let rep = compare(&ode, &oracle)?;
        checks.push(Check::below(&format!("{name}.exit_position"), rep.max.position, 1e-8));
        checks.push(Check::below(&format!("{name}.exit_direction"), rep.max.direction, 1e-8));
        checks.push(Check::below(&format!("{name}.travel_time"), rep.max.travel_time, 1e-8));
        checks.push(Check::at_most(
            &format!("{name}.status_disagreements"),
            rep.status_disagreements as f64,
            0.0,
        ));
    }
    Ok(CriterionResult::new(1, "flat oracle equivalence", checks))
}

/// `k` midpoint angles in `(-π/2, π/2)`.
pub fn midpoint_angles(k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| -FRAC_PI_2 + PI * (i as f64 + 0.5) / k as f64)
        .collect()
}

fn family_invariance(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let angles = midpoint_angles(30);
    let mut checks = Vec::new();
    for (path, name, limit) in [
        (ScanPath::Quadrature, "quadrature.max_deviation", 1e-9),
        (ScanPath::Ode, "ode.max_deviation", 1e-4),
    ] {
        let devs = with_workers(opts.workers, || {
            [-0.5, 0.25, 0.5]
                .par_iter()
                .map(|&s| {
                    family_invariance_scan(0.2, 0.05, &[0.0, s], &angles, path, &ctrl)
                        .map(|r| r.max_deviation.overall)
                })
                .collect::<Result<Vec<f64>>>()
        })??;
        checks.push(Check::below(name, devs.iter().cloned().fold(0.0, f64::max), limit));
    }
    Ok(CriterionResult::new(2, "bump-family scattering invariance", checks))
}

fn clairaut_conservation(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let spec = ManifoldSpec::preset("bump")?;
    let profile = *spec.profile().expect("revolution");
    let ty = spec.boundary_type();
    let n = pick(opts, 1_000, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(opts, 31));
    let starts: Vec<_> = (0..n).map(|_| uniform_inward(&ty, &mut rng)).collect();
    let drifts = with_workers(opts.workers, || {
        starts
            .par_iter()
            .map(|b| {
                let t = integrate_until_exit(&spec, &Start::Boundary(b.clone()), spec.trapped_budget(), &ctrl, true)?;
                Ok(clairaut_drift(&profile, &t.trajectory.states))
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    let worst = drifts.iter().cloned().fold(0.0, f64::max);
    Ok(CriterionResult::new(
        3,
        "Clairaut conservation",
        vec![Check::below("max_clairaut_drift", worst, 1e-8)],
    ))
}

fn reversibility(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let wanted = pick(opts, 1_000, 100);
    let mut checks = Vec::new();
    for (tag, name) in [
        (41, "flat-d2s1"),
        (42, "flat-d3s1"),
        (43, "flat-cylinder"),
        (44, "bump"),
        (45, "perturbed-d2s1"),
    ] {
        let spec = ManifoldSpec::preset(name)?;
        let ty = spec.boundary_type();
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(opts, tag));
        // Draw in batches until enough entries have exited.
        let mut exited = Vec::new();
        while exited.len() < wanted {
            let batch: Vec<_> = (0..wanted).map(|_| uniform_inward(&ty, &mut rng)).collect();
            let recs = with_workers(opts.workers, || {
                batch
                    .par_iter()
                    .map(|b| scattering_map(&spec, b, &ctrl))
                    .collect::<Result<Vec<_>>>()
            })??;
            exited.extend(recs.into_iter().filter(|r| r.is_exited()));
        }
        exited.truncate(wanted);
        let devs = with_workers(opts.workers, || {
            exited
                .par_iter()
                .map(|r| {
                    let exit = r.exit.as_ref().expect("exited");
                    let back = scattering_map(&spec, &exit.reversed(), &ctrl)?;
                    let Some(e2) = back.exit.as_ref().filter(|_| back.is_exited()) else {
                        return Ok((f64::INFINITY, f64::INFINITY, f64::INFINITY));
                    };
                    let minus_v = r.entry.reversed();
                    Ok((
                        ty.distance(e2.point(), minus_v.point()),
                        crate::angles::angle_between(e2.direction(), minus_v.direction()),
                        (back.travel_time - r.travel_time).abs(),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let worst = devs.iter().fold((0.0f64, 0.0f64, 0.0f64), |a, d| {
            (a.0.max(d.0), a.1.max(d.1), a.2.max(d.2))
        });
        checks.push(Check::below(&format!("{name}.position"), worst.0, 1e-6));
        checks.push(Check::below(&format!("{name}.direction"), worst.1, 1e-6));
        checks.push(Check::below(&format!("{name}.travel_time"), worst.2, 1e-6));
    }
    Ok(CriterionResult::new(4, "reversibility", checks))
}

/// Smallest `⟨V, η⁺⟩` for variation-curve base vectors; the finite-difference
/// error grows like `h²/cos⁴` toward grazing.
pub const VARIATION_MIN_COS: f64 = 0.25;

fn gaussian(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn first_variation(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let n = pick(opts, 100, 20);
    let mut checks = Vec::new();
    for (tag, name) in [(51, "flat-d2s1"), (52, "bump")] {
        let spec = ManifoldSpec::preset(name)?;
        let ty = spec.boundary_type();
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(opts, tag));
        let mut curves = Vec::with_capacity(n);
        while curves.len() < n {
            let base = uniform_inward(&ty, &mut rng);
            if base.normal_component() < VARIATION_MIN_COS {
                continue;
            }
            let k = base.direction().len();
            let (pv, dv) = match spec.product_base() {
                Some(_) => (gaussian(&mut rng, k, 1.0), gaussian(&mut rng, k, 0.3)),
                None => (gaussian(&mut rng, 1, 1.0), gaussian(&mut rng, 1, 0.3)),
            };
            curves.push(BoundaryCurve {
                base,
                point_velocity: pv,
                direction_velocity: dv,
            });
        }
        let residuals = with_workers(opts.workers, || {
            curves
                .par_iter()
                .map(|c| first_variation_residual(&spec, c, 0.0, 1e-4, &ctrl).map(|f| f.residual))
                .collect::<Result<Vec<f64>>>()
        })??;
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        checks.push(Check::below(&format!("{name}.max_residual"), worst, 1e-5));
    }
    Ok(CriterionResult::new(5, "first-variation residual", checks))
}

fn santalo(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let budget = 1e4;
    let mut checks = Vec::new();
    let flat = ManifoldSpec::preset("flat-d2s1")?;
    let est = santalo_volume(
        &flat,
        pick(opts, 1_000_000, 100_000),
        budget,
        sub_seed(opts, 61),
        LensPath::Ode,
        &ctrl,
        opts.workers,
    )?;
    let exact = 2.0 * PI * PI;
    checks.push(Check::below(
        "flat-d2s1.relative_error",
        (est.volume - exact).abs() / exact,
        0.01,
    ));
    let n = pick(opts, 100_000, 10_000);
    let seed = sub_seed(opts, 62);
    let run = |spec: &ManifoldSpec| santalo_volume(spec, n, budget, seed, LensPath::Ode, &ctrl, opts.workers);
    let g0 = run(&ManifoldSpec::preset("bump")?)?;
    let cylinder = run(&ManifoldSpec::preset("flat-cylinder")?)?;
    let (mut family, mut literal) = (0.0f64, 0.0f64);
    for s in [-0.5, 0.25, 0.5] {
        let gs = run(&ManifoldSpec::revolution(BumpProfile::new(s, 0.2, 0.05)?))?;
        let z = |other: &crate::integralgeom::SantaloEstimate| {
            (gs.volume - other.volume).abs() / gs.std_error.hypot(other.std_error)
        };
        family = family.max(z(&g0));
        literal = literal.max(z(&cylinder));
    }
    // Both comparisons are in units of the combined standard error.
    checks.push(Check::at_most("bump_family_vs_g0.z", family, 3.0));
    checks.push(Check::at_most("bump_family_vs_flat_cylinder.z", literal, 3.0));
    Ok(CriterionResult::new(6, "Santalo volume", checks))
}

fn trapped_decay(opts: &SelftestOptions) -> Result<CriterionResult> {
    let ctrl = StepControl::default();
    let spec = ManifoldSpec::preset("flat-d2s1")?;
    let n = pick(opts, 1_000_000, 100_000);
    let seed = sub_seed(opts, 71);
    let mut checks = Vec::new();
    let mut fractions = Vec::new();
    for t in [1e2, 1e3, 1e4] {
        let f = trapped_fraction(&spec, t, n, seed, &ctrl, opts.workers)?;
        let p0 = flat_trapped_tail(&spec, t)?;
        let se0 = (p0 * (1.0 - p0) / f.samples as f64).sqrt();
        checks.push(Check::at_most(
            &format!("T={t:e}.z"),
            (f.fraction - p0).abs() / se0,
            3.0,
        ));
        fractions.push(f.fraction);
    }
    let increases = fractions.windows(2).filter(|w| w[1] > w[0]).count();
    checks.push(Check::at_most("ladder_increases", increases as f64, 0.0));
    checks.push(Check::below(
        "last_over_first",
        fractions[2] / fractions[0].max(f64::MIN_POSITIVE),
        1.0,
    ));
    Ok(CriterionResult::new(7, "trapped-set decay", checks))
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Unit vector with vertical component in `[zlo, zhi]` and uniform azimuth.
fn tilted(rng: &mut ChaCha8Rng, zlo: f64, zhi: f64) -> Vec<f64> {
    let z: f64 = rng.gen_range(zlo..zhi);
    let a: f64 = rng.gen_range(0.0..TAU);
    let h = (1.0 - z * z).sqrt();
    vec![h * a.cos(), h * a.sin(), z]
}

fn busemann(opts: &SelftestOptions) -> Result<CriterionResult> {
    let spec = ManifoldSpec::preset("flat-d2s1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(opts, 81));
    let mut checks = Vec::new();

    // |∇f_t| at exterior probes, t = 10³.
    let probes = pick(opts, 100, 10);
    let jobs: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..probes)
        .map(|_| {
            let base = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let dir = tilted(&mut rng, -0.8, 0.8);
            let r: f64 = rng.gen_range(1.2..3.0);
            let a: f64 = rng.gen_range(0.0..TAU);
            let p = vec![r * a.cos(), r * a.sin(), rng.gen_range(-2.0..2.0)];
            (base, dir, p)
        })
        .collect();
    let norms = with_workers(opts.workers, || {
        jobs.par_iter()
            .map(|(b, d, p)| Horofunction::new(&spec, b, d, 1e3)?.gradient_norm(p, GRADIENT_STEP))
            .collect::<Result<Vec<f64>>>()
    })??;
    let worst = norms.iter().map(|g| (g - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("gradient_norm_deviation", worst, 1e-3));

    // Parallel defining vectors: f^V - f^W constant, t = 10⁴.
    let pairs = pick(opts, 10, 2);
    let mut spread: f64 = 0.0;
    for _ in 0..pairs {
        let dir = tilted(&mut rng, -0.8, 0.8);
        let mut pt = |r: f64| vec![rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
        let (bv, bw) = (pt(1.0), pt(1.0));
        let probe_set: Vec<Vec<f64>> = (0..20).map(|_| pt(2.0)).collect();
        let v = Horofunction::new(&spec, &bv, &dir, 1e4)?;
        let w = Horofunction::new(&spec, &bw, &dir, 1e4)?;
        spread = spread.max(parallel_difference(&v, &w, &probe_set)?.spread);
    }
    checks.push(Check::at_most("parallel_difference_spread", spread, 1e-3));

    // Level-set extrema on H_W(0) ∩ (D² × ℝ) attained on the boundary.
    let configs = pick(opts, 20, 4);
    let circle: Vec<Vec<f64>> = (0..128)
        .map(|k| {
            let a = TAU * k as f64 / 128.0;
            vec![a.cos(), a.sin()]
        })
        .collect();
    let mut jobs = Vec::with_capacity(configs);
    while jobs.len() < configs {
        let dv = tilted(&mut rng, 0.2, 0.9);
        let dw = tilted(&mut rng, 0.2, 0.9);
        let cross = unit(vec![
            dv[1] * dw[2] - dv[2] * dw[1],
            dv[2] * dw[0] - dv[0] * dw[2],
            dv[0] * dw[1] - dv[1] * dw[0],
        ]);
        if cross.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let bv = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0];
        let bw = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0];
        let inside: Vec<Vec<f64>> = (0..16)
            .map(|_| {
                let r = 0.8 * rng.gen::<f64>().sqrt();
                let a: f64 = rng.gen_range(0.0..TAU);
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        jobs.push((bv, dv, bw, dw, inside));
    }
    let excess = with_workers(opts.workers, || {
        jobs.par_iter()
            .map(|(bv, dv, bw, dw, inside)| {
                let v = Horofunction::new(&spec, bv, dv, 1e3)?;
                let w = Horofunction::new(&spec, bw, dw, 1e3)?;
                Ok(level_set_extrema(&v, &w, &circle, inside)?.excess)
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    let worst = excess.iter().cloned().fold(0.0, f64::max);
    checks.push(Check::at_most("level_set_interior_excess", worst, 1e-3));
    Ok(CriterionResult::new(8, "Busemann checks", checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_name_failing_checks() {
        let r = CriterionResult::new(
            9,
            "demo",
            vec![Check::below("a", 1.0, 2.0), Check::below("b", 3.0, 2.0)],
        );
        assert!(!r.passed);
        assert!(r.line().starts_with("[FAIL] 9. demo: b = 3.000e0"));
        assert!(!r.line().contains("a ="));
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        let o = SelftestOptions { seed: 1, workers: 1, scale: Scale::Quick };
        assert!(run_criterion(0, &o).is_err());
    }

    #[test]
    fn quick_criteria_are_worker_independent() {
        for id in [2, 3, 5] {
            let a = run_criterion(id, &SelftestOptions { seed: 3, workers: 1, scale: Scale::Quick }).unwrap().0;
            let b = run_criterion(id, &SelftestOptions { seed: 3, workers: 3, scale: Scale::Quick }).unwrap().0;
            assert_eq!(a, b);
            assert!(a.passed, "{}", a.line());
        }
    }
}
