//! Geodesic tracing with exit detection, and two-point connection by shooting.

mod integrator;
mod shooting;

pub use integrator::{FlowStats, StepControl};
pub use shooting::{connect, cover_connect, cover_distance, distance, Connection, Lifts};

pub(crate) use integrator::{flow, FlowEnd, FlowOptions, Phase};

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::angles::reduce;
use crate::error::{Error, Result};
use crate::manifold::{to_coords, BoundaryVector, Coords, ManifoldSpec, Orientation, TangentVector};

/// Tolerance on `|g(V,V) - 1|` for a start vector.
pub const UNIT_TOL: f64 = 1e-9;

/// Position (angle reduced), velocity and elapsed time along a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExitVerdict {
    Exited {
        exit: BoundaryVector,
        travel_time: f64,
    },
    /// No exit before `budget`; censored, not a certificate of `TT = ∞`.
    Trapped { budget: f64 },
    /// Tangential start: `TT = 0` and the scattering map is the identity.
    Grazing,
}

impl ExitVerdict {
    pub fn travel_time(&self) -> f64 {
        match self {
            ExitVerdict::Exited { travel_time, .. } => *travel_time,
            ExitVerdict::Trapped { budget } => *budget,
            ExitVerdict::Grazing => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<GeodesicState>,
    pub stats: FlowStats,
}

impl Trajectory {
    /// CSV dump: `elapsed, x1.., v1..`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if let Some(first) = self.states.first() {
            let d = first.position.len();
            let mut header = vec!["elapsed".to_string()];
            header.extend((0..d).map(|i| format!("x{i}")));
            header.extend((0..d).map(|i| format!("v{i}")));
            out.write_record(&header)?;
        }
        for s in &self.states {
            let mut row = vec![format!("{:?}", s.elapsed)];
            row.extend(s.position.iter().map(|x| format!("{x:?}")));
            row.extend(s.velocity.iter().map(|x| format!("{x:?}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Traced {
    pub verdict: ExitVerdict,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub enum Start {
    Boundary(BoundaryVector),
    Interior(TangentVector),
}

fn record_state(spec: &ManifoldSpec, t: f64, x: &Coords, v: &Coords) -> GeodesicState {
    let d = spec.dim();
    let (k, period) = spec.angle_coordinate();
    let mut position = x.as_slice()[..d].to_vec();
    position[k] = reduce(position[k], period);
    GeodesicState {
        position,
        velocity: v.as_slice()[..d].to_vec(),
        elapsed: t,
    }
}

/// Trace the unit-speed geodesic from `start` until it meets the boundary or
/// `budget` time has elapsed.
pub fn integrate_until_exit(
    spec: &ManifoldSpec,
    start: &Start,
    budget: f64,
    ctrl: &StepControl,
    record: bool,
) -> Result<Traced> {
    if !(budget > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "budget = {budget} must be positive"
        )));
    }
    let d = spec.dim();
    let (x, v, h0) = match start {
        Start::Boundary(b) => {
            let (x, v) = spec.embed(b)?;
            let drift = (spec.norm2(&x, &v) - 1.0).abs();
            if drift > UNIT_TOL {
                return Err(Error::NonUnit(drift));
            }
            match b.orientation() {
                Orientation::Outward => {
                    return Err(Error::InvalidParameter(
                        "start vector points out of the manifold".into(),
                    ))
                }
                Orientation::Tangential => {
                    let mut trajectory = Trajectory::default();
                    if record {
                        trajectory.states.push(record_state(spec, 0.0, &x, &v));
                    }
                    return Ok(Traced {
                        verdict: ExitVerdict::Grazing,
                        trajectory,
                    });
                }
                Orientation::Inward => {}
            }
            // The first step must not leave the manifold: the chord through a
            // strictly convex boundary is at least ~ scale · ⟨V, η⁺⟩ long.
            let h0 = ctrl
                .initial_step
                .min(0.25 * b.normal_component() * spec.boundary_scale());
            (x, v, h0)
        }
        Start::Interior(tv) => {
            if !spec.in_domain(tv.base.coords()) || tv.components.len() != d {
                return Err(Error::Domain {
                    coords: tv.base.coords().to_vec(),
                });
            }
            let x = to_coords(tv.base.coords());
            let v = to_coords(&tv.components);
            let drift = (spec.norm2(&x, &v) - 1.0).abs();
            if drift > UNIT_TOL {
                return Err(Error::NonUnit(drift));
            }
            (x, v, ctrl.initial_step)
        }
    };
    let opts = FlowOptions {
        stop_at_boundary: true,
        renormalize: true,
        max_step: spec.max_step(),
        initial_step: h0,
    };
    let mut trajectory = Trajectory::default();
    let mut observer = |t: f64, y: &Phase| {
        if record {
            trajectory.states.push(record_state(spec, t, &y.x, &y.v));
        }
    };
    let (end, stats) = flow(spec, Phase { x, v }, budget, ctrl, opts, &mut observer)?;
    trajectory.stats = stats;
    let verdict = match end {
        FlowEnd::Boundary { time, state } => ExitVerdict::Exited {
            exit: spec.boundary_vector_from_chart(&state.x, &state.v),
            travel_time: time,
        },
        FlowEnd::Reached { .. } => ExitVerdict::Trapped { budget },
    };
    Ok(Traced {
        verdict,
        trajectory,
    })
}

/// Follow the geodesic from chart position `x` with velocity `v` for time
/// `duration`, ignoring the boundary (the metric formulas extend past it).
/// Returns the final position and velocity.
pub fn geodesic_flow(
    spec: &ManifoldSpec,
    x: &[f64],
    v: &[f64],
    duration: f64,
    ctrl: &StepControl,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = spec.dim();
    if x.len() != d || v.len() != d {
        return Err(Error::InvalidParameter(format!(
            "expected {d}-dimensional position and velocity"
        )));
    }
    let y = Phase {
        x: to_coords(x),
        v: to_coords(v),
    };
    let speed = spec.norm2(&y.x, &y.v).sqrt();
    let opts = FlowOptions {
        stop_at_boundary: false,
        renormalize: true,
        max_step: spec.max_step() / speed.max(1e-300),
        initial_step: ctrl.initial_step,
    };
    let (end, _) = flow(spec, y, duration, ctrl, opts, &mut |_, _| {})?;
    let FlowEnd::Reached { state } = end else {
        unreachable!("boundary stopping disabled")
    };
    Ok((
        state.x.as_slice()[..d].to_vec(),
        state.v.as_slice()[..d].to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{End, BoundaryType};
    use crate::sampling::uniform_inward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn exit(traced: &Traced) -> (&BoundaryVector, f64) {
        match &traced.verdict {
            ExitVerdict::Exited { exit, travel_time } => (exit, *travel_time),
            other => panic!("expected exit, got {other:?}"),
        }
    }

    #[test]
    fn diameter_chord() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-1.0, 0.0, 0.0]).unwrap();
        let t = integrate_until_exit(&spec, &Start::Boundary(b), 100.0, &StepControl::default(), false).unwrap();
        let (e, tt) = exit(&t);
        assert!((tt - 2.0).abs() < 1e-11);
        let c = e.point_coords();
        assert!((c[0] + 1.0).abs() < 1e-11 && c[1].abs() < 1e-11 && c[2].abs() < 1e-11);
        assert!((e.direction()[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn slanted_chord() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let s = SQRT_2 / 2.0;
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-s, 0.0, s]).unwrap();
        let t = integrate_until_exit(&spec, &Start::Boundary(b), 100.0, &StepControl::default(), false).unwrap();
        let (e, tt) = exit(&t);
        assert!((tt - 2.0 * SQRT_2).abs() < 1e-11);
        let c = e.point_coords();
        assert!((c[0] + 1.0).abs() < 1e-11);
        // Vertical displacement is v_z · TT = (√2/2)(2√2) = 2.
        assert!((c[2] - 2.0).abs() < 1e-11, "{c:?}");
    }

    #[test]
    fn vertical_fiber_is_trapped_for_every_budget() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let p = spec.chart_point(&[0.0, 0.0, 0.0]).unwrap();
        let v = spec.tangent_vector(&p, &[0.0, 0.0, 1.0]).unwrap();
        for budget in [1.0, 37.0, 1e4] {
            let t = integrate_until_exit(&spec, &Start::Interior(v.clone()), budget, &StepControl::default(), false).unwrap();
            assert_eq!(t.verdict, ExitVerdict::Trapped { budget });
        }
    }

    #[test]
    fn grazing_start() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let b = BoundaryVector::cylinder(vec![0.0, 1.0], 1.0, vec![1.0, 0.0, 0.0]).unwrap();
        let t = integrate_until_exit(&spec, &Start::Boundary(b), 10.0, &StepControl::default(), false).unwrap();
        assert_eq!(t.verdict, ExitVerdict::Grazing);
        assert_eq!(t.verdict.travel_time(), 0.0);
    }

    #[test]
    fn contract_errors() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-1.1, 0.0, 0.0]).unwrap();
        assert!(matches!(
            integrate_until_exit(&spec, &Start::Boundary(b.clone()), 10.0, &StepControl::default(), false),
            Err(Error::NonUnit(_))
        ));
        let out = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(integrate_until_exit(&spec, &Start::Boundary(out), 10.0, &StepControl::default(), false).is_err());
        let inward = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-1.0, 0.0, 0.0]).unwrap();
        assert!(integrate_until_exit(&spec, &Start::Boundary(inward), 0.0, &StepControl::default(), false).is_err());
    }

    #[test]
    fn underflow_is_reported_not_clamped() {
        let spec = ManifoldSpec::preset("bump").unwrap();
        let ctrl = StepControl {
            rtol: 1e-30,
            atol: 1e-30,
            min_step: 1e-6,
            ..StepControl::default()
        };
        let b = BoundaryVector::meridian(End::Lower, 0.0, 0.9).unwrap();
        assert!(matches!(
            integrate_until_exit(&spec, &Start::Boundary(b), 10.0, &ctrl, false),
            Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn unit_speed_exit_events_and_reversibility() {
        let specs = [
            ManifoldSpec::preset("flat-d2s1").unwrap(),
            ManifoldSpec::preset("bump").unwrap(),
            ManifoldSpec::preset("perturbed-d2s1").unwrap(),
        ];
        let ctrl = StepControl::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for spec in &specs {
            let ty = spec.boundary_type();
            for _ in 0..200 {
                let b = uniform_inward(&ty, &mut rng);
                let t = integrate_until_exit(spec, &Start::Boundary(b.clone()), spec.trapped_budget(), &ctrl, true).unwrap();
                assert!(t.trajectory.stats.max_energy_drift < 1e-9);
                let ExitVerdict::Exited { exit, travel_time } = &t.verdict else { continue };
                assert!(*travel_time > 0.0);
                assert!(exit.normal_component() <= 1e-9);
                let last = t.trajectory.states.last().unwrap();
                let resid = match ty {
                    BoundaryType::Cylinder { .. } => (last.position[..2].iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs(),
                    BoundaryType::RevolutionEnds => (last.position[0].abs() - 1.0).abs(),
                };
                assert!(resid < 1e-10, "{resid}");
                let back = integrate_until_exit(spec, &Start::Boundary(exit.reversed()), spec.trapped_budget(), &ctrl, false).unwrap();
                let ExitVerdict::Exited { exit: e2, travel_time: t2 } = back.verdict else { panic!() };
                assert!((t2 - travel_time).abs() < 1e-6, "{} {t2} {travel_time}", spec.describe());
                assert!(ty.distance(e2.point(), b.point()) < 1e-6);
                let d = crate::angles::angle_between(e2.reversed().direction(), b.direction());
                assert!(d < 1e-6);
            }
        }
    }

    #[test]
    fn geodesic_flow_ignores_boundary() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let (x, v) = geodesic_flow(&spec, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 1000.0, &StepControl::default()).unwrap();
        assert!((x[0] - 1000.0).abs() < 1e-9);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }
}
