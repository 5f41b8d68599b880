//! Dormand–Prince 5(4) on the first-order geodesic system
//! `ẋ = v, v̇ = -Γ(x)(v, v)`, with boundary-crossing detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Coords, ManifoldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Time resolution of the exit bisection.
    pub event_tol: f64,
    /// Velocity is rescaled to its target speed once `|g(v,v) - target|`
    /// exceeds this.
    pub renorm_threshold: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-12,
            // Velocity components near grazing are ~1e-3 and travel times
            // ~1e3, so a 1e-12 absolute floor would cost ~1e-6 in TT.
            atol: 1e-15,
            initial_step: 0.05,
            min_step: 1e-14,
            event_tol: 1e-12,
            renorm_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Phase {
    pub x: Coords,
    pub v: Coords,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowOptions {
    pub stop_at_boundary: bool,
    pub renormalize: bool,
    pub max_step: f64,
    pub initial_step: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum FlowEnd {
    Boundary { time: f64, state: Phase },
    Reached { state: Phase },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|g(v,v) - target|` seen before any renormalization.
    pub max_energy_drift: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn rhs(spec: &ManifoldSpec, y: &Phase) -> Phase {
    Phase {
        x: y.v,
        v: spec.accel(&y.x, &y.v),
    }
}

#[inline]
fn axpy(y: &Phase, h: f64, terms: &[(f64, &Phase)]) -> Phase {
    let mut x = y.x;
    let mut v = y.v;
    for (c, k) in terms {
        if *c != 0.0 {
            x += k.x * (h * c);
            v += k.v * (h * c);
        }
    }
    Phase { x, v }
}

/// One step of size `h`: the fifth-order solution and the scaled error norm.
pub(crate) fn dp_step(spec: &ManifoldSpec, y: &Phase, h: f64, ctrl: &StepControl) -> (Phase, f64) {
    let k1 = rhs(spec, y);
    let k2 = rhs(spec, &axpy(y, h, &[(A21, &k1)]));
    let k3 = rhs(spec, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = rhs(spec, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        spec,
        &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        spec,
        &axpy(
            y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    );
    let y5 = axpy(
        y,
        h,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = rhs(spec, &y5);
    let zero = Phase {
        x: Coords::zeros(),
        v: Coords::zeros(),
    };
    let e = axpy(
        &zero,
        h,
        &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
    );
    let mut err: f64 = 0.0;
    for i in 0..y.x.len() {
        let sx = ctrl.atol + ctrl.rtol * y.x[i].abs().max(y5.x[i].abs());
        let sv = ctrl.atol + ctrl.rtol * y.v[i].abs().max(y5.v[i].abs());
        err = err.max(e.x[i].abs() / sx).max(e.v[i].abs() / sv);
    }
    (y5, err)
}

/// Integrate from `start` for at most `duration`, optionally stopping at the
/// first boundary crossing. `observer` sees every accepted state (including
/// the start and the final state).
pub(crate) fn flow(
    spec: &ManifoldSpec,
    start: Phase,
    duration: f64,
    ctrl: &StepControl,
    opts: FlowOptions,
    observer: &mut dyn FnMut(f64, &Phase),
) -> Result<(FlowEnd, FlowStats)> {
    let mut stats = FlowStats::default();
    let target = spec.norm2(&start.x, &start.v);
    let mut y = start;
    let mut t = 0.0;
    let mut h = opts.initial_step.min(opts.max_step).min(duration);
    observer(t, &y);
    while t < duration {
        let remaining = duration - t;
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let (mut y5, err) = dp_step(spec, &y, step, ctrl);
        if !(err <= 1.0) {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h = step * factor;
            if h < ctrl.min_step * t.max(1.0) {
                return Err(Error::StepUnderflow { elapsed: t });
            }
            continue;
        }
        if opts.stop_at_boundary && spec.boundary_fn(&y5.x) <= 0.0 {
            let (tau, state) = locate_exit(spec, &y, step, ctrl);
            stats.steps += 1;
            let time = t + tau;
            observer(time, &state);
            return Ok((FlowEnd::Boundary { time, state }, stats));
        }
        stats.steps += 1;
        t = if last { duration } else { t + step };
        let drift = (spec.norm2(&y5.x, &y5.v) - target).abs();
        stats.max_energy_drift = stats.max_energy_drift.max(drift);
        if opts.renormalize && drift > ctrl.renorm_threshold {
            let s = (target / spec.norm2(&y5.x, &y5.v)).sqrt();
            y5.v *= s;
        }
        y = y5;
        observer(t, &y);
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (step * factor).min(opts.max_step);
    }
    Ok((FlowEnd::Reached { state: y }, stats))
}

/// Bisect the boundary crossing inside an accepted step `[0, h]` from `y`
/// (inside, or on the boundary when the step starts there) to an end outside.
fn locate_exit(spec: &ManifoldSpec, y: &Phase, h: f64, ctrl: &StepControl) -> (f64, Phase) {
    let (mut lo, mut hi) = (0.0, h);
    let mut hi_state = dp_step(spec, y, h, ctrl).0;
    while hi - lo > ctrl.event_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = dp_step(spec, y, mid, ctrl).0;
        if spec.boundary_fn(&s.x) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            hi_state = s;
        }
    }
    (hi, hi_state)
}
