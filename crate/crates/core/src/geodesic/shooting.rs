//! Two-point connection by shooting: damped Newton on the endpoint map
//! `w ↦ exp_p(w)` with a finite-difference Jacobian, restarted from a fixed
//! set of initial directions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::integrator::{flow, FlowEnd, FlowOptions, Phase, StepControl};
use crate::error::{Error, Result};
use crate::manifold::{to_coords, ChartPoint, Coords, ManifoldSpec};

const STARTS: usize = 8;
const NEWTON_ITERS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    /// Unit initial direction at `p`.
    pub initial_direction: Vec<f64>,
    pub length: f64,
    pub winding: i64,
    /// Chart distance between the shot endpoint and the target.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lifts {
    /// Compact picture: minimize over winding numbers in `[lo, hi]`.
    Windings(i64, i64),
    /// Universal cover: angle coordinate unwrapped, no lifting.
    Cover,
}

fn endpoint(spec: &ManifoldSpec, p: &Coords, w: &Coords, ctrl: &StepControl) -> Result<Coords> {
    let speed = spec.norm2(p, w).sqrt();
    if speed == 0.0 {
        return Ok(*p);
    }
    let opts = FlowOptions {
        stop_at_boundary: false,
        renormalize: false,
        max_step: spec.max_step() / speed,
        initial_step: 1.0f64.min(spec.max_step() / speed),
    };
    let (end, _) = flow(spec, Phase { x: *p, v: *w }, 1.0, ctrl, opts, &mut |_, _| {})?;
    match end {
        FlowEnd::Reached { state } => Ok(state.x),
        FlowEnd::Boundary { .. } => unreachable!("boundary stopping disabled"),
    }
}

fn initial_guesses(d: usize, delta: &Coords) -> Vec<Coords> {
    let len = delta.norm();
    let mut out = vec![*delta];
    let base = if len > 0.0 { *delta / len } else { to_coords(&[1.0]) };
    let mut k = 0;
    while out.len() < STARTS {
        let axis = k % d;
        let sign = if (k / d) % 2 == 0 { 1.0 } else { -1.0 };
        let mut dir = base;
        dir[axis] += 0.35 * sign;
        let n = dir.norm();
        if n > 1e-9 {
            out.push(dir * (len / n));
        }
        k += 1;
    }
    out
}

/// Newton solve for `w` with `exp_p(w) = q`; returns `(w, residual)`.
pub(crate) fn shoot(spec: &ManifoldSpec, p: &Coords, q: &Coords, ctrl: &StepControl) -> Result<(Coords, f64)> {
    let d = spec.dim();
    let delta = q - p;
    let scale = delta.norm().max(1.0);
    if delta.norm() == 0.0 {
        return Ok((Coords::zeros(), 0.0));
    }
    let target = 1e-11 * scale;
    let accept = 1e-8 * scale;
    let mut best: Option<(Coords, f64)> = None;
    for guess in initial_guesses(d, &delta) {
        let mut w = guess;
        let mut r = endpoint(spec, p, &w, ctrl)? - q;
        let mut rn = r.norm();
        for _ in 0..NEWTON_ITERS {
            if rn <= target {
                break;
            }
            let step = 1e-6 * w.norm().max(1.0);
            let mut jac = DMatrix::zeros(d, d);
            for j in 0..d {
                let mut wp = w;
                let mut wm = w;
                wp[j] += step;
                wm[j] -= step;
                let col = (endpoint(spec, p, &wp, ctrl)? - endpoint(spec, p, &wm, ctrl)?) / (2.0 * step);
                for i in 0..d {
                    jac[(i, j)] = col[i];
                }
            }
            let rhs = DVector::from_iterator(d, (0..d).map(|i| -r[i]));
            let Some(dw) = jac.lu().solve(&rhs) else { break };
            let mut lambda = 1.0;
            let mut improved = false;
            while lambda >= 1.0 / 64.0 {
                let mut trial = w;
                for i in 0..d {
                    trial[i] += lambda * dw[i];
                }
                let rt = endpoint(spec, p, &trial, ctrl)? - q;
                if rt.norm() < rn {
                    w = trial;
                    r = rt;
                    rn = r.norm();
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if best.map_or(true, |(_, b)| rn < b) {
            best = Some((w, rn));
        }
        if rn <= target {
            break;
        }
    }
    match best {
        Some((w, rn)) if rn <= accept => Ok((w, rn)),
        other => Err(Error::NoConnection {
            attempts: STARTS,
            residual: other.map_or(f64::INFINITY, |(_, r)| r),
        }),
    }
}

fn connection_from(spec: &ManifoldSpec, p: &Coords, w: &Coords, winding: i64, residual: f64) -> Connection {
    let d = spec.dim();
    let length = spec.norm2(p, w).sqrt();
    let initial_direction = if length > 0.0 {
        (0..d).map(|i| w[i] / length).collect()
    } else {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    };
    Connection {
        initial_direction,
        length,
        winding,
        residual,
    }
}

/// Geodesic from `p` to the lift of `q` whose angle coordinate is shifted by
/// `winding` periods.
pub fn connect(spec: &ManifoldSpec, p: &ChartPoint, q: &ChartPoint, winding: i64) -> Result<Connection> {
    for pt in [p, q] {
        if !spec.in_domain(pt.coords()) {
            return Err(Error::Domain {
                coords: pt.coords().to_vec(),
            });
        }
    }
    let (k, period) = spec.angle_coordinate();
    let x = to_coords(p.coords());
    let mut y = to_coords(q.coords());
    y[k] += winding as f64 * period;
    let (w, residual) = shoot(spec, &x, &y, &StepControl::default())?;
    Ok(connection_from(spec, &x, &w, winding, residual))
}

/// Length of the shortest connecting geodesic over the admissible lifts.
pub fn distance(spec: &ManifoldSpec, p: &ChartPoint, q: &ChartPoint, lifts: Lifts) -> Result<f64> {
    match lifts {
        Lifts::Cover => cover_distance(spec, p.coords(), q.coords()),
        Lifts::Windings(lo, hi) => {
            let mut best: Option<f64> = None;
            let mut last_err = None;
            for k in lo..=hi {
                match connect(spec, p, q, k) {
                    Ok(c) => best = Some(best.map_or(c.length, |b: f64| b.min(c.length))),
                    Err(e) => last_err = Some(e),
                }
            }
            match (best, last_err) {
                (Some(b), _) => Ok(b),
                (None, Some(e)) => Err(e),
                (None, None) => Err(Error::InvalidParameter("empty winding range".into())),
            }
        }
    }
}

/// Geodesic distance in the universal-cover model: chart coordinates taken
/// literally (angle unwrapped), metric formulas extended to the whole chart.
pub fn cover_distance(spec: &ManifoldSpec, p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(cover_connect(spec, p, q)?.length)
}

/// Like [`connect`] but for raw cover coordinates.
pub fn cover_connect(spec: &ManifoldSpec, p: &[f64], q: &[f64]) -> Result<Connection> {
    let d = spec.dim();
    if p.len() != d || q.len() != d {
        return Err(Error::InvalidParameter(format!(
            "expected {d}-dimensional cover points"
        )));
    }
    let x = to_coords(p);
    let (w, residual) = shoot(spec, &x, &to_coords(q), &StepControl::default())?;
    Ok(connection_from(spec, &x, &w, 0, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::geodesic_flow;
    use std::f64::consts::PI;

    #[test]
    fn flat_segment() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let p = spec.chart_point(&[0.0, 0.0, 0.0]).unwrap();
        let q = spec.chart_point(&[0.5, 0.0, 0.0]).unwrap();
        let c = connect(&spec, &p, &q, 0).unwrap();
        assert!((c.length - 0.5).abs() < 1e-12);
        assert!((c.initial_direction[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fiber_segment_and_lifts() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let p = spec.chart_point(&[0.0, 0.0, 0.0]).unwrap();
        let q = spec.chart_point(&[0.0, 0.0, PI]).unwrap();
        assert!((connect(&spec, &p, &q, 0).unwrap().length - PI).abs() < 1e-12);
        assert!((distance(&spec, &p, &q, Lifts::Windings(-1, 1)).unwrap() - PI).abs() < 1e-12);
        let q = spec.chart_point(&[0.0, 0.0, 1.5 * PI]).unwrap();
        assert!((distance(&spec, &p, &q, Lifts::Windings(-1, 1)).unwrap() - 0.5 * PI).abs() < 1e-12);
        assert!((distance(&spec, &p, &q, Lifts::Cover).unwrap() - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn connect_is_a_right_inverse_of_integration() {
        let spec = ManifoldSpec::preset("perturbed-d2s1").unwrap();
        let p = spec.chart_point(&[-0.7, 0.1, 0.3]).unwrap();
        let q = spec.chart_point(&[0.6, -0.2, 1.1]).unwrap();
        let c = connect(&spec, &p, &q, 0).unwrap();
        let (x, _) = geodesic_flow(&spec, p.coords(), &c.initial_direction, c.length, &StepControl::default()).unwrap();
        let err: f64 = x.iter().zip(q.coords()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-7, "{err}");
        // The bump makes the metric longer than flat along this chord.
        let flat = (1.3f64.powi(2) + 0.3f64.powi(2) + 0.8f64.powi(2)).sqrt();
        assert!(c.length > flat);
    }

    #[test]
    fn perturbed_exterior_distance_equals_flat() {
        let spec = ManifoldSpec::preset("perturbed-d2s1").unwrap();
        let p = [1.5, 0.9, 0.0];
        let q = [-1.8, 1.2, 2.0];
        let d = cover_distance(&spec, &p, &q).unwrap();
        let flat = (3.3f64.powi(2) + 0.3f64.powi(2) + 4.0).sqrt();
        assert!((d - flat).abs() < 1e-6);
    }

    #[test]
    fn domain_is_checked() {
        let spec = ManifoldSpec::preset("flat-d2s1").unwrap();
        let p = spec.chart_point(&[0.0, 0.0, 0.0]).unwrap();
        assert!(spec.chart_point(&[2.0, 0.0, 0.0]).is_err());
        assert_eq!(connect(&spec, &p, &p, 0).unwrap().length, 0.0);
    }
}
