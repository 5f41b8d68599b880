//! Clairaut-relation oracle for the bump surfaces of revolution.
//!
//! On `dt² + F(t)² dα²` the quantity `c = F(t) sin φ` (φ measured from the
//! meridian) is constant along geodesics. A geodesic entering at an end where
//! `F = 1` with angle φ has `c = sin φ`, and since `F ≥ 1` it crosses to the
//! other end without turning, with
//!
//! ```text
//! Δα = ∫ c / (F √(F² - c²)) dt,    TT = ∫ F / √(F² - c²) dt    over [-1, 1].
//! ```
//!
//! Both integrals are split into the flat-cylinder closed form plus a
//! correction supported on the bump. The correction integrands are written
//! without the cancellation `1/√(1 - c²/F²) - 1/√(1 - c²)`, which keeps them
//! well conditioned up to the `|sin φ|` cap.

use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::f64::consts::TAU;
use std::io::Write;

use crate::angles::{periodic_distance, reduce};
use crate::error::{Error, Result};
use crate::geodesic::{GeodesicState, StepControl};
use crate::manifold::{BoundaryPoint, BoundaryVector, BumpProfile, End, ManifoldSpec};
use crate::quadrature::integrate;
use crate::scattering::{scattering_map, LensRecord, Status};

/// Entries with `|sin φ|` above this are refused as near-grazing.
pub const SIN_CAP: f64 = 0.999;

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClairautData {
    pub constant: f64,
    pub entry_end: End,
    /// Sign of `ṫ`.
    pub orientation: f64,
}

impl ClairautData {
    pub fn from_entry(entry: &BoundaryVector) -> Option<Self> {
        let phi = entry.meridian_angle()?;
        let BoundaryPoint::End { end, .. } = entry.point() else {
            return None;
        };
        Some(ClairautData {
            constant: phi.sin(),
            entry_end: *end,
            orientation: -end.sign(),
        })
    }
}

/// `F(t)² α̇` for a chart velocity `(ṫ, α̇)`.
pub fn clairaut_constant(profile: &BumpProfile, t: f64, velocity: &[f64]) -> f64 {
    let f = profile.value(t);
    f * f * velocity[1]
}

/// Largest deviation of `F²α̇` from its initial value along a recorded trace.
pub fn clairaut_drift(profile: &BumpProfile, states: &[GeodesicState]) -> f64 {
    let Some(first) = states.first() else {
        return 0.0;
    };
    let c0 = clairaut_constant(profile, first.position[0], &first.velocity);
    states
        .iter()
        .map(|s| (clairaut_constant(profile, s.position[0], &s.velocity) - c0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClairautExit {
    /// Unwrapped change of α between entry and exit.
    pub delta_alpha: f64,
    pub travel_time: f64,
    /// Angle from the outward meridian at the exit end.
    pub exit_angle: f64,
}

/// Exit data of the geodesic entering at `entry_end` with meridian angle `phi`.
pub fn clairaut_exit(profile: &BumpProfile, phi: f64, entry_end: End) -> Result<ClairautExit> {
    let _ = entry_end; // the integrals are symmetric in the direction of travel
    let c = phi.sin();
    if c.abs() > SIN_CAP {
        return Err(Error::NearGrazing(c.abs()));
    }
    let c2 = c * c;
    let b = 1.0 - c2;
    let sb = b.sqrt();
    let mut delta_alpha = 2.0 * c / sb;
    let mut travel_time = 2.0 / sb;
    if let Some((lo, hi)) = profile.support() {
        let turning = Cell::new(false);
        // a = 1 - c²/F², b - a = -c² (F² - 1) / F².
        let parts = |t: f64| -> (f64, f64, f64) {
            let f = profile.value(t);
            let f2 = f * f;
            let a = 1.0 - c2 / f2;
            if a <= 0.0 {
                turning.set(true);
                return (0.0, 0.0, 1.0);
            }
            let sa = a.sqrt();
            let excess = f2 - 1.0;
            let gap = -c2 * excess / (f2 * sa * sb * (sa + sb));
            (gap, excess / f2, sa)
        };
        let tt = integrate(|t| parts(t).0, lo, hi, QUAD_TOL);
        let da = integrate(
            |t| {
                let (gap, rel, sa) = parts(t);
                c * (gap - rel / sa)
            },
            lo,
            hi,
            QUAD_TOL,
        );
        if turning.get() {
            return Err(Error::TurningPoint);
        }
        travel_time += tt.value;
        delta_alpha += da.value;
    }
    Ok(ClairautExit {
        delta_alpha,
        travel_time,
        exit_angle: phi,
    })
}

/// Lens record computed by quadrature instead of integration.
pub fn clairaut_record(profile: &BumpProfile, entry: &BoundaryVector) -> Result<LensRecord> {
    let BoundaryPoint::End { end, alpha } = entry.point() else {
        return Err(Error::Identification(
            "quadrature path needs a revolution-end boundary vector".into(),
        ));
    };
    if entry.is_grazing() {
        return Ok(LensRecord::grazing(entry.clone()));
    }
    let phi = entry
        .meridian_angle()
        .expect("revolution boundary vector has a meridian angle");
    let ex = clairaut_exit(profile, phi, *end)?;
    let out_end = end.opposite();
    let exit = BoundaryVector::new(
        BoundaryPoint::End {
            end: out_end,
            alpha: reduce(alpha + ex.delta_alpha, TAU),
        },
        vec![out_end.sign() * phi.cos(), phi.sin()],
    )?;
    Ok(LensRecord {
        entry: entry.clone(),
        exit: Some(exit),
        travel_time: ex.travel_time,
        status: Status::Exited,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPath {
    Quadrature,
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub shift: f64,
    pub phi: f64,
    /// `Δα` reduced to `[0, 2π)` so both paths report the same quantity.
    pub delta_alpha: f64,
    pub travel_time: f64,
    pub exit_angle: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanDeviation {
    pub delta_alpha: f64,
    pub travel_time: f64,
    pub exit_angle: f64,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub path: ScanPath,
    pub epsilon: f64,
    pub amplitude: f64,
    pub shifts: Vec<f64>,
    pub angles: Vec<f64>,
    pub rows: Vec<ScanRow>,
    /// Largest spread across shifts at a fixed angle.
    pub max_deviation: ScanDeviation,
}

impl ScanReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["s", "phi", "delta_alpha", "travel_time", "exit_angle"])?;
        for r in &self.rows {
            out.write_record([
                format!("{:?}", r.shift),
                format!("{:?}", r.phi),
                format!("{:?}", r.delta_alpha),
                format!("{:?}", r.travel_time),
                format!("{:?}", r.exit_angle),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn scan_row(profile: &BumpProfile, phi: f64, path: ScanPath, ctrl: &StepControl) -> Result<ScanRow> {
    let entry = BoundaryVector::meridian(End::Lower, 0.0, phi)?;
    match path {
        ScanPath::Quadrature => {
            let ex = clairaut_exit(profile, phi, End::Lower)?;
            Ok(ScanRow {
                shift: profile.shift,
                phi,
                delta_alpha: reduce(ex.delta_alpha, TAU),
                travel_time: ex.travel_time,
                exit_angle: ex.exit_angle,
            })
        }
        ScanPath::Ode => {
            let spec = ManifoldSpec::revolution(*profile);
            let rec = scattering_map(&spec, &entry, ctrl)?;
            let exit = match (&rec.status, &rec.exit) {
                (Status::Exited, Some(e)) => e,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "entry angle {phi} did not exit on the ODE path"
                    )))
                }
            };
            let BoundaryPoint::End { alpha, end } = exit.point() else {
                unreachable!("revolution exit")
            };
            let along = end.sign() * exit.direction()[0];
            Ok(ScanRow {
                shift: profile.shift,
                phi,
                delta_alpha: reduce(*alpha, TAU),
                travel_time: rec.travel_time,
                exit_angle: exit.direction()[1].atan2(along),
            })
        }
    }
}

/// Exit data across a family of shifts of one bump, and the largest spread
/// across shifts at each entry angle.
pub fn family_invariance_scan(
    epsilon: f64,
    amplitude: f64,
    shifts: &[f64],
    angles: &[f64],
    path: ScanPath,
    ctrl: &StepControl,
) -> Result<ScanReport> {
    let profiles = shifts
        .iter()
        .map(|&s| BumpProfile::new(s, epsilon, amplitude))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(shifts.len() * angles.len());
    for p in &profiles {
        for &phi in angles {
            rows.push(scan_row(p, phi, path, ctrl)?);
        }
    }
    let mut dev = ScanDeviation::default();
    let na = angles.len();
    for j in 0..na {
        let col: Vec<&ScanRow> = (0..profiles.len()).map(|i| &rows[i * na + j]).collect();
        for a in &col {
            for b in &col {
                dev.delta_alpha = dev
                    .delta_alpha
                    .max(periodic_distance(a.delta_alpha, b.delta_alpha, TAU));
                dev.travel_time = dev.travel_time.max((a.travel_time - b.travel_time).abs());
                dev.exit_angle = dev.exit_angle.max((a.exit_angle - b.exit_angle).abs());
            }
        }
    }
    dev.overall = dev.delta_alpha.max(dev.travel_time).max(dev.exit_angle);
    Ok(ScanReport {
        path,
        epsilon,
        amplitude,
        shifts: shifts.to_vec(),
        angles: angles.to_vec(),
        rows,
        max_deviation: dev,
    })
}

/// Gaussian curvature `-F''/F` at `t`.
pub fn curvature(profile: &BumpProfile, t: f64) -> f64 {
    let (f, _, f2) = profile.jet(t);
    -f2 / f
}

/// Sup-distance between the curvature profiles of two surfaces, minimized over
/// the two ways of matching their ends (`t ↦ t` and `t ↦ -t`). A boundary-
/// preserving isometry must carry one profile onto the other, so a positive
/// value certifies the surfaces are not isometric.
pub fn non_isometry_witness(a: &BumpProfile, b: &BumpProfile, nodes: usize) -> f64 {
    let ts: Vec<f64> = (0..=nodes)
        .map(|i| -1.0 + 2.0 * i as f64 / nodes as f64)
        .collect();
    let sup = |flip: f64| {
        ts.iter()
            .map(|&t| (curvature(a, t) - curvature(b, flip * t)).abs())
            .fold(0.0, f64::max)
    };
    sup(1.0).min(sup(-1.0))
}
