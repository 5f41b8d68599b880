//! Scattering map, lens tables and their comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::angles::{angle_between, reduce, wrapped_difference};
use crate::error::{Error, Result};
use crate::geodesic::{integrate_until_exit, ExitVerdict, Start, StepControl, UNIT_TOL};
use crate::manifold::{
    BoundaryPoint, BoundaryType, BoundaryVector, FlatProduct, ManifoldSpec, Orientation,
};
use crate::revolution::clairaut_record;
use crate::sampling::{entries, Sampling};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Exited,
    /// Censored at `budget`; `None` marks an analytically infinite travel time.
    Trapped { budget: Option<f64> },
    Grazing,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Exited => "exited",
            Status::Trapped { .. } => "trapped",
            Status::Grazing => "grazing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensRecord {
    pub entry: BoundaryVector,
    pub exit: Option<BoundaryVector>,
    pub travel_time: f64,
    pub status: Status,
}

impl LensRecord {
    pub fn grazing(entry: BoundaryVector) -> Self {
        LensRecord {
            exit: Some(entry.clone()),
            entry,
            travel_time: 0.0,
            status: Status::Grazing,
        }
    }

    pub fn trapped(entry: BoundaryVector, budget: Option<f64>) -> Self {
        LensRecord {
            entry,
            exit: None,
            travel_time: budget.unwrap_or(f64::INFINITY),
            status: Status::Trapped { budget },
        }
    }

    pub fn from_verdict(entry: BoundaryVector, verdict: ExitVerdict) -> Self {
        match verdict {
            ExitVerdict::Exited { exit, travel_time } => LensRecord {
                entry,
                exit: Some(exit),
                travel_time,
                status: Status::Exited,
            },
            ExitVerdict::Trapped { budget } => LensRecord::trapped(entry, Some(budget)),
            ExitVerdict::Grazing => LensRecord::grazing(entry),
        }
    }

    pub fn is_exited(&self) -> bool {
        self.status == Status::Exited
    }
}

/// Closed-form scattering on a flat product: straight lines in `ℝⁿ × S¹`.
pub fn flat_oracle_scatter(base: &FlatProduct, b: &BoundaryVector) -> Result<LensRecord> {
    let BoundaryPoint::Cylinder { u, theta } = b.point() else {
        return Err(Error::Identification("flat oracle needs a cylinder boundary vector".into()));
    };
    if u.len() != base.n {
        return Err(Error::Identification(format!(
            "boundary point has {} components, expected {}",
            u.len(),
            base.n
        )));
    }
    let drift = (b.norm() * b.norm() - 1.0).abs();
    if drift > UNIT_TOL {
        return Err(Error::NonUnit(drift));
    }
    match b.orientation() {
        Orientation::Outward => {
            return Err(Error::InvalidParameter("start vector points out of the manifold".into()))
        }
        Orientation::Tangential => return Ok(LensRecord::grazing(b.clone())),
        Orientation::Inward => {}
    }
    let n = base.n;
    let vh = &b.direction()[..n];
    let vz = b.direction()[n];
    let speed2: f64 = vh.iter().map(|x| x * x).sum();
    if speed2 == 0.0 {
        return Ok(LensRecord::trapped(b.clone(), None));
    }
    let r = base.disc_radius;
    let dot: f64 = u.iter().zip(vh).map(|(a, c)| a * c).sum();
    let tt = -2.0 * r * dot / speed2;
    let exit_u: Vec<f64> = u.iter().zip(vh).map(|(a, c)| a + tt * c / r).collect();
    let norm = exit_u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let exit = BoundaryVector::cylinder(
        exit_u.iter().map(|x| x / norm).collect(),
        reduce(theta + vz * tt, base.circle_length),
        b.direction().to_vec(),
    )?;
    Ok(LensRecord {
        entry: b.clone(),
        exit: Some(exit),
        travel_time: tt,
        status: Status::Exited,
    })
}

/// Trace `b` with the spec's trapped budget.
pub fn scattering_map(spec: &ManifoldSpec, b: &BoundaryVector, ctrl: &StepControl) -> Result<LensRecord> {
    let traced = integrate_until_exit(spec, &Start::Boundary(b.clone()), spec.trapped_budget(), ctrl, false)?;
    Ok(LensRecord::from_verdict(b.clone(), traced.verdict))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LensPath {
    Ode,
    /// Clairaut quadrature; revolution specs only.
    Quadrature,
    /// Closed-form chords; flat products only.
    FlatOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub fingerprint: String,
    pub spec: String,
    pub boundary: BoundaryType,
    pub sampling: Sampling,
    pub seed: Option<u64>,
    pub path: LensPath,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensTable {
    pub meta: TableMeta,
    pub records: Vec<LensRecord>,
}

/// Run `f` on a pool of `workers` threads (`0` = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn record_for(spec: &ManifoldSpec, b: &BoundaryVector, path: LensPath, ctrl: &StepControl) -> Result<LensRecord> {
    match path {
        LensPath::Ode => scattering_map(spec, b, ctrl),
        LensPath::Quadrature => {
            let profile = spec.profile().ok_or_else(|| {
                Error::InvalidParameter("quadrature path needs a surface of revolution".into())
            })?;
            clairaut_record(profile, b)
        }
        LensPath::FlatOracle => match spec.kind() {
            crate::manifold::ManifoldKind::FlatProduct(f) => flat_oracle_scatter(f, b),
            _ => Err(Error::InvalidParameter("flat oracle path needs a flat product".into())),
        },
    }
}

/// One record per sample, in sample order. Records are computed in parallel
/// on `workers` threads; the result does not depend on the worker count.
pub fn lens_table(
    spec: &ManifoldSpec,
    sampling: &Sampling,
    path: LensPath,
    ctrl: &StepControl,
    workers: usize,
) -> Result<LensTable> {
    let boundary = spec.boundary_type();
    let starts = entries(&boundary, sampling)?;
    let records = with_workers(workers, || {
        starts
            .par_iter()
            .map(|b| record_for(spec, b, path, ctrl))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(LensTable {
        meta: TableMeta {
            fingerprint: spec.fingerprint(),
            spec: spec.describe(),
            boundary,
            sampling: sampling.clone(),
            seed: sampling.seed(),
            path,
            records: records.len(),
        },
        records,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn parse(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidParameter(format!("bad number '{field}': {e}")))
}

impl LensTable {
    pub fn header(&self) -> Vec<String> {
        let b = &self.meta.boundary;
        let mut h = Vec::new();
        for prefix in ["entry", "exit"] {
            h.extend(b.point_labels().iter().map(|l| format!("{prefix}_{l}")));
            h.extend(b.direction_labels().iter().map(|l| format!("{prefix}_{l}")));
            if prefix == "entry" {
                h.push("status".into());
            }
        }
        h.push("travel_time".into());
        h
    }

    /// Records as CSV: entry point and direction, status, exit point and
    /// direction (empty when trapped), travel time.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        let b = &self.meta.boundary;
        let width = b.point_labels().len() + b.direction_labels().len();
        for r in &self.records {
            let mut row: Vec<String> = r.entry.point_coords().into_iter().map(fmt).collect();
            row.extend(r.entry.direction().iter().map(|x| fmt(*x)));
            row.push(r.status.label().into());
            match &r.exit {
                Some(e) => {
                    row.extend(e.point_coords().into_iter().map(fmt));
                    row.extend(e.direction().iter().map(|x| fmt(*x)));
                }
                None => row.extend(std::iter::repeat_n(String::new(), width)),
            }
            row.push(fmt(r.travel_time));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.meta)?;
        Ok(())
    }

    /// Rebuild a table from its CSV and JSON sidecar.
    pub fn read<R1: Read, R2: Read>(csv_in: R1, sidecar: R2) -> Result<LensTable> {
        let meta: TableMeta = serde_json::from_reader(sidecar)?;
        let b = meta.boundary.clone();
        let np = b.point_labels().len();
        let nd = b.direction_labels().len();
        let mut rdr = csv::Reader::from_reader(csv_in);
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let nums = |from: usize, len: usize| -> Result<Vec<f64>> {
                (from..from + len).map(|i| parse(&row[i])).collect()
            };
            let vector = |from: usize| -> Result<BoundaryVector> {
                let p = b.point_from_coords(&nums(from, np)?)?;
                BoundaryVector::new(p, nums(from + np, nd)?)
            };
            let entry = vector(0)?;
            let status_field = &row[np + nd];
            let travel_time = parse(&row[2 * (np + nd) + 1])?;
            let record = match status_field {
                "exited" => LensRecord {
                    entry,
                    exit: Some(vector(np + nd + 1)?),
                    travel_time,
                    status: Status::Exited,
                },
                "grazing" => LensRecord::grazing(entry),
                "trapped" => LensRecord::trapped(
                    entry,
                    travel_time.is_finite().then_some(travel_time),
                ),
                other => {
                    return Err(Error::InvalidParameter(format!("unknown status '{other}'")))
                }
            };
            records.push(record);
        }
        if records.len() != meta.records {
            return Err(Error::SamplingMismatch(format!(
                "sidecar lists {} records, CSV has {}",
                meta.records,
                records.len()
            )));
        }
        Ok(LensTable { meta, records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    /// Both exited; deviations measured.
    Compared,
    BothGrazing,
    /// Both censored: zero deviation, but nothing certified.
    Censored,
    /// Exited on one side, trapped on the other.
    ExitedVsTrapped,
    /// Any other status mismatch.
    StatusMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordDeviation {
    pub index: usize,
    pub agreement: Agreement,
    /// Boundary-metric distance between exit points.
    pub position: f64,
    /// Angle between exit directions, in `[0, π]`.
    pub direction: f64,
    pub travel_time: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    pub position: f64,
    pub direction: f64,
    pub travel_time: f64,
}

impl Deviations {
    pub fn overall(&self) -> f64 {
        self.position.max(self.direction).max(self.travel_time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub records: usize,
    pub compared: usize,
    pub max: Deviations,
    pub mean: Deviations,
    pub max_deviation: f64,
    pub status_disagreements: usize,
    pub censored_agreements: usize,
    pub exited_vs_trapped: usize,
    pub exited_vs_trapped_fraction: f64,
    #[serde(skip)]
    pub per_record: Vec<RecordDeviation>,
}

impl ComparisonReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "agreement", "position", "direction", "travel_time"])?;
        for d in &self.per_record {
            let agreement = serde_json::to_value(d.agreement)?;
            out.write_record([
                d.index.to_string(),
                agreement.as_str().unwrap_or_default().to_string(),
                fmt(d.position),
                fmt(d.direction),
                fmt(d.travel_time),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Pointwise comparison of two tables sampled identically, under the
/// identification of boundaries by canonical coordinates.
pub fn compare(a: &LensTable, b: &LensTable) -> Result<ComparisonReport> {
    if a.meta.sampling != b.meta.sampling {
        return Err(Error::SamplingMismatch(format!(
            "tables were sampled differently: {:?} vs {:?}",
            a.meta.sampling, b.meta.sampling
        )));
    }
    if a.meta.boundary != b.meta.boundary || a.records.len() != b.records.len() {
        return Err(Error::SamplingMismatch("tables live on different boundaries".into()));
    }
    let ty = &a.meta.boundary;
    let mut per_record = Vec::with_capacity(a.records.len());
    for (i, (ra, rb)) in a.records.iter().zip(&b.records).enumerate() {
        if ra.entry.point() != rb.entry.point() || ra.entry.direction() != rb.entry.direction() {
            return Err(Error::SamplingMismatch(format!("entry {i} differs between tables")));
        }
        let mut d = RecordDeviation {
            index: i,
            agreement: Agreement::StatusMismatch,
            position: 0.0,
            direction: 0.0,
            travel_time: 0.0,
        };
        match (&ra.status, &rb.status) {
            (Status::Exited, Status::Exited) => {
                let (ea, eb) = (ra.exit.as_ref().unwrap(), rb.exit.as_ref().unwrap());
                d.agreement = Agreement::Compared;
                d.position = ty.distance(ea.point(), eb.point());
                d.direction = angle_between(ea.direction(), eb.direction());
                d.travel_time = (ra.travel_time - rb.travel_time).abs();
            }
            (Status::Grazing, Status::Grazing) => d.agreement = Agreement::BothGrazing,
            (Status::Trapped { .. }, Status::Trapped { .. }) => d.agreement = Agreement::Censored,
            (Status::Exited, Status::Trapped { .. }) | (Status::Trapped { .. }, Status::Exited) => {
                d.agreement = Agreement::ExitedVsTrapped
            }
            _ => {}
        }
        per_record.push(d);
    }
    let compared: Vec<&RecordDeviation> = per_record
        .iter()
        .filter(|d| d.agreement == Agreement::Compared)
        .collect();
    let mut max = Deviations::default();
    let mut sum = Deviations::default();
    for d in &compared {
        max.position = max.position.max(d.position);
        max.direction = max.direction.max(d.direction);
        max.travel_time = max.travel_time.max(d.travel_time);
        sum.position += d.position;
        sum.direction += d.direction;
        sum.travel_time += d.travel_time;
    }
    let k = compared.len().max(1) as f64;
    let mean = Deviations {
        position: sum.position / k,
        direction: sum.direction / k,
        travel_time: sum.travel_time / k,
    };
    let count = |g: Agreement| per_record.iter().filter(|d| d.agreement == g).count();
    let evt = count(Agreement::ExitedVsTrapped);
    let n = per_record.len();
    Ok(ComparisonReport {
        records: n,
        compared: compared.len(),
        max,
        mean,
        max_deviation: max.overall(),
        status_disagreements: evt + count(Agreement::StatusMismatch),
        censored_agreements: count(Agreement::Censored),
        exited_vs_trapped: evt,
        exited_vs_trapped_fraction: if n == 0 { 0.0 } else { evt as f64 / n as f64 },
        per_record,
    })
}

/// A straight-line curve `s ↦ V(s)` of boundary vectors in canonical
/// coordinates, re-projected onto the unit bundle.
///
/// Cylinder: `point_velocity = (δu, δθ)` with `δu` projected onto `u^⊥`,
/// `direction_velocity` has `n + 1` components. Revolution ends:
/// `point_velocity = (δα)`, `direction_velocity = (δφ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub base: BoundaryVector,
    pub point_velocity: Vec<f64>,
    pub direction_velocity: Vec<f64>,
}

impl BoundaryCurve {
    pub fn constant(base: BoundaryVector) -> Self {
        let (np, nd) = match base.point() {
            BoundaryPoint::Cylinder { u, .. } => (u.len() + 1, u.len() + 1),
            BoundaryPoint::End { .. } => (1, 1),
        };
        BoundaryCurve {
            base,
            point_velocity: vec![0.0; np],
            direction_velocity: vec![0.0; nd],
        }
    }

    pub fn at(&self, s: f64) -> Result<BoundaryVector> {
        match self.base.point() {
            BoundaryPoint::Cylinder { u, theta } => {
                let n = u.len();
                if self.point_velocity.len() != n + 1 || self.direction_velocity.len() != n + 1 {
                    return Err(Error::InvalidParameter("curve velocity has the wrong shape".into()));
                }
                let du = &self.point_velocity[..n];
                let along: f64 = u.iter().zip(du).map(|(a, b)| a * b).sum();
                let mut p: Vec<f64> = u.iter().zip(du).map(|(a, b)| a + s * (b - along * a)).collect();
                let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                p.iter_mut().for_each(|x| *x /= pn);
                let mut d: Vec<f64> = self
                    .base
                    .direction()
                    .iter()
                    .zip(&self.direction_velocity)
                    .map(|(a, b)| a + s * b)
                    .collect();
                let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                d.iter_mut().for_each(|x| *x /= dn);
                BoundaryVector::cylinder(p, theta + s * self.point_velocity[n], d)
            }
            BoundaryPoint::End { end, alpha } => {
                let phi = self.base.meridian_angle().expect("revolution end");
                BoundaryVector::meridian(
                    *end,
                    alpha + s * self.point_velocity[0],
                    phi + s * self.direction_velocity[0],
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    /// `d/ds TT(V(s))` by central differences.
    pub length_derivative: f64,
    /// `⟨γ'(L), ċ_exit⟩ - ⟨γ'(0), ċ_entry⟩`.
    pub boundary_term: f64,
    pub residual: f64,
}

/// Chart position of a boundary vector's base point and its chart velocity.
fn chart_state(spec: &ManifoldSpec, b: &BoundaryVector) -> Result<(Vec<f64>, Vec<f64>)> {
    let (tv, _) = spec.boundary_embed(b)?;
    Ok((tv.base.coords().to_vec(), tv.components))
}

fn chart_derivative(spec: &ManifoldSpec, minus: &[f64], plus: &[f64], h: f64) -> Vec<f64> {
    let (k, period) = spec.angle_coordinate();
    minus
        .iter()
        .zip(plus)
        .enumerate()
        .map(|(i, (a, b))| {
            let diff = if i == k { wrapped_difference(*a, *b, period) } else { b - a };
            diff / (2.0 * h)
        })
        .collect()
}

fn metric_pair(spec: &ManifoldSpec, x: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let g = spec.metric_raw(x);
    let d = v.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += g[(i, j)] * v[i] * w[j];
        }
    }
    s
}

/// First-variation identity along `curve` at parameter `s`, central
/// differences of step `h`.
pub fn first_variation_residual(
    spec: &ManifoldSpec,
    curve: &BoundaryCurve,
    s: f64,
    h: f64,
    ctrl: &StepControl,
) -> Result<FirstVariation> {
    let rec = |t: f64| -> Result<LensRecord> { scattering_map(spec, &curve.at(t)?, ctrl) };
    let (lm, l0, lp) = (rec(s - h)?, rec(s)?, rec(s + h)?);
    for r in [&lm, &l0, &lp] {
        if !r.is_exited() {
            return Err(Error::NotDifferentiable(format!(
                "status {} inside the stencil [{}, {}]",
                r.status.label(),
                s - h,
                s + h
            )));
        }
    }
    let length_derivative = (lp.travel_time - lm.travel_time) / (2.0 * h);
    let (xe, ve) = chart_state(spec, &l0.entry)?;
    let (xem, _) = chart_state(spec, &lm.entry)?;
    let (xep, _) = chart_state(spec, &lp.entry)?;
    let entry_rate = chart_derivative(spec, &xem, &xep, h);
    let (xx, vx) = chart_state(spec, l0.exit.as_ref().unwrap())?;
    let (xxm, _) = chart_state(spec, lm.exit.as_ref().unwrap())?;
    let (xxp, _) = chart_state(spec, lp.exit.as_ref().unwrap())?;
    let exit_rate = chart_derivative(spec, &xxm, &xxp, h);
    let boundary_term = metric_pair(spec, &xx, &vx, &exit_rate) - metric_pair(spec, &xe, &ve, &entry_rate);
    Ok(FirstVariation {
        length_derivative,
        boundary_term,
        residual: (length_derivative - boundary_term).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{BumpProfile, End};
    use std::f64::consts::{FRAC_PI_4, SQRT_2, TAU};

    fn flat2() -> ManifoldSpec {
        ManifoldSpec::preset("flat-d2s1").unwrap()
    }

    fn base2() -> FlatProduct {
        FlatProduct::standard(2).unwrap()
    }

    #[test]
    fn oracle_diameter_and_slant() {
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-1.0, 0.0, 0.0]).unwrap();
        let r = flat_oracle_scatter(&base2(), &b).unwrap();
        assert_eq!(r.travel_time, 2.0);
        assert_eq!(r.exit.as_ref().unwrap().point_coords(), vec![-1.0, 0.0, 0.0]);
        let h = SQRT_2 / 2.0;
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-h, 0.0, h]).unwrap();
        let r = flat_oracle_scatter(&base2(), &b).unwrap();
        assert!((r.travel_time - 2.0 * SQRT_2).abs() < 1e-15);
        let BoundaryPoint::Cylinder { theta, .. } = r.exit.unwrap().point().clone() else { panic!() };
        assert!((theta - 2.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_grazing() {
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.3, vec![0.0, 0.6, 0.8]).unwrap();
        let r = flat_oracle_scatter(&base2(), &b).unwrap();
        assert_eq!(r.status, Status::Grazing);
        assert_eq!(r.travel_time, 0.0);
        assert_eq!(r.exit.as_ref(), Some(&b));
    }

    #[test]
    fn oracle_rejects_non_unit_and_outward() {
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(flat_oracle_scatter(&base2(), &b), Err(Error::NonUnit(_))));
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(flat_oracle_scatter(&base2(), &b).is_err());
    }

    #[test]
    fn ode_matches_oracle_on_examples() {
        let h = SQRT_2 / 2.0;
        for dir in [vec![-1.0, 0.0, 0.0], vec![-h, 0.0, h], vec![0.0, 0.6, 0.8]] {
            let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, dir).unwrap();
            let o = flat_oracle_scatter(&base2(), &b).unwrap();
            let m = scattering_map(&flat2(), &b, &StepControl::default()).unwrap();
            assert_eq!(o.status, m.status);
            assert!((o.travel_time - m.travel_time).abs() < 1e-8);
            let ty = flat2().boundary_type();
            let (eo, em) = (o.exit.unwrap(), m.exit.unwrap());
            assert!(ty.distance(eo.point(), em.point()) < 1e-8);
            assert!(angle_between(eo.direction(), em.direction()) < 1e-8);
        }
    }

    #[test]
    fn flat_cylinder_clairaut_closed_form() {
        let spec = ManifoldSpec::revolution(BumpProfile::flat());
        let b = BoundaryVector::meridian(End::Lower, 0.0, FRAC_PI_4).unwrap();
        let r = scattering_map(&spec, &b, &StepControl::default()).unwrap();
        assert!((r.travel_time - 2.0 * SQRT_2).abs() < 1e-9);
        let BoundaryPoint::End { end, alpha } = r.exit.unwrap().point().clone() else { panic!() };
        assert_eq!(end, End::Upper);
        assert!((alpha - 2.0).abs() < 1e-9);
    }

    #[test]
    fn grid_table_shapes_and_statuses() {
        let s = Sampling::Grid { counts: vec![10, 1, 10, 10], include_endpoints: false };
        let t = lens_table(&flat2(), &s, LensPath::FlatOracle, &StepControl::default(), 2).unwrap();
        assert_eq!(t.records.len(), 1000);
        assert!(t.records.iter().all(|r| r.is_exited()));
        let s = Sampling::Grid { counts: vec![4, 1, 3, 4], include_endpoints: true };
        let t = lens_table(&flat2(), &s, LensPath::FlatOracle, &StepControl::default(), 1).unwrap();
        let grazing: Vec<_> = t.records.iter().filter(|r| r.status == Status::Grazing).collect();
        assert!(!grazing.is_empty());
        assert!(grazing.iter().all(|r| r.travel_time == 0.0));
    }

    #[test]
    fn bump_statuses_match_flat_cylinder() {
        let s = Sampling::Grid { counts: vec![2, 5, 30], include_endpoints: false };
        let ctrl = StepControl::default();
        let flat = lens_table(&ManifoldSpec::preset("flat-cylinder").unwrap(), &s, LensPath::Quadrature, &ctrl, 1).unwrap();
        for shift in [-0.5, 0.0, 0.5] {
            let spec = ManifoldSpec::revolution(BumpProfile::new(shift, 0.2, 0.05).unwrap());
            let t = lens_table(&spec, &s, LensPath::Quadrature, &ctrl, 1).unwrap();
            let rep = compare(&flat, &t).unwrap();
            assert_eq!(rep.status_disagreements, 0);
        }
    }

    #[test]
    fn compare_self_is_zero_and_detects_change() {
        let s = Sampling::MonteCarlo { samples: 200, seed: 7 };
        let ctrl = StepControl::default();
        let a = lens_table(&flat2(), &s, LensPath::Ode, &ctrl, 1).unwrap();
        let rep = compare(&a, &a).unwrap();
        assert_eq!(rep.max_deviation, 0.0);
        assert_eq!(rep.status_disagreements, 0);
        let p = ManifoldSpec::preset("perturbed-d2s1").unwrap();
        let b = lens_table(&p, &s, LensPath::Ode, &ctrl, 1).unwrap();
        let rep = compare(&a, &b).unwrap();
        assert!(rep.max_deviation > 1e-4);
        let other = Sampling::MonteCarlo { samples: 200, seed: 8 };
        let c = lens_table(&flat2(), &other, LensPath::FlatOracle, &ctrl, 1).unwrap();
        assert!(matches!(compare(&a, &c), Err(Error::SamplingMismatch(_))));
    }

    #[test]
    fn table_round_trips_through_csv() {
        let s = Sampling::Grid { counts: vec![3, 2, 3, 2], include_endpoints: true };
        let t = lens_table(&flat2(), &s, LensPath::FlatOracle, &StepControl::default(), 1).unwrap();
        let mut csv_buf = Vec::new();
        let mut json_buf = Vec::new();
        t.write_csv(&mut csv_buf).unwrap();
        t.write_sidecar(&mut json_buf).unwrap();
        let back = LensTable::read(&csv_buf[..], &json_buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn worker_count_does_not_change_table() {
        let s = Sampling::MonteCarlo { samples: 300, seed: 3 };
        let ctrl = StepControl::default();
        let spec = ManifoldSpec::preset("bump").unwrap();
        let a = lens_table(&spec, &s, LensPath::Ode, &ctrl, 1).unwrap();
        let b = lens_table(&spec, &s, LensPath::Ode, &ctrl, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_variation_flat_rotation() {
        let b = BoundaryVector::cylinder(vec![0.6, 0.8], 1.0, vec![-0.5, -0.5, 0.5f64.sqrt()]).unwrap();
        let curve = BoundaryCurve {
            base: b,
            point_velocity: vec![-0.8, 0.6, 0.3],
            direction_velocity: vec![0.2, -0.1, 0.05],
        };
        let fv = first_variation_residual(&flat2(), &curve, 0.0, 1e-4, &StepControl::default()).unwrap();
        assert!(fv.length_derivative.abs() > 1e-2);
        assert!(fv.residual < 1e-6, "{fv:?}");
    }

    #[test]
    fn first_variation_bump_angle() {
        let spec = ManifoldSpec::preset("bump").unwrap();
        let curve = BoundaryCurve {
            base: BoundaryVector::meridian(End::Lower, 0.5, 0.7).unwrap(),
            point_velocity: vec![0.4],
            direction_velocity: vec![1.0],
        };
        let fv = first_variation_residual(&spec, &curve, 0.0, 1e-4, &StepControl::default()).unwrap();
        assert!(fv.residual < 1e-5, "{fv:?}");
    }

    #[test]
    fn first_variation_constant_curve() {
        let b = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-0.8, 0.6, 0.0]).unwrap();
        let fv = first_variation_residual(&flat2(), &BoundaryCurve::constant(b), 0.0, 1e-4, &StepControl::default()).unwrap();
        assert!(fv.residual < 1e-10);
        assert!(fv.length_derivative.abs() < 1e-10);
    }

    #[test]
    fn vertical_translation_is_exact() {
        let h = SQRT_2 / 2.0;
        let b0 = BoundaryVector::cylinder(vec![0.0, 1.0], 0.5, vec![0.1, -h, (0.5f64 - 0.01).sqrt()]).unwrap();
        let b1 = BoundaryVector::cylinder(vec![0.0, 1.0], 2.0, b0.direction().to_vec()).unwrap();
        let (r0, r1) = (flat_oracle_scatter(&base2(), &b0).unwrap(), flat_oracle_scatter(&base2(), &b1).unwrap());
        let th = |r: &LensRecord| match r.exit.as_ref().unwrap().point() {
            BoundaryPoint::Cylinder { theta, .. } => *theta,
            _ => unreachable!(),
        };
        assert!(crate::angles::periodic_distance(th(&r1) - th(&r0), 1.5, TAU) < 1e-14);
    }
}
