//! Charts, metrics and boundary geometry for the supported metric families.
//!
//! * [`ManifoldKind::FlatProduct`]: `Dⁿ(R) × S¹(L)` in the product chart
//!   `(x ∈ ℝⁿ, θ)`, metric the identity.
//! * [`ManifoldKind::SurfaceOfRevolution`]: `(t, α) ∈ [-1, 1] × S¹`, metric
//!   `dt² + F(t)² dα²` with `F` a [`BumpProfile`].
//! * [`ManifoldKind::PerturbedProduct`]: the flat product with a conformal
//!   interior bump `g = (1 + σ ψ(|x - c| / ρ)) I`, where
//!   `ψ(r) = exp(1 - 1/(1 - r²))` on `r < 1`. The bump is kept at least
//!   [`COLLAR`] away from the boundary so the metric is flat near `∂M`.

mod boundary;
pub mod config;
mod profile;

pub use boundary::{
    BoundaryPoint, BoundaryType, BoundaryVector, End, Orientation, GRAZING_TOL,
};
pub use profile::BumpProfile;

use nalgebra::{DMatrix, SVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{PI, TAU};

use crate::angles::reduce;
use crate::error::{Error, Result};

/// Largest chart dimension handled by the integrator (`n ≤ 5`).
pub const MAX_DIM: usize = 6;

/// Chart-coordinate vector, zero-padded past the manifold dimension.
pub type Coords = SVector<f64, MAX_DIM>;

/// Width of the flat collar a perturbation must leave next to the boundary.
pub const COLLAR: f64 = 0.05;

/// Largest admissible `|σ|` for a conformal perturbation, as a fraction of the
/// base metric's smallest eigenvalue (which is 1).
pub const MAX_PERTURBATION: f64 = 0.5;

const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatProduct {
    pub n: usize,
    pub disc_radius: f64,
    pub circle_length: f64,
}

impl FlatProduct {
    pub fn new(n: usize, disc_radius: f64, circle_length: f64) -> Result<Self> {
        if n == 0 || n + 1 > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "disc dimension n = {n} must satisfy 1 <= n <= {}",
                MAX_DIM - 1
            )));
        }
        if !(disc_radius > 0.0 && disc_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disc_radius = {disc_radius} must be positive"
            )));
        }
        if !(circle_length > 0.0 && circle_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "circle_length = {circle_length} must be positive"
            )));
        }
        Ok(FlatProduct {
            n,
            disc_radius,
            circle_length,
        })
    }

    /// Unit disc times a circle of length 2π.
    pub fn standard(n: usize) -> Result<Self> {
        FlatProduct::new(n, 1.0, TAU)
    }
}

/// Conformal interior bump `1 + amplitude · ψ(|x - center| / radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub radius: f64,
    pub center: Vec<f64>,
}

impl Perturbation {
    fn validate(&self, base: &FlatProduct) -> Result<()> {
        if self.center.len() != base.n {
            return Err(Error::InvalidParameter(format!(
                "perturbation center has {} components, expected n = {}",
                self.center.len(),
                base.n
            )));
        }
        if !(self.amplitude.abs() <= MAX_PERTURBATION) {
            return Err(Error::InvalidParameter(format!(
                "perturbation amplitude |{}| exceeds {MAX_PERTURBATION}",
                self.amplitude
            )));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbation radius {} must be positive",
                self.radius
            )));
        }
        let c = self.center.iter().map(|x| x * x).sum::<f64>().sqrt();
        if c + self.radius > base.disc_radius - COLLAR {
            return Err(Error::InvalidParameter(format!(
                "perturbation support reaches |x| = {} but must vanish within {COLLAR} of the boundary",
                c + self.radius
            )));
        }
        Ok(())
    }

    /// `(λ, ∇λ)` at horizontal position `x` (first `n` entries).
    fn factor(&self, x: &Coords) -> (f64, Coords) {
        let n = self.center.len();
        let rho2 = self.radius * self.radius;
        let mut d = Coords::zeros();
        let mut r2 = 0.0;
        for i in 0..n {
            d[i] = x[i] - self.center[i];
            r2 += d[i] * d[i];
        }
        r2 /= rho2;
        if r2 >= 1.0 {
            return (1.0, Coords::zeros());
        }
        let q = 1.0 - r2;
        let psi = (1.0 - 1.0 / q).exp();
        let grad = d * (-2.0 * self.amplitude * psi / (rho2 * q * q));
        (1.0 + self.amplitude * psi, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    FlatProduct(FlatProduct),
    SurfaceOfRevolution {
        profile: BumpProfile,
    },
    PerturbedProduct {
        base: FlatProduct,
        perturbation: Perturbation,
    },
}

/// Immutable description of a manifold with boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    trapped_budget: f64,
}

/// A point in chart coordinates, angle coordinate reduced to its period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub components: Vec<f64>,
}

/// `Γ^k_ij`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.data[(k * d + i) * d + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// `Γ^k_ij = ½ g^{kl} (∂_i g_jl + ∂_j g_il - ∂_l g_ij)` from a metric and its
/// coordinate derivatives `dg[l] = ∂_l g`.
pub fn christoffel_from_metric(g: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Christoffel {
    let d = g.nrows();
    let ginv = g.clone().try_inverse().expect("metric is positive definite");
    let mut gamma = Christoffel::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma.set(k, i, j, 0.5 * s);
            }
        }
    }
    gamma
}

impl ManifoldSpec {
    fn with_default_budget(kind: ManifoldKind) -> Self {
        let mut spec = ManifoldSpec {
            kind,
            trapped_budget: 0.0,
        };
        spec.trapped_budget = 1e3 * spec.nominal_diameter();
        spec
    }

    pub fn flat(base: FlatProduct) -> Self {
        ManifoldSpec::with_default_budget(ManifoldKind::FlatProduct(base))
    }

    pub fn revolution(profile: BumpProfile) -> Self {
        ManifoldSpec::with_default_budget(ManifoldKind::SurfaceOfRevolution { profile })
    }

    pub fn perturbed(base: FlatProduct, perturbation: Perturbation) -> Result<Self> {
        perturbation.validate(&base)?;
        Ok(ManifoldSpec::with_default_budget(
            ManifoldKind::PerturbedProduct { base, perturbation },
        ))
    }

    pub fn with_budget(mut self, budget: f64) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "trapped_budget = {budget} must be positive"
            )));
        }
        self.trapped_budget = budget;
        Ok(self)
    }

    /// Named specs used by the CLI and the selftest.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "flat-d2s1" => Ok(ManifoldSpec::flat(FlatProduct::standard(2)?)),
            "flat-d3s1" => Ok(ManifoldSpec::flat(FlatProduct::standard(3)?)),
            "flat-cylinder" => Ok(ManifoldSpec::revolution(BumpProfile::flat())),
            "bump" => Ok(ManifoldSpec::revolution(BumpProfile::new(0.0, 0.2, 0.05)?)),
            "perturbed-d2s1" => ManifoldSpec::perturbed(
                FlatProduct::standard(2)?,
                Perturbation {
                    amplitude: 0.05,
                    radius: 0.5,
                    center: vec![0.1, 0.0],
                },
            ),
            other => Err(Error::InvalidParameter(format!(
                "unknown spec preset '{other}' (known: flat-d2s1, flat-d3s1, flat-cylinder, bump, perturbed-d2s1)"
            ))),
        }
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn trapped_budget(&self) -> f64 {
        self.trapped_budget
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ManifoldKind::FlatProduct(f) => f.n + 1,
            ManifoldKind::PerturbedProduct { base, .. } => base.n + 1,
            ManifoldKind::SurfaceOfRevolution { .. } => 2,
        }
    }

    /// The product base for cylinder-type specs.
    pub fn product_base(&self) -> Option<&FlatProduct> {
        match &self.kind {
            ManifoldKind::FlatProduct(f) => Some(f),
            ManifoldKind::PerturbedProduct { base, .. } => Some(base),
            ManifoldKind::SurfaceOfRevolution { .. } => None,
        }
    }

    pub fn profile(&self) -> Option<&BumpProfile> {
        match &self.kind {
            ManifoldKind::SurfaceOfRevolution { profile } => Some(profile),
            _ => None,
        }
    }

    pub fn boundary_type(&self) -> BoundaryType {
        match self.product_base() {
            Some(f) => BoundaryType::Cylinder {
                n: f.n,
                radius: f.disc_radius,
                circle_length: f.circle_length,
            },
            None => BoundaryType::RevolutionEnds,
        }
    }

    /// Index and period of the angle coordinate.
    pub fn angle_coordinate(&self) -> (usize, f64) {
        match self.product_base() {
            Some(f) => (f.n, f.circle_length),
            None => (1, TAU),
        }
    }

    /// Rough diameter used for the default trapped budget.
    pub fn nominal_diameter(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatProduct(f) => {
                (2.0 * f.disc_radius).hypot(0.5 * f.circle_length)
            }
            ManifoldKind::PerturbedProduct { base, perturbation } => {
                (2.0 * base.disc_radius).hypot(0.5 * base.circle_length)
                    * (1.0 + perturbation.amplitude.max(0.0)).sqrt()
            }
            ManifoldKind::SurfaceOfRevolution { profile } => 2.0f64.hypot(PI * profile.max_value()),
        }
    }

    /// Volume of the manifold, by closed form or quadrature of the profile.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatProduct(f) => {
                let ball = crate::angles::unit_sphere_area(f.n - 1) / f.n as f64;
                ball * f.disc_radius.powi(f.n as i32) * f.circle_length
            }
            ManifoldKind::SurfaceOfRevolution { profile } => {
                let bump = match profile.support() {
                    Some((a, b)) => {
                        crate::quadrature::integrate(|t| profile.value(t) - 1.0, a, b, 1e-13).value
                    }
                    None => 0.0,
                };
                TAU * (2.0 + bump)
            }
            ManifoldKind::PerturbedProduct { .. } => f64::NAN,
        }
    }

    /// Largest step the integrator may take without skipping over metric
    /// features entirely.
    pub(crate) fn max_step(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatProduct(_) => f64::INFINITY,
            ManifoldKind::SurfaceOfRevolution { profile } => {
                if profile.is_flat() {
                    f64::INFINITY
                } else {
                    0.5 * profile.epsilon
                }
            }
            ManifoldKind::PerturbedProduct { perturbation, .. } => 0.25 * perturbation.radius,
        }
    }

    /// Length scale for the first step off the boundary.
    pub(crate) fn boundary_scale(&self) -> f64 {
        self.product_base().map_or(1.0, |f| f.disc_radius)
    }

    fn check_len(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} chart coordinates, got {}",
                self.dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain {
                coords: coords.to_vec(),
            });
        }
        Ok(())
    }

    /// Whether `coords` lies in the compact chart domain (boundary included).
    pub fn in_domain(&self, coords: &[f64]) -> bool {
        if coords.len() != self.dim() {
            return false;
        }
        match self.product_base() {
            Some(f) => {
                let r = coords[..f.n].iter().map(|x| x * x).sum::<f64>().sqrt();
                r <= f.disc_radius * (1.0 + DOMAIN_SLACK)
            }
            None => coords[0].abs() <= 1.0 + DOMAIN_SLACK,
        }
    }

    /// Validated chart point with its angle coordinate reduced.
    pub fn chart_point(&self, coords: &[f64]) -> Result<ChartPoint> {
        self.check_len(coords)?;
        if !self.in_domain(coords) {
            return Err(Error::Domain {
                coords: coords.to_vec(),
            });
        }
        let (k, period) = self.angle_coordinate();
        let mut c = coords.to_vec();
        c[k] = reduce(c[k], period);
        Ok(ChartPoint { coords: c })
    }

    pub fn tangent_vector(&self, base: &ChartPoint, components: &[f64]) -> Result<TangentVector> {
        if components.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} vector components, got {}",
                self.dim(),
                components.len()
            )));
        }
        Ok(TangentVector {
            base: base.clone(),
            components: components.to_vec(),
        })
    }

    /// `g_ij(p)` over an unrestricted chart position.
    pub(crate) fn metric_raw(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        match &self.kind {
            ManifoldKind::FlatProduct(_) => DMatrix::identity(d, d),
            ManifoldKind::SurfaceOfRevolution { profile } => {
                let f = profile.value(x[0]);
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, f * f]))
            }
            ManifoldKind::PerturbedProduct { perturbation, .. } => {
                let (lambda, _) = perturbation.factor(&to_coords(x));
                DMatrix::identity(d, d) * lambda
            }
        }
    }

    /// `∂_l g` for each coordinate `l`.
    pub(crate) fn metric_derivatives_raw(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let d = self.dim();
        let mut out = vec![DMatrix::zeros(d, d); d];
        match &self.kind {
            ManifoldKind::FlatProduct(_) => {}
            ManifoldKind::SurfaceOfRevolution { profile } => {
                let (f, f1, _) = profile.jet(x[0]);
                out[0][(1, 1)] = 2.0 * f * f1;
            }
            ManifoldKind::PerturbedProduct { perturbation, .. } => {
                let (_, grad) = perturbation.factor(&to_coords(x));
                for (l, m) in out.iter_mut().enumerate() {
                    *m = DMatrix::identity(d, d) * grad[l];
                }
            }
        }
        out
    }

    /// `g_ij(p)`.
    pub fn metric_at(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_len(&p.coords)?;
        if !self.in_domain(&p.coords) {
            return Err(Error::Domain {
                coords: p.coords.clone(),
            });
        }
        Ok(self.metric_raw(&p.coords))
    }

    /// `Γ^k_ij(p)`.
    pub fn christoffel_at(&self, p: &ChartPoint) -> Result<Christoffel> {
        self.check_len(&p.coords)?;
        if !self.in_domain(&p.coords) {
            return Err(Error::Domain {
                coords: p.coords.clone(),
            });
        }
        Ok(self.christoffel_raw(&p.coords))
    }

    pub(crate) fn christoffel_raw(&self, x: &[f64]) -> Christoffel {
        let d = self.dim();
        match &self.kind {
            ManifoldKind::FlatProduct(_) => Christoffel::zeros(d),
            ManifoldKind::SurfaceOfRevolution { profile } => {
                let (f, f1, _) = profile.jet(x[0]);
                let mut g = Christoffel::zeros(2);
                g.set(0, 1, 1, -f * f1);
                g.set(1, 0, 1, f1 / f);
                g.set(1, 1, 0, f1 / f);
                g
            }
            ManifoldKind::PerturbedProduct { .. } => {
                christoffel_from_metric(&self.metric_raw(x), &self.metric_derivatives_raw(x))
            }
        }
    }

    /// `g(v, v)` at `p`.
    pub fn norm(&self, v: &TangentVector) -> f64 {
        self.norm2(&to_coords(&v.base.coords), &to_coords(&v.components))
            .sqrt()
    }

    /// Geodesic acceleration `-Γ^k_ij v^i v^j`.
    #[inline]
    pub(crate) fn accel(&self, x: &Coords, v: &Coords) -> Coords {
        match &self.kind {
            ManifoldKind::FlatProduct(_) => Coords::zeros(),
            ManifoldKind::SurfaceOfRevolution { profile } => {
                let (f, f1, _) = profile.jet(x[0]);
                let mut a = Coords::zeros();
                if f1 != 0.0 {
                    a[0] = f * f1 * v[1] * v[1];
                    a[1] = -2.0 * f1 / f * v[0] * v[1];
                }
                a
            }
            ManifoldKind::PerturbedProduct { perturbation, .. } => {
                let (lambda, grad) = perturbation.factor(x);
                if lambda == 1.0 && grad.iter().all(|g| *g == 0.0) {
                    return Coords::zeros();
                }
                let gv = grad.dot(v);
                let vv = v.dot(v);
                (grad * vv - v * (2.0 * gv)) / (2.0 * lambda)
            }
        }
    }

    #[inline]
    pub(crate) fn norm2(&self, x: &Coords, v: &Coords) -> f64 {
        match &self.kind {
            ManifoldKind::FlatProduct(_) => v.dot(v),
            ManifoldKind::SurfaceOfRevolution { profile } => {
                let f = profile.value(x[0]);
                v[0] * v[0] + f * f * v[1] * v[1]
            }
            ManifoldKind::PerturbedProduct { perturbation, .. } => {
                perturbation.factor(x).0 * v.dot(v)
            }
        }
    }

    /// Positive inside, zero on `∂M`, negative outside.
    #[inline]
    pub(crate) fn boundary_fn(&self, x: &Coords) -> f64 {
        match self.product_base() {
            Some(f) => f.disc_radius - x.rows(0, f.n).norm(),
            None => 1.0 - x[0].abs(),
        }
    }

    /// Chart realization `(position, velocity)` of a canonical boundary vector.
    pub(crate) fn embed(&self, b: &BoundaryVector) -> Result<(Coords, Coords)> {
        let ty = self.boundary_type();
        if !b.boundary_type_matches(&ty) {
            return Err(Error::Identification(format!(
                "boundary vector {:?} does not live on {:?}",
                b.point(),
                ty
            )));
        }
        let mut x = Coords::zeros();
        let mut v = Coords::zeros();
        match (b.point(), self.product_base()) {
            (BoundaryPoint::Cylinder { u, theta }, Some(f)) => {
                for i in 0..f.n {
                    x[i] = f.disc_radius * u[i];
                }
                x[f.n] = reduce(*theta, f.circle_length);
                for (i, c) in b.direction().iter().enumerate() {
                    v[i] = *c;
                }
            }
            (BoundaryPoint::End { end, alpha }, None) => {
                let profile = self.profile().expect("revolution spec");
                x[0] = end.sign();
                x[1] = reduce(*alpha, TAU);
                let f = profile.value(x[0]);
                v[0] = b.direction()[0];
                v[1] = b.direction()[1] / f;
            }
            _ => unreachable!("boundary type checked above"),
        }
        Ok((x, v))
    }

    /// Chart realization of `b` plus the inward unit normal at its base point.
    pub fn boundary_embed(&self, b: &BoundaryVector) -> Result<(TangentVector, TangentVector)> {
        let (x, v) = self.embed(b)?;
        let d = self.dim();
        let base = ChartPoint {
            coords: x.as_slice()[..d].to_vec(),
        };
        let eta = b.inward_normal();
        let normal = match self.product_base() {
            Some(_) => eta,
            None => {
                let f = self.profile().expect("revolution spec").value(x[0]);
                vec![eta[0], eta[1] / f]
            }
        };
        Ok((
            TangentVector {
                base: base.clone(),
                components: v.as_slice()[..d].to_vec(),
            },
            TangentVector {
                base,
                components: normal,
            },
        ))
    }

    /// Canonical boundary vector of a chart state on (or within bisection
    /// tolerance of) the boundary. The direction is normalized to unit length.
    pub(crate) fn boundary_vector_from_chart(&self, x: &Coords, v: &Coords) -> BoundaryVector {
        match self.product_base() {
            Some(f) => {
                let r = x.rows(0, f.n).norm();
                let u: Vec<f64> = (0..f.n).map(|i| x[i] / r).collect();
                let theta = reduce(x[f.n], f.circle_length);
                let speed = v.rows(0, f.n + 1).norm();
                let dir: Vec<f64> = (0..=f.n).map(|i| v[i] / speed).collect();
                BoundaryVector::cylinder(u, theta, dir).expect("well-formed chart state")
            }
            None => {
                let profile = self.profile().expect("revolution spec");
                let end = End::from_sign(x[0]);
                let f = profile.value(x[0]);
                let (a, c) = (v[0], f * v[1]);
                let s = a.hypot(c);
                BoundaryVector::new(
                    BoundaryPoint::End {
                        end,
                        alpha: reduce(x[1], TAU),
                    },
                    vec![a / s, c / s],
                )
                .expect("well-formed chart state")
            }
        }
    }

    /// Canonical one-line description; the fingerprint hashes this string.
    pub fn describe(&self) -> String {
        let body = match &self.kind {
            ManifoldKind::FlatProduct(f) => format!(
                "flat n={} disc_radius={:?} circle_length={:?}",
                f.n, f.disc_radius, f.circle_length
            ),
            ManifoldKind::SurfaceOfRevolution { profile } => format!(
                "revolution shift={:?} epsilon={:?} amplitude={:?}",
                profile.shift, profile.epsilon, profile.amplitude
            ),
            ManifoldKind::PerturbedProduct { base, perturbation } => format!(
                "perturbed n={} disc_radius={:?} circle_length={:?} amplitude={:?} radius={:?} center={:?}",
                base.n,
                base.disc_radius,
                base.circle_length,
                perturbation.amplitude,
                perturbation.radius,
                perturbation.center
            ),
        };
        format!("{body} trapped_budget={:?}", self.trapped_budget)
    }

    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.describe().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn to_coords(x: &[f64]) -> Coords {
    let mut c = Coords::zeros();
    for (i, v) in x.iter().enumerate().take(MAX_DIM) {
        c[i] = *v;
    }
    c
}
