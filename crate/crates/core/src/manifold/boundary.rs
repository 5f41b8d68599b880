//! Canonical boundary coordinates.
//!
//! Every manifold sharing a [`BoundaryType`] sees the same boundary points and
//! the same orthonormal boundary frame, so scattering data from different
//! specs can be compared entry by entry. Directions are stored as components
//! in that orthonormal frame:
//!
//! * `S^{n-1} × S¹` (product and perturbed product): the ambient `ℝ^{n+1}`
//!   components `(v_h, v_z)`; the inward normal at `(u, θ)` is `(-u, 0)`.
//! * the two ends of a surface of revolution: `(meridian, circumferential)`
//!   components, i.e. `(dt, F dα)`; the inward normal is `(+1, 0)` at `t = -1`
//!   and `(-1, 0)` at `t = +1`.

use serde::{Deserialize, Serialize};

use crate::angles::periodic_distance;
use crate::error::{Error, Result};

/// `⟨V, η⁺⟩` below this (in absolute value) counts as tangential.
pub const GRAZING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryType {
    /// `S^{n-1}(radius) × S¹(circle_length)`.
    Cylinder {
        n: usize,
        radius: f64,
        circle_length: f64,
    },
    /// Two circles of length 2π at `t = ±1`.
    RevolutionEnds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum End {
    Lower,
    Upper,
}

impl End {
    pub fn sign(self) -> f64 {
        match self {
            End::Lower => -1.0,
            End::Upper => 1.0,
        }
    }

    pub fn from_sign(s: f64) -> End {
        if s < 0.0 {
            End::Lower
        } else {
            End::Upper
        }
    }

    pub fn opposite(self) -> End {
        match self {
            End::Lower => End::Upper,
            End::Upper => End::Lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryPoint {
    Cylinder { u: Vec<f64>, theta: f64 },
    End { end: End, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Inward,
    Outward,
    Tangential,
}

/// A unit vector based at a boundary point, in canonical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVector {
    point: BoundaryPoint,
    direction: Vec<f64>,
    orientation: Orientation,
}

impl BoundaryVector {
    pub fn new(point: BoundaryPoint, direction: Vec<f64>) -> Result<Self> {
        match &point {
            BoundaryPoint::Cylinder { u, .. } => {
                if direction.len() != u.len() + 1 {
                    return Err(Error::Identification(format!(
                        "direction has {} components, expected {}",
                        direction.len(),
                        u.len() + 1
                    )));
                }
                let norm_u = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm_u - 1.0).abs() > 1e-9 {
                    return Err(Error::Identification(format!(
                        "boundary point u must be a unit vector (|u| = {norm_u})"
                    )));
                }
            }
            BoundaryPoint::End { .. } => {
                if direction.len() != 2 {
                    return Err(Error::Identification(format!(
                        "direction has {} components, expected 2",
                        direction.len()
                    )));
                }
            }
        }
        let mut v = BoundaryVector {
            point,
            direction,
            orientation: Orientation::Tangential,
        };
        let c = v.normal_component();
        v.orientation = if c >= GRAZING_TOL {
            Orientation::Inward
        } else if c <= -GRAZING_TOL {
            Orientation::Outward
        } else {
            Orientation::Tangential
        };
        Ok(v)
    }

    pub fn cylinder(u: Vec<f64>, theta: f64, direction: Vec<f64>) -> Result<Self> {
        BoundaryVector::new(BoundaryPoint::Cylinder { u, theta }, direction)
    }

    /// Inward vector at an end of a surface of revolution making signed angle
    /// `phi` with the inward meridian (positive `phi` turns toward `+α`).
    pub fn meridian(end: End, alpha: f64, phi: f64) -> Result<Self> {
        BoundaryVector::new(
            BoundaryPoint::End { end, alpha },
            vec![-end.sign() * phi.cos(), phi.sin()],
        )
    }

    pub fn point(&self) -> &BoundaryPoint {
        &self.point
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn is_grazing(&self) -> bool {
        self.orientation == Orientation::Tangential
    }

    /// Inward unit normal at the base point, canonical components.
    pub fn inward_normal(&self) -> Vec<f64> {
        match &self.point {
            BoundaryPoint::Cylinder { u, .. } => {
                let mut eta: Vec<f64> = u.iter().map(|x| -x).collect();
                eta.push(0.0);
                eta
            }
            BoundaryPoint::End { end, .. } => vec![-end.sign(), 0.0],
        }
    }

    /// `⟨V, η⁺⟩`.
    pub fn normal_component(&self) -> f64 {
        self.inward_normal()
            .iter()
            .zip(&self.direction)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.direction.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Same base point, direction negated.
    pub fn reversed(&self) -> BoundaryVector {
        BoundaryVector::new(
            self.point.clone(),
            self.direction.iter().map(|x| -x).collect(),
        )
        .expect("negation preserves shape")
    }

    /// Signed angle from the inward meridian; meaningful for revolution ends only.
    pub fn meridian_angle(&self) -> Option<f64> {
        match &self.point {
            BoundaryPoint::End { end, .. } => {
                let along = -end.sign() * self.direction[0];
                Some(self.direction[1].atan2(along))
            }
            BoundaryPoint::Cylinder { .. } => None,
        }
    }

    /// Canonical coordinates of the base point, flattened (for tables).
    pub fn point_coords(&self) -> Vec<f64> {
        match &self.point {
            BoundaryPoint::Cylinder { u, theta } => {
                let mut c = u.clone();
                c.push(*theta);
                c
            }
            BoundaryPoint::End { end, alpha } => vec![end.sign(), *alpha],
        }
    }

    pub fn boundary_type_matches(&self, ty: &BoundaryType) -> bool {
        match (&self.point, ty) {
            (BoundaryPoint::Cylinder { u, .. }, BoundaryType::Cylinder { n, .. }) => u.len() == *n,
            (BoundaryPoint::End { .. }, BoundaryType::RevolutionEnds) => true,
            _ => false,
        }
    }
}

impl BoundaryType {
    /// Dimension of the manifold whose boundary this is.
    pub fn manifold_dim(&self) -> usize {
        match self {
            BoundaryType::Cylinder { n, .. } => n + 1,
            BoundaryType::RevolutionEnds => 2,
        }
    }

    /// Riemannian area of the boundary.
    pub fn area(&self) -> f64 {
        match *self {
            BoundaryType::Cylinder {
                n,
                radius,
                circle_length,
            } => crate::angles::unit_sphere_area(n - 1) * radius.powi(n as i32 - 1) * circle_length,
            BoundaryType::RevolutionEnds => 2.0 * std::f64::consts::TAU,
        }
    }

    /// Distance on the boundary with its induced product metric. Points on
    /// different revolution ends are infinitely far apart.
    pub fn distance(&self, a: &BoundaryPoint, b: &BoundaryPoint) -> f64 {
        match (self, a, b) {
            (
                BoundaryType::Cylinder {
                    radius,
                    circle_length,
                    ..
                },
                BoundaryPoint::Cylinder { u: ua, theta: ta },
                BoundaryPoint::Cylinder { u: ub, theta: tb },
            ) => {
                let arc = radius * crate::angles::angle_between(ua, ub);
                let dz = periodic_distance(*ta, *tb, *circle_length);
                arc.hypot(dz)
            }
            (
                BoundaryType::RevolutionEnds,
                BoundaryPoint::End { end: ea, alpha: aa },
                BoundaryPoint::End { end: eb, alpha: ab },
            ) => {
                if ea == eb {
                    periodic_distance(*aa, *ab, std::f64::consts::TAU)
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Axis labels for flattened point coordinates.
    pub fn point_labels(&self) -> Vec<String> {
        match self {
            BoundaryType::Cylinder { n, .. } => {
                let mut v: Vec<String> = (1..=*n).map(|i| format!("u{i}")).collect();
                v.push("theta".into());
                v
            }
            BoundaryType::RevolutionEnds => vec!["end".into(), "alpha".into()],
        }
    }

    pub fn direction_labels(&self) -> Vec<String> {
        match self {
            BoundaryType::Cylinder { n, .. } => {
                let mut v: Vec<String> = (1..=*n).map(|i| format!("v{i}")).collect();
                v.push("vz".into());
                v
            }
            BoundaryType::RevolutionEnds => vec!["v_meridian".into(), "v_circle".into()],
        }
    }

    /// Inverse of [`BoundaryVector::point_coords`].
    pub fn point_from_coords(&self, c: &[f64]) -> Result<BoundaryPoint> {
        match self {
            BoundaryType::Cylinder { n, .. } => {
                if c.len() != n + 1 {
                    return Err(Error::Identification(format!(
                        "expected {} point coordinates, got {}",
                        n + 1,
                        c.len()
                    )));
                }
                Ok(BoundaryPoint::Cylinder {
                    u: c[..*n].to_vec(),
                    theta: c[*n],
                })
            }
            BoundaryType::RevolutionEnds => {
                if c.len() != 2 {
                    return Err(Error::Identification(format!(
                        "expected 2 point coordinates, got {}",
                        c.len()
                    )));
                }
                Ok(BoundaryPoint::End {
                    end: End::from_sign(c[0]),
                    alpha: c[1],
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_classification() {
        let v = BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.orientation(), Orientation::Inward);
        assert_eq!(v.reversed().orientation(), Orientation::Outward);
        let vert = BoundaryVector::cylinder(vec![0.6, 0.8], 2.0, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(vert.is_grazing());
    }

    #[test]
    fn meridian_constructor_round_trips_angle() {
        for &phi in &[0.0, 0.3, -1.2, 1.5] {
            for end in [End::Lower, End::Upper] {
                let v = BoundaryVector::meridian(end, 0.0, phi).unwrap();
                assert!((v.meridian_angle().unwrap() - phi).abs() < 1e-15);
                assert!((v.normal_component() - phi.cos()).abs() < 1e-15);
            }
        }
        let v = BoundaryVector::meridian(End::Lower, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(v.is_grazing());
    }

    #[test]
    fn boundary_distance_is_periodic() {
        let ty = BoundaryType::Cylinder {
            n: 2,
            radius: 1.0,
            circle_length: std::f64::consts::TAU,
        };
        let a = BoundaryPoint::Cylinder {
            u: vec![1.0, 0.0],
            theta: 0.1,
        };
        let b = BoundaryPoint::Cylinder {
            u: vec![1.0, 0.0],
            theta: std::f64::consts::TAU - 0.1,
        };
        assert!((ty.distance(&a, &b) - 0.2).abs() < 1e-12);
        let c = BoundaryPoint::Cylinder {
            u: vec![-1.0, 0.0],
            theta: 0.1,
        };
        assert!((ty.distance(&a, &c) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_vectors() {
        assert!(BoundaryVector::cylinder(vec![0.5, 0.0], 0.0, vec![-1.0, 0.0, 0.0]).is_err());
        assert!(BoundaryVector::cylinder(vec![1.0, 0.0], 0.0, vec![-1.0, 0.0]).is_err());
    }
}
