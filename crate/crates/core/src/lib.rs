//! Numerical laboratory for geodesic scattering on Riemannian manifolds with
//! boundary.
//!
//! The crate traces unit-speed geodesics on three metric families (flat
//! `Dⁿ × S¹`, bump surfaces of revolution, conformally perturbed products),
//! computes scattering maps and lens data in canonical boundary coordinates,
//! compares lens data across manifolds with isometric boundaries, and
//! estimates integral-geometric quantities (Santaló volumes, trapped-set
//! fractions, Busemann functions).

pub mod angles;
pub mod error;
pub mod geodesic;
pub mod integralgeom;
pub mod manifold;
pub mod quadrature;
pub mod revolution;
pub mod sampling;
pub mod scattering;
pub mod selftest;

pub use error::{Error, Result};
