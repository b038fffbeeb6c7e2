//! Desk-scale numerics for perimeter-minimizing sets with bounded mean
//! curvature: geometric functionals of normal graphs over S^n and surfaces
//! of revolution, deficit and asymmetry measures, the convex-envelope
//! identity, spectral stability estimates, an obstacle-problem mean
//! curvature truncation, and the explicit family of sets realizing the
//! sharp C^0 rates.

pub mod axisym;
pub mod config;
pub mod error;
pub mod quad;
pub mod setspec;
pub mod sharp;
pub mod golden;
pub mod graph;
pub mod harmonics;
pub mod obstacle;
pub mod optim;
pub mod sphere;
pub mod suite;

pub use error::{Error, Result};
