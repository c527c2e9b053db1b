//! Scattering theory of the one-dimensional Schrödinger operator
//! `H = -d²/dx² + V(x)` built from Volterra-iterated Jost solutions,
//! with a nonlinear Schrödinger integrator and coupling recovery.

pub mod error;
pub mod io;
pub mod nls;
pub mod jost;
pub mod numerics;
pub mod potential;
pub mod propagator;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
pub use numerics::{ComplexField, MomentumGrid, SpatialGrid, C64};
