//! Spectral solver and bifurcation toolkit for two-phase lipid vesicles
//! described as radial graphs `y = e^{u(x)} x` over the unit sphere.

pub mod app;
pub mod continuation;
pub mod error;
pub mod geometry;
pub mod harmonics;
pub mod linear;
pub mod model;
pub mod residual;
pub mod symmetry;

pub use error::{Error, Result};
pub use continuation::{Branch, BranchPoint, ContinuationConfig, Parameter};
pub use harmonics::{build_grid, QuadratureGrid, SpectralField};
pub use model::{Constitutive, Model, ModelConfig, ModelState};
pub use symmetry::{GroupElement, Subgroup};
