//! Entire graphs of small prescribed mean curvature over R^3.
//!
//! The solution is assembled from a convergent power series in the amplitude
//! of the curvature source. Each order is obtained from the lower ones by a
//! Newtonian potential and a Helmholtz projection, both evaluated spectrally.

pub mod born_infeld;
pub mod coefficients;
pub mod config;
pub mod dump;
pub mod error;
pub mod grid;
pub mod hierarchy;
pub mod potential;
pub mod run;
pub mod solver;
pub mod verify;
mod spectral;

pub use error::{Error, Result};
pub use grid::{
    curl, divergence, gradient, jacobian, laplacian, sample_scalar, sample_vector, sup_norms,
    GeometrySign, GridSpec, ScalarField, VectorField,
};
