//! Structure-preserving solver core for Maxwell-Ampere Nernst-Planck (MANP)
//! systems on 2-D periodic staggered grids.
//!
//! The pieces, bottom up:
//! - [`grid`]: periodic mesh, cell/face/vertex fields, inner products, norms;
//! - [`operators`]: central-difference divergence, gradient, Laplacian, curl;
//! - [`spectral`]: phi-functions and FFT application of functions of the
//!   stabilized operator `L_h = -kappa Lap + lambda I`, periodic Poisson solve;
//! - [`physics`]: Bernoulli function, steric/Born excess potential, edge
//!   potential increments, Scharfetter-Gummel fluxes, convection operator;
//! - [`etd`]: the implicit ETD1 concentration update by Picard iteration with
//!   contraction/positivity condition monitors;
//! - [`ampere`]: in-step time integrals, Gauss-law correction, displacement
//!   predictor and the divergence-free Theta recurrence;
//! - [`curlfree`]: local curl-free relaxation sweeps;
//! - [`diagnostics`]: free energy, masses, minimum concentration, Gauss and
//!   curl residuals, energy-dissipation condition monitor;
//! - [`dense`]: tiny-grid dense assembly backing oracles and the dense-only
//!   positivity diagnostic;
//! - [`io`]: plain-text field snapshots.
//!
//! Dimension or grid mismatches between fields are programming errors and
//! panic; runtime failures (solver divergence, steric overflow, incompatible
//! Poisson data, relaxation stall) are `Result` errors.

pub mod ampere;
pub mod curlfree;
pub mod dense;
pub mod diagnostics;
pub mod etd;
pub mod grid;
pub mod io;
pub mod operators;
pub mod physics;
pub mod spectral;

pub use grid::{
    inner_cell, inner_edge, norm_cell, norm_edge, CellField, EdgeField, Grid, PNorm, VertexField,
};
pub use physics::{ExcessMode, ModelParams, SimState, SpeciesParams};
pub use spectral::{MultiplierKind, SpectralMultipliers};
