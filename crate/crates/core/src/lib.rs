//! Bayesian nonparametric density estimation on the sphere of square-root densities.
//!
//! A density `p` on the unit interval or unit square is represented through its
//! square root `q = sqrt(p)`, expanded in the cosine eigenbasis of a Matérn
//! covariance operator. Because the basis is orthonormal, the unit-integral
//! constraint on `p` becomes the constraint that the coefficient vector has unit
//! Euclidean norm, and the posterior over coefficients is sampled with
//! Hamiltonian Monte Carlo whose position updates follow great circles.
//!
//! Module map:
//!
//! - [`kl_basis`]: Matérn eigen-pairs, cosine eigenfunctions, design matrices, quadrature.
//! - [`sphere_geometry`]: tangent projection, closed-form geodesics, Newton's method on the sphere.
//! - [`fisher_checks`]: numerical checks of the Fisher geometry and the finite-to-infinite
//!   geodesic convergence harness.
//! - [`chi2_model`]: log-posterior, gradient and Hessian of the chi-square process model.
//! - [`spherical_hmc`]: the sampler and chain management.
//! - [`posterior_analysis`]: density grids, pointwise summaries, posterior predictive draws.
//! - [`cox_process`]: conjugate total-mass update and intensity draws.
//! - [`data`]: datasets, CSV ingestion, synthetic generators.

pub mod chi2_model;
pub mod cox_process;
pub mod data;
pub mod error;
pub mod fisher_checks;
pub mod kl_basis;
pub mod posterior_analysis;
pub mod sphere_geometry;
pub mod spherical_hmc;

pub use chi2_model::{Chi2Posterior, SqrtDensityState};
pub use data::Dataset;
pub use error::{Error, Result};
pub use kl_basis::{BasisSpec, DesignMatrix, MaternHyper, ModeIndex};
pub use sphere_geometry::SpherePoint;
pub use spherical_hmc::{Chain, ChainConfig};
