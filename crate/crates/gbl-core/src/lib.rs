//! Bayes linear inference and its generalisation to restricted solution
//! spaces.
//!
//! A second-order prior over a quantity of interest X and data D - the
//! belief structure - is adjusted by observations through the Bayes linear
//! updating equations. When the adjusted expectation must live in a convex
//! set (non-negativity, monotonicity, boxes, curvature), the generalised
//! update projects it onto the set under the adjusted-variance metric and
//! shrinks the variance axis-by-axis according to how far the projection
//! moved.
//!
//! Modules:
//! - [`belief`]: the belief-structure data model and coherence validation
//! - [`linalg`]: shared symmetric-matrix machinery
//! - [`adjust`]: the updating equations and sequential adjustment
//! - [`constraint`]: polyhedral solution spaces A q >= b
//! - [`project`]: metric projection with KKT certification
//! - [`genvar`]: constraint discrepancy, shrink functions, generalised
//!   variance
//! - [`kernel`]: covariance functions for regression and spatial models
//! - [`study`]: the monotone-regression benchmark and synthetic spatial
//!   counts
//! - [`rng`]: deterministic splittable random streams

pub mod adjust;
pub mod belief;
pub mod constraint;
pub mod error;
pub mod genvar;
pub mod kernel;
pub mod linalg;
pub mod project;
pub mod rng;
pub mod study;
pub mod tol;

pub use adjust::{adjust, adjust_sequential, adjusted_expectation, adjusted_variance, AdjustedBeliefs};
pub use belief::{BeliefStructure, Check, ValidationReport};
pub use constraint::{BoundSpec, ConstraintSet, ConstraintSpec, Curvature, Feasibility};
pub use error::{Error, Result};
pub use genvar::{
    cantelli_shrink, constraint_discrepancy, generalise, generalised_variance, GeneralisedBeliefs,
    ShrinkFunction, ShrinkRegistry,
};
pub use kernel::{
    gram, gram_cross, gram_from_distances, haversine_km, kronecker_cov, matern52, product_kernel,
    sqexp, KernelFamily, KernelSpec,
};
pub use linalg::{
    eigen_factorise, mahalanobis_sq, nearest_psd, sym_pseudo_inverse, EigenFactorisation,
};
pub use project::{kkt_residual, project, whitened_project, ProjectOpts, ProjectionResult};
pub use study::{
    fit_gbl_monotone, fit_gp, fit_spatial_nonneg, rejection_sample_monotone, run_study,
    simulate_dataset, synth_spatial_counts, spatial_csv, SpatialCounts, SpatialFit, StudyConfig,
    StudyReport, TestFunction,
};
pub use tol::Tolerances;

// Re-export the matrix types so downstream crates do not need a direct
// nalgebra dependency for basic use.
pub use nalgebra::{DMatrix, DVector};
