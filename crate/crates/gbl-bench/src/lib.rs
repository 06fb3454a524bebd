//! Shared instance builders for the benchmarks.

use gbl_core::{BeliefStructure, DMatrix, DVector, KernelSpec, StudyConfig, TestFunction};

/// The bivariate worked example used throughout the test suite.
pub fn bivariate_structure() -> BeliefStructure {
    BeliefStructure::new(
        DVector::from_vec(vec![1.0, 1.0]),
        DVector::from_vec(vec![1.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[0.54, 0.09, 0.09, 0.54]),
        DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 1.0]),
        DMatrix::from_row_slice(2, 2, &[0.4, -0.1, -0.1, -0.3]),
    )
    .expect("bivariate structure is coherent")
}

/// A single noisy benchmark dataset at the study's grid size.
pub fn benchmark_dataset(n_points: usize) -> (DVector<f64>, DVector<f64>, KernelSpec) {
    let cfg = StudyConfig {
        n_points,
        ..StudyConfig::default()
    };
    let (x, y) = gbl_core::simulate_dataset(&cfg, TestFunction::Sinusoidal, 0);
    let second = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let spec = KernelSpec::sqexp((second - 1.0).max(1e-8), 4.0, 1.0);
    (x, y, spec)
}
