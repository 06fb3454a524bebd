//! The second-order belief specification over a quantity of interest X and
//! data D: expectations, variances and the cross-covariance. Coherence of
//! the prior means the stacked (X, D) covariance block matrix is positive
//! semi-definite, i.e. some joint random quantity could realise it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, eigen_extrema, max_abs, symmetrise};
use crate::tol::Tolerances;

/// Prior specification E[X], E[D], var[X], var[D], cov[X, D].
///
/// Serialises to/from a JSON document with keys `ex`, `ed`, `var_x`,
/// `var_d`, `cov_xd` where matrices are row-major nested arrays; this is
/// the belief-file format the CLI consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BeliefFile", into = "BeliefFile")]
pub struct BeliefStructure {
    ex: DVector<f64>,
    ed: DVector<f64>,
    var_x: DMatrix<f64>,
    var_d: DMatrix<f64>,
    cov_xd: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BeliefFile {
    ex: Vec<f64>,
    ed: Vec<f64>,
    var_x: Vec<Vec<f64>>,
    var_d: Vec<Vec<f64>>,
    cov_xd: Vec<Vec<f64>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &'static str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != ncols {
            return Err(Error::InvalidIndices {
                reason: format!("ragged rows in `{name}`"),
            });
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl TryFrom<BeliefFile> for BeliefStructure {
    type Error = Error;

    fn try_from(f: BeliefFile) -> Result<Self> {
        BeliefStructure::new(
            DVector::from_vec(f.ex),
            DVector::from_vec(f.ed),
            rows_to_matrix(&f.var_x, "var_x")?,
            rows_to_matrix(&f.var_d, "var_d")?,
            rows_to_matrix(&f.cov_xd, "cov_xd")?,
        )
    }
}

impl From<BeliefStructure> for BeliefFile {
    fn from(b: BeliefStructure) -> Self {
        BeliefFile {
            ex: b.ex.iter().copied().collect(),
            ed: b.ed.iter().copied().collect(),
            var_x: matrix_to_rows(&b.var_x),
            var_d: matrix_to_rows(&b.var_d),
            cov_xd: matrix_to_rows(&b.cov_xd),
        }
    }
}

impl BeliefStructure {
    /// Build a belief structure, checking dimensional consistency and
    /// symmetrising the variance blocks (within the default `sym_tol`).
    pub fn new(
        ex: DVector<f64>,
        ed: DVector<f64>,
        var_x: DMatrix<f64>,
        var_d: DMatrix<f64>,
        cov_xd: DMatrix<f64>,
    ) -> Result<Self> {
        let n = ex.len();
        let m = ed.len();
        let dims: [(&'static str, usize, &'static str, usize); 5] = [
            ("var_x rows", var_x.nrows(), "ex", n),
            ("var_x cols", var_x.ncols(), "ex", n),
            ("var_d rows", var_d.nrows(), "ed", m),
            ("var_d cols", var_d.ncols(), "ed", m),
            ("cov_xd rows", cov_xd.nrows(), "ex", n),
        ];
        for (left, left_dim, right, right_dim) in dims {
            if left_dim != right_dim {
                return Err(Error::DimensionMismatch {
                    left,
                    left_dim,
                    right,
                    right_dim,
                });
            }
        }
        if cov_xd.ncols() != m {
            return Err(Error::DimensionMismatch {
                left: "cov_xd cols",
                left_dim: cov_xd.ncols(),
                right: "ed",
                right_dim: m,
            });
        }
        let tol = Tolerances::default();
        let var_x = symmetrise(&var_x, tol.sym_tol, "var_x")?;
        let var_d = symmetrise(&var_d, tol.sym_tol, "var_d")?;
        Ok(BeliefStructure {
            ex,
            ed,
            var_x,
            var_d,
            cov_xd,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.ex.len()
    }

    pub fn dim_d(&self) -> usize {
        self.ed.len()
    }

    pub fn ex(&self) -> &DVector<f64> {
        &self.ex
    }

    pub fn ed(&self) -> &DVector<f64> {
        &self.ed
    }

    pub fn var_x(&self) -> &DMatrix<f64> {
        &self.var_x
    }

    pub fn var_d(&self) -> &DMatrix<f64> {
        &self.var_d
    }

    pub fn cov_xd(&self) -> &DMatrix<f64> {
        &self.cov_xd
    }

    /// The stacked (n+m) x (n+m) covariance [[var_x, cov_xd], [cov_xd', var_d]].
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let n = self.dim_x();
        let m = self.dim_d();
        let mut joint = DMatrix::zeros(n + m, n + m);
        joint.view_mut((0, 0), (n, n)).copy_from(&self.var_x);
        joint.view_mut((0, n), (n, m)).copy_from(&self.cov_xd);
        joint
            .view_mut((n, 0), (m, n))
            .copy_from(&self.cov_xd.transpose());
        joint.view_mut((n, n), (m, m)).copy_from(&self.var_d);
        joint
    }

    /// Run every coherence check and collect the outcome per invariant.
    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let mut checks = Vec::new();

        for (name, m) in [("var_x", &self.var_x), ("var_d", &self.var_d)] {
            let scale = max_abs(m).max(1.0);
            let asym = asymmetry(m);
            checks.push(Check {
                name: format!("{name} symmetric"),
                passed: asym <= tol.sym_tol * scale,
                magnitude: asym,
            });
        }

        for (name, m) in [
            ("var_x", self.var_x.clone()),
            ("var_d", self.var_d.clone()),
            ("joint", self.joint_covariance()),
        ] {
            let (min, max) = eigen_extrema(&m);
            checks.push(Check {
                name: format!("{name} positive semi-definite"),
                passed: min >= -tol.psd_tol * max.abs().max(1e-300),
                magnitude: min,
            });
        }

        ValidationReport { checks }
    }
}

/// One coherence check with the offending magnitude (asymmetry or minimum
/// eigenvalue) retained for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<32} {}  ({:+.3e})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.magnitude
            )?;
        }
        Ok(())
    }
}
