//! The generalised belief update: project the adjusted expectation onto the
//! solution space, express the move in the principal-axis coordinates of
//! the adjusted variance (the constraint discrepancy z), shrink each axis
//! by f(z_i), and rebuild the generalised adjusted variance L S L'.
//!
//! Shrink functions are an additional belief specification. Every
//! registered function must satisfy three coherency constraints: f(0) = 1
//! (feasible adjustments are left untouched), f -> 0 as |z| -> infinity,
//! and f non-increasing in |z|. The default is the Cantelli form
//! 1 / (1 + z^2).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::adjust::AdjustedBeliefs;
use crate::constraint::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::EigenFactorisation;
use crate::project::{whitened_project, ProjectOpts, ProjectionResult};

/// A named shrink function, validated against the coherency constraints at
/// construction.
#[derive(Clone)]
pub struct ShrinkFunction {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ShrinkFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShrinkFunction")
            .field("name", &self.name)
            .finish()
    }
}

/// Grid used to check monotonicity in |z| at registration.
const CONSTRAINT_GRID_POINTS: usize = 1000;
const CONSTRAINT_GRID_MAX: f64 = 10.0;
/// Decay check: f(+-1e6) must not exceed this.
const DECAY_PROBE: f64 = 1e6;
const DECAY_BOUND: f64 = 1e-6;

impl ShrinkFunction {
    /// Validate and wrap a shrink function.
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let name = name.into();
        let reject = |reason: String| Error::InvalidShrink {
            name: name.clone(),
            reason,
        };

        if f(0.0) != 1.0 {
            return Err(reject(format!("f(0) = {} but must be exactly 1", f(0.0))));
        }
        for probe in [DECAY_PROBE, -DECAY_PROBE] {
            let v = f(probe);
            if !(v.is_finite() && v <= DECAY_BOUND) {
                return Err(reject(format!(
                    "f({probe}) = {v} exceeds the decay bound {DECAY_BOUND}"
                )));
            }
        }
        for sign in [1.0, -1.0] {
            let mut prev = f(0.0);
            for i in 1..CONSTRAINT_GRID_POINTS {
                let z = sign * CONSTRAINT_GRID_MAX * (i as f64) / (CONSTRAINT_GRID_POINTS - 1) as f64;
                let v = f(z);
                if !v.is_finite() || v <= 0.0 || v > 1.0 {
                    return Err(reject(format!("f({z}) = {v} outside (0, 1]")));
                }
                if v > prev + 1e-12 {
                    return Err(reject(format!(
                        "f is increasing in |z| near z = {z} ({v} > {prev})"
                    )));
                }
                prev = v;
            }
        }
        Ok(ShrinkFunction { name, f: Arc::new(f) })
    }

    /// The Cantelli-motivated default 1 / (1 + z^2).
    pub fn cantelli() -> Self {
        ShrinkFunction::new("cantelli", |z| 1.0 / (1.0 + z * z))
            .expect("the default satisfies its own constraints")
    }

    /// Gaussian decay exp(-z^2).
    pub fn gauss() -> Self {
        ShrinkFunction::new("gauss", |z| (-z * z).exp())
            .expect("the builtin satisfies the constraints")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.f)(z)
    }
}

/// Name-indexed collection of shrink functions; written once at startup,
/// read-only afterwards.
#[derive(Debug, Clone, Default)]
pub struct ShrinkRegistry {
    map: BTreeMap<String, ShrinkFunction>,
}

impl ShrinkRegistry {
    pub fn empty() -> Self {
        ShrinkRegistry::default()
    }

    /// Registry preloaded with `cantelli` and `gauss`.
    pub fn with_builtins() -> Self {
        let mut r = ShrinkRegistry::default();
        r.register(ShrinkFunction::cantelli());
        r.register(ShrinkFunction::gauss());
        r
    }

    pub fn register(&mut self, f: ShrinkFunction) {
        self.map.insert(f.name.clone(), f);
    }

    pub fn get(&self, name: &str) -> Result<&ShrinkFunction> {
        self.map.get(name).ok_or_else(|| Error::UnknownName {
            kind: "shrink function",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

/// The generalised belief update: projected expectation, constraint
/// discrepancy, shrink diagonal and generalised adjusted variance, plus the
/// projection certificate.
#[derive(Debug, Clone)]
pub struct GeneralisedBeliefs {
    pub expectation: DVector<f64>,
    /// z in the principal-axis basis of the adjusted variance; null-space
    /// coordinates are zero by construction.
    pub discrepancy: DVector<f64>,
    /// Diagonal of S, each entry in (0, 1]; exactly 1 where z_i = 0.
    pub shrink: DVector<f64>,
    pub variance: DMatrix<f64>,
    pub projection: ProjectionResult,
}

/// z = L^+ (e_c - e) with L = Q sqrt(lambda): the standardised move from
/// the adjusted expectation to its projection, axis by axis. Coordinates
/// beyond the rank are zero.
pub fn constraint_discrepancy(
    e_c: &DVector<f64>,
    e: &DVector<f64>,
    factor: &EigenFactorisation,
) -> Result<DVector<f64>> {
    let n = factor.dim();
    if e_c.len() != n || e.len() != n {
        return Err(Error::DimensionMismatch {
            left: "e_c",
            left_dim: e_c.len(),
            right: "factor",
            right_dim: n,
        });
    }
    let diff = e_c - e;
    let mut z = DVector::zeros(n);
    for i in 0..factor.rank {
        z[i] = factor.q.column(i).dot(&diff) / factor.lambda[i].sqrt();
    }
    Ok(z)
}

/// Apply the Cantelli shrink elementwise: S_ii = 1 / (1 + z_i^2).
pub fn cantelli_shrink(z: &DVector<f64>) -> DVector<f64> {
    z.map(|zi| 1.0 / (1.0 + zi * zi))
}

/// var = L diag(shrink) L' = sum_i shrink_i lambda_i q_i q_i'.
/// With shrink identically one this reconstructs the adjusted variance.
pub fn generalised_variance(
    factor: &EigenFactorisation,
    shrink: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = factor.dim();
    if shrink.len() != n {
        return Err(Error::DimensionMismatch {
            left: "shrink",
            left_dim: shrink.len(),
            right: "factor",
            right_dim: n,
        });
    }
    for (i, &s) in shrink.iter().enumerate() {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::ShrinkOutOfRange { index: i, value: s });
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = shrink[i] * factor.lambda[i];
        if w == 0.0 {
            continue;
        }
        let qi = factor.q.column(i);
        for r in 0..n {
            for c in r..n {
                let v = w * qi[r] * qi[c];
                out[(r, c)] += v;
                if r != c {
                    out[(c, r)] += v;
                }
            }
        }
    }
    Ok(out)
}

/// Run the full generalisation pipeline on adjusted beliefs.
///
/// When the adjusted expectation already lies in the solution space the
/// output reproduces the input exactly: expectation unchanged, shrink
/// identically one, variance identical.
pub fn generalise(
    adj: &AdjustedBeliefs,
    c: &ConstraintSet,
    shrink_fn: &ShrinkFunction,
    opts: &ProjectOpts,
) -> Result<GeneralisedBeliefs> {
    let n = adj.expectation.len();
    let feas = c.satisfies(&adj.expectation, opts.feas_tol)?;
    if feas.satisfied {
        return Ok(GeneralisedBeliefs {
            expectation: adj.expectation.clone(),
            discrepancy: DVector::zeros(n),
            shrink: DVector::from_element(n, 1.0),
            variance: adj.variance.clone(),
            projection: ProjectionResult {
                q_star: adj.expectation.iter().copied().collect(),
                active_set: Vec::new(),
                multipliers: vec![0.0; c.len()],
                kkt_residual: 0.0,
                iterations: 0,
            },
        });
    }

    let factor = crate::linalg::eigen_factorise_named(
        &adj.variance,
        opts.rank_rtol,
        1e-8,
        1e-8,
        "adjusted variance",
    )?;
    let projection = whitened_project(&adj.expectation, &factor, c, opts)?;
    let e_c = projection.q_star_vector();
    let z = constraint_discrepancy(&e_c, &adj.expectation, &factor)?;

    let mut shrink = DVector::from_element(n, 1.0);
    for i in 0..factor.rank {
        shrink[i] = shrink_fn.eval(z[i]);
    }
    // null-space axes carry no adjusted uncertainty and shrink by nothing
    let variance = generalised_variance(&factor, &shrink)?;

    Ok(GeneralisedBeliefs {
        expectation: e_c,
        discrepancy: z,
        shrink,
        variance,
        projection,
    })
}
