//! Polyhedral solution spaces as linear inequality systems A q >= b, with
//! constructors for the sets used in practice: non-negativity, monotone
//! orderings (total and partial), boxes and curvature (second-difference)
//! constraints.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A q >= b componentwise, with a human-readable label per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ConstraintFile", into = "ConstraintFile")]
pub struct ConstraintSet {
    a: DMatrix<f64>,
    b: DVector<f64>,
    labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstraintFile {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    labels: Vec<String>,
}

impl TryFrom<ConstraintFile> for ConstraintSet {
    type Error = Error;

    fn try_from(f: ConstraintFile) -> Result<Self> {
        let k = f.a.len();
        let n = f.a.first().map_or(0, Vec::len);
        for row in &f.a {
            if row.len() != n {
                return Err(Error::InvalidIndices {
                    reason: "ragged rows in constraint matrix".to_string(),
                });
            }
        }
        ConstraintSet::new(
            DMatrix::from_fn(k, n, |i, j| f.a[i][j]),
            DVector::from_vec(f.b),
            f.labels,
        )
    }
}

impl From<ConstraintSet> for ConstraintFile {
    fn from(c: ConstraintSet) -> Self {
        ConstraintFile {
            a: (0..c.a.nrows())
                .map(|i| (0..c.a.ncols()).map(|j| c.a[(i, j)]).collect())
                .collect(),
            b: c.b.iter().copied().collect(),
            labels: c.labels,
        }
    }
}

/// Outcome of a membership test, naming the most-violated row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Feasibility {
    pub satisfied: bool,
    /// min over rows of (A q - b); negative means violation.
    pub worst_slack: f64,
    pub worst_row: usize,
    pub worst_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Convex,
    Concave,
}

impl ConstraintSet {
    /// Build from raw parts, enforcing k >= 1, consistent dimensions and
    /// no all-zero rows.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let k = a.nrows();
        if k == 0 {
            return Err(Error::EmptyConstraintSet {
                reason: "no rows supplied",
            });
        }
        if b.len() != k {
            return Err(Error::DimensionMismatch {
                left: "a rows",
                left_dim: k,
                right: "b",
                right_dim: b.len(),
            });
        }
        if labels.len() != k {
            return Err(Error::DimensionMismatch {
                left: "a rows",
                left_dim: k,
                right: "labels",
                right_dim: labels.len(),
            });
        }
        for (i, label) in labels.iter().enumerate() {
            if a.row(i).iter().all(|v| *v == 0.0) {
                return Err(Error::ZeroConstraintRow {
                    row: i,
                    label: label.clone(),
                });
            }
        }
        Ok(ConstraintSet { a, b, labels })
    }

    /// The non-negative orthant: q_i >= 0 for every coordinate.
    pub fn nonneg_cone(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyConstraintSet {
                reason: "nonneg cone needs n >= 1",
            });
        }
        ConstraintSet::new(
            DMatrix::identity(n, n),
            DVector::zeros(n),
            (0..n).map(|i| format!("nonneg[{i}]")).collect(),
        )
    }

    /// Monotone non-decreasing along the given visit order:
    /// q[order[i+1]] - q[order[i]] >= 0.
    pub fn monotone_chain(order: &[usize]) -> Result<Self> {
        let n = order.len();
        if n < 2 {
            return Err(Error::EmptyConstraintSet {
                reason: "monotone chain needs n >= 2",
            });
        }
        let mut seen = vec![false; n];
        for &i in order {
            if i >= n {
                return Err(Error::InvalidIndices {
                    reason: format!("order index {i} out of range for n = {n}"),
                });
            }
            if seen[i] {
                return Err(Error::InvalidIndices {
                    reason: format!("order index {i} repeated"),
                });
            }
            seen[i] = true;
        }
        let mut a = DMatrix::zeros(n - 1, n);
        let mut labels = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            a[(i, order[i])] = -1.0;
            a[(i, order[i + 1])] = 1.0;
            labels.push(format!("mono[{}->{}]", order[i], order[i + 1]));
        }
        ConstraintSet::new(a, DVector::zeros(n - 1), labels)
    }

    /// Partial-order monotonicity: one row q_j - q_i >= 0 per edge (i, j).
    pub fn monotone_partial(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyConstraintSet {
                reason: "no edges supplied",
            });
        }
        let mut a = DMatrix::zeros(edges.len(), n);
        let mut labels = Vec::with_capacity(edges.len());
        for (row, &(i, j)) in edges.iter().enumerate() {
            if i == j {
                return Err(Error::InvalidIndices {
                    reason: format!("self-loop edge ({i}, {j})"),
                });
            }
            if i >= n || j >= n {
                return Err(Error::InvalidIndices {
                    reason: format!("edge ({i}, {j}) out of range for n = {n}"),
                });
            }
            a[(row, i)] = -1.0;
            a[(row, j)] = 1.0;
            labels.push(format!("mono[{i}->{j}]"));
        }
        ConstraintSet::new(a, DVector::zeros(edges.len()), labels)
    }

    /// Componentwise bounds lower <= q <= upper. Infinite bounds emit no
    /// row; a fully unbounded box is an error (empty constraint system).
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                left: "lower",
                left_dim: lower.len(),
                right: "upper",
                right_dim: upper.len(),
            });
        }
        let n = lower.len();
        for i in 0..n {
            if lower[i] > upper[i] {
                return Err(Error::InvalidBounds {
                    index: i,
                    lower: lower[i],
                    upper: upper[i],
                });
            }
        }
        let mut rows: Vec<(usize, f64, f64, String)> = Vec::new();
        for i in 0..n {
            if lower[i].is_finite() {
                rows.push((i, 1.0, lower[i], format!("lower[{i}]")));
            }
            if upper[i].is_finite() {
                rows.push((i, -1.0, -upper[i], format!("upper[{i}]")));
            }
        }
        if rows.is_empty() {
            return Err(Error::EmptyConstraintSet {
                reason: "all box bounds infinite",
            });
        }
        let mut a = DMatrix::zeros(rows.len(), n);
        let mut b = DVector::zeros(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (r, (i, sign, bound, label)) in rows.into_iter().enumerate() {
            a[(r, i)] = sign;
            b[r] = bound;
            labels.push(label);
        }
        ConstraintSet::new(a, b, labels)
    }

    /// Second-difference (curvature) constraints on a unit-spaced grid:
    /// +-(q[i] - 2 q[i+1] + q[i+2]) >= 0 for convex/concave.
    pub fn second_difference(n: usize, curvature: Curvature) -> Result<Self> {
        if n < 3 {
            return Err(Error::EmptyConstraintSet {
                reason: "second differences need n >= 3",
            });
        }
        let sign = match curvature {
            Curvature::Convex => 1.0,
            Curvature::Concave => -1.0,
        };
        let tag = match curvature {
            Curvature::Convex => "convex",
            Curvature::Concave => "concave",
        };
        let mut a = DMatrix::zeros(n - 2, n);
        let mut labels = Vec::with_capacity(n - 2);
        for i in 0..n - 2 {
            a[(i, i)] = sign;
            a[(i, i + 1)] = -2.0 * sign;
            a[(i, i + 2)] = sign;
            labels.push(format!("{tag}[{i}]"));
        }
        ConstraintSet::new(a, DVector::zeros(n - 2), labels)
    }

    /// Stack two systems over the same coordinates.
    pub fn concat(&self, other: &ConstraintSet) -> Result<ConstraintSet> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: "self",
                left_dim: self.dim(),
                right: "other",
                right_dim: other.dim(),
            });
        }
        let k = self.len() + other.len();
        let mut a = DMatrix::zeros(k, self.dim());
        a.view_mut((0, 0), (self.len(), self.dim())).copy_from(&self.a);
        a.view_mut((self.len(), 0), (other.len(), other.dim()))
            .copy_from(&other.a);
        let mut b = DVector::zeros(k);
        b.rows_mut(0, self.len()).copy_from(&self.b);
        b.rows_mut(self.len(), other.len()).copy_from(&other.b);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        ConstraintSet::new(a, b, labels)
    }

    /// Number of rows k.
    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    /// Coordinate dimension n.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Membership test: true iff min(A q - b) >= -tol, with the
    /// most-violated row reported.
    pub fn satisfies(&self, q: &DVector<f64>, tol: f64) -> Result<Feasibility> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: "q",
                left_dim: q.len(),
                right: "constraint columns",
                right_dim: self.dim(),
            });
        }
        let slack = &self.a * q - &self.b;
        let mut worst = 0usize;
        for i in 1..self.len() {
            if slack[i] < slack[worst] {
                worst = i;
            }
        }
        Ok(Feasibility {
            satisfied: slack[worst] >= -tol,
            worst_slack: slack[worst],
            worst_row: worst,
            worst_label: self.labels[worst].clone(),
        })
    }
}

/// Shorthand constraint descriptions accepted by the CLI and config files,
/// e.g. `{"type":"nonneg"}` or `{"type":"box","lower":0.0,"upper":1.0}`.
/// The coordinate dimension comes from the belief structure at hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintSpec {
    Nonneg,
    MonotoneChain {
        #[serde(default)]
        order: Option<Vec<usize>>,
    },
    MonotonePartial {
        edges: Vec<(usize, usize)>,
    },
    Box {
        lower: BoundSpec,
        upper: BoundSpec,
    },
    SecondDifference {
        sign: Curvature,
    },
}

/// A bound that is either one scalar broadcast to every coordinate or a
/// full vector. `null` means unbounded on that side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Unbounded,
    Scalar(f64),
    Vector(Vec<f64>),
}

impl BoundSpec {
    fn expand(&self, n: usize, unbounded: f64, name: &'static str) -> Result<Vec<f64>> {
        match self {
            BoundSpec::Unbounded => Ok(vec![unbounded; n]),
            BoundSpec::Scalar(v) => Ok(vec![*v; n]),
            BoundSpec::Vector(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        left: name,
                        left_dim: v.len(),
                        right: "n",
                        right_dim: n,
                    });
                }
                Ok(v.clone())
            }
        }
    }
}

impl ConstraintSpec {
    /// Materialise the shorthand for coordinate dimension n.
    pub fn build(&self, n: usize) -> Result<ConstraintSet> {
        match self {
            ConstraintSpec::Nonneg => ConstraintSet::nonneg_cone(n),
            ConstraintSpec::MonotoneChain { order } => match order {
                Some(o) => ConstraintSet::monotone_chain(o),
                None => ConstraintSet::monotone_chain(&(0..n).collect::<Vec<_>>()),
            },
            ConstraintSpec::MonotonePartial { edges } => ConstraintSet::monotone_partial(n, edges),
            ConstraintSpec::Box { lower, upper } => {
                let lo = lower.expand(n, f64::NEG_INFINITY, "lower")?;
                let hi = upper.expand(n, f64::INFINITY, "upper")?;
                ConstraintSet::boxed(&lo, &hi)
            }
            ConstraintSpec::SecondDifference { sign } => ConstraintSet::second_difference(n, *sign),
        }
    }
}
