//! Symmetric-matrix utilities: validation, eigendecomposition with a
//! deterministic convention, Moore-Penrose pseudo-inverse, nearest-PSD
//! projection and the Mahalanobis distance.
//!
//! Every factorising operation takes a relative rank tolerance `rtol`:
//! eigenvalues at or below `rtol * lambda_max` are treated as zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric PSD matrix with a fixed convention:
/// eigenvalues sorted non-increasing, and each eigenvector's
/// largest-magnitude entry made non-negative. The convention makes square
/// roots (and everything built from them) reproducible run to run.
#[derive(Debug, Clone)]
pub struct EigenFactorisation {
    /// Orthogonal matrix whose columns are eigenvectors.
    pub q: DMatrix<f64>,
    /// Eigenvalues, sorted non-increasing; entries within tolerance of zero
    /// are clamped to exactly zero.
    pub lambda: DVector<f64>,
    /// Number of eigenvalues strictly above `rtol * lambda_max`.
    pub rank: usize,
}

impl EigenFactorisation {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Reassemble Q diag(lambda) Q'.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let qi = self.q.column(i);
            let li = self.lambda[i];
            if li != 0.0 {
                // rank-one accumulation keeps the result exactly symmetric
                for r in 0..n {
                    for c in 0..n {
                        out[(r, c)] += li * qi[r] * qi[c];
                    }
                }
            }
        }
        out
    }

    /// The eigen square root L = Q sqrt(lambda), restricted to the rank
    /// columns (n x rank).
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut l = DMatrix::zeros(n, self.rank);
        for j in 0..self.rank {
            let s = self.lambda[j].sqrt();
            for i in 0..n {
                l[(i, j)] = self.q[(i, j)] * s;
            }
        }
        l
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Measure the worst asymmetry |M - M'| of a square matrix.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replace M by (M + M')/2 when the asymmetry is within `sym_tol` relative
/// to the largest entry; error above. Tolerates floating-point drift
/// without silently accepting wrong inputs.
pub fn symmetrise(m: &DMatrix<f64>, sym_tol: f64, name: &'static str) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            left: name,
            left_dim: m.nrows(),
            right: name,
            right_dim: m.ncols(),
        });
    }
    let scale = max_abs(m).max(1.0);
    let asym = asymmetry(m);
    if asym > sym_tol * scale {
        return Err(Error::NotSymmetric {
            name,
            asymmetry: asym,
            tol: sym_tol * scale,
        });
    }
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}

/// Symmetric eigendecomposition with descending eigenvalues and the sign
/// convention described on [`EigenFactorisation`]. Does not enforce PSD.
fn eigen_sorted(m: DMatrix<f64>, rtol: f64) -> EigenFactorisation {
    let n = m.nrows();
    let se = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let mut q = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = se.eigenvalues[src];
        let col = se.eigenvectors.column(src);
        // largest-magnitude entry non-negative; ties resolved by the first
        // entry attaining the maximum
        let mut pivot = 0;
        let mut best = -1.0_f64;
        for i in 0..n {
            if col[i].abs() > best {
                best = col[i].abs();
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            q[(i, dst)] = flip * col[i];
        }
    }
    let lam_max = lambda.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let cut = rtol * lam_max;
    let mut rank = 0;
    for i in 0..n {
        if lambda[i].abs() <= cut {
            lambda[i] = 0.0;
        }
        if lambda[i] > cut {
            rank += 1;
        }
    }
    EigenFactorisation { q, lambda, rank }
}

/// Factorise a symmetric PSD matrix. Negative eigenvalues within
/// `psd_tol * lambda_max` are clamped to zero; anything lower is an error
/// naming the offending eigenvalue.
pub fn eigen_factorise(m: &DMatrix<f64>, rtol: f64) -> Result<EigenFactorisation> {
    eigen_factorise_named(m, rtol, 1e-10, 1e-8, "matrix")
}

pub(crate) fn eigen_factorise_named(
    m: &DMatrix<f64>,
    rtol: f64,
    sym_tol: f64,
    psd_tol: f64,
    name: &'static str,
) -> Result<EigenFactorisation> {
    let sym = symmetrise(m, sym_tol, name)?;
    let mut f = eigen_sorted(sym, rtol);
    let n = f.dim();
    if n == 0 {
        return Ok(f);
    }
    let lam_max = f.lambda[0].max(0.0);
    let floor = -psd_tol * lam_max.max(1e-300);
    let min = f.lambda[n - 1];
    if min < floor {
        return Err(Error::NotPsd {
            name,
            eigenvalue: min,
            tol: psd_tol * lam_max,
        });
    }
    for i in 0..n {
        if f.lambda[i] < 0.0 {
            f.lambda[i] = 0.0;
        }
    }
    Ok(f)
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its
/// eigendecomposition: eigenvalues with |lambda_i| <= rtol * |lambda|_max
/// are zeroed, the rest inverted.
pub fn sym_pseudo_inverse(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    let sym = symmetrise(m, 1e-10, "matrix")?;
    let f = eigen_sorted(sym, rtol);
    let n = f.dim();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lk = f.lambda[k];
        if lk == 0.0 {
            continue;
        }
        let inv = 1.0 / lk;
        let qk = f.q.column(k);
        for i in 0..n {
            for j in i..n {
                let v = inv * qk[i] * qk[j];
                out[(i, j)] += v;
                if i != j {
                    out[(j, i)] += v;
                }
            }
        }
    }
    Ok(out)
}

/// Nearest PSD matrix in Frobenius norm: symmetrise, clip negative
/// eigenvalues to zero, reconstruct. Idempotent; PSD inputs pass through.
pub fn nearest_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrise(m, 1e-10, "matrix")?;
    let mut f = eigen_sorted(sym.clone(), 0.0);
    if f.lambda.iter().all(|&l| l >= 0.0) {
        // already PSD: return the symmetrised input, not the
        // reconstruction, so the output matches within 1e-12
        return Ok(sym);
    }
    for l in f.lambda.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    Ok(f.reconstruct())
}

/// Squared Mahalanobis distance (d1 - d2)' V^+ (d1 - d2).
///
/// Non-negative by construction; zero when d1 - d2 lies in the null space
/// of V^+ (for full-rank V, exactly when d1 = d2).
pub fn mahalanobis_sq(
    d1: &DVector<f64>,
    d2: &DVector<f64>,
    v: &DMatrix<f64>,
    rtol: f64,
) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::DimensionMismatch {
            left: "d1",
            left_dim: d1.len(),
            right: "d2",
            right_dim: d2.len(),
        });
    }
    if v.nrows() != d1.len() {
        return Err(Error::DimensionMismatch {
            left: "v",
            left_dim: v.nrows(),
            right: "d1",
            right_dim: d1.len(),
        });
    }
    let pinv = sym_pseudo_inverse(v, rtol)?;
    let diff = d1 - d2;
    let q = (&pinv * &diff).dot(&diff);
    Ok(q.max(0.0))
}

/// Smallest and largest eigenvalue of a symmetric matrix, for PSD checks.
pub(crate) fn eigen_extrema(m: &DMatrix<f64>) -> (f64, f64) {
    let f = eigen_sorted(m.clone(), 0.0);
    let n = f.dim();
    if n == 0 {
        (0.0, 0.0)
    } else {
        (f.lambda[n - 1], f.lambda[0])
    }
}
