//! Bayes linear belief adjustment: adjusted expectation, adjusted variance
//! and sequential adjustment by a partition of the data.
//!
//! The adjusted expectation is the affine function h0 + H0 D of the data
//! minimising expected squared error, with H0 = cov[X,D] var[D]^+ and
//! h0 = E[X] - H0 E[D]; the adjusted variance is
//! var[X] - cov[X,D] var[D]^+ cov[D,X] and does not depend on the
//! observed value.

use nalgebra::{DMatrix, DVector};

use crate::belief::BeliefStructure;
use crate::error::{Error, Result};
use crate::linalg::{sym_pseudo_inverse, symmetrise};

/// The result of adjusting X by observed data d: the observed adjusted
/// expectation, the adjusted variance, and the affine coefficients
/// (h0, H0) with expectation = h0 + H0 d.
#[derive(Debug, Clone)]
pub struct AdjustedBeliefs {
    pub expectation: DVector<f64>,
    pub variance: DMatrix<f64>,
    pub h0: DVector<f64>,
    pub coefficients: DMatrix<f64>,
}

fn check_datum(bs: &BeliefStructure, d: &DVector<f64>) -> Result<()> {
    if d.len() != bs.dim_d() {
        return Err(Error::DimensionMismatch {
            left: "d",
            left_dim: d.len(),
            right: "ed",
            right_dim: bs.dim_d(),
        });
    }
    Ok(())
}

/// E[X] + cov[X,D] var[D]^+ (d - E[D]).
pub fn adjusted_expectation(
    bs: &BeliefStructure,
    d: &DVector<f64>,
    rtol: f64,
) -> Result<DVector<f64>> {
    check_datum(bs, d)?;
    let vd_pinv = sym_pseudo_inverse(bs.var_d(), rtol)?;
    Ok(bs.ex() + bs.cov_xd() * (vd_pinv * (d - bs.ed())))
}

/// var[X] - cov[X,D] var[D]^+ cov[D,X]; symmetrised against rounding.
pub fn adjusted_variance(bs: &BeliefStructure, rtol: f64) -> Result<DMatrix<f64>> {
    let vd_pinv = sym_pseudo_inverse(bs.var_d(), rtol)?;
    let reduction = bs.cov_xd() * vd_pinv * bs.cov_xd().transpose();
    symmetrise(&(bs.var_x() - reduction), 1e-8, "adjusted variance")
}

/// Full adjustment: expectation, variance and the affine coefficients.
pub fn adjust(bs: &BeliefStructure, d: &DVector<f64>, rtol: f64) -> Result<AdjustedBeliefs> {
    check_datum(bs, d)?;
    let vd_pinv = sym_pseudo_inverse(bs.var_d(), rtol)?;
    let coefficients = bs.cov_xd() * &vd_pinv;
    let h0 = bs.ex() - &coefficients * bs.ed();
    let expectation = &h0 + &coefficients * d;
    let reduction = &coefficients * bs.cov_xd().transpose();
    let variance = symmetrise(&(bs.var_x() - reduction), 1e-8, "adjusted variance")?;
    Ok(AdjustedBeliefs {
        expectation,
        variance,
        h0,
        coefficients,
    })
}

fn select_vector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

fn select_block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Adjust by D[i1] first, materialise the intermediate belief structure
/// over (X, D[i2]) with adjusted expectations, variances and covariances,
/// then adjust by D[i2]. Coherent with the joint adjustment.
///
/// The returned coefficients are recomposed over the full datum, so
/// `expectation = h0 + H0 d` still holds with d in its original order.
pub fn adjust_sequential(
    bs: &BeliefStructure,
    i1: &[usize],
    i2: &[usize],
    d: &DVector<f64>,
    rtol: f64,
) -> Result<AdjustedBeliefs> {
    check_datum(bs, d)?;
    let m = bs.dim_d();
    let mut seen = vec![false; m];
    for &i in i1.iter().chain(i2.iter()) {
        if i >= m {
            return Err(Error::InvalidIndices {
                reason: format!("index {i} out of range for m = {m}"),
            });
        }
        if seen[i] {
            return Err(Error::InvalidIndices {
                reason: format!("index {i} appears twice"),
            });
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidIndices {
            reason: "index sets do not cover 1..m".to_string(),
        });
    }

    if i1.is_empty() {
        return adjust(bs, d, rtol);
    }

    // first stage: adjust (X, D2) jointly by D1
    let ed1 = select_vector(bs.ed(), i1);
    let ed2 = select_vector(bs.ed(), i2);
    let d1 = select_vector(d, i1);
    let d2 = select_vector(d, i2);
    let vd11 = select_block(bs.var_d(), i1, i1);
    let vd12 = select_block(bs.var_d(), i1, i2);
    let vd22 = select_block(bs.var_d(), i2, i2);
    let cov_x1 = select_columns(bs.cov_xd(), i1);
    let cov_x2 = select_columns(bs.cov_xd(), i2);

    let vd11_pinv = sym_pseudo_inverse(&vd11, rtol)?;
    let h1 = &cov_x1 * &vd11_pinv; // n x |i1|
    let g1 = vd12.transpose() * &vd11_pinv; // |i2| x |i1|

    let innovation = &d1 - &ed1;
    let ex_mid = bs.ex() + &h1 * &innovation;
    let ed_mid = &ed2 + &g1 * &innovation;
    let var_x_mid = symmetrise(
        &(bs.var_x() - &h1 * cov_x1.transpose()),
        1e-8,
        "intermediate var_x",
    )?;
    let var_d_mid = symmetrise(&(&vd22 - &g1 * &vd12), 1e-8, "intermediate var_d")?;
    let cov_mid = &cov_x2 - &h1 * &vd12;

    if i2.is_empty() {
        // nothing left to adjust by; recompose coefficients over d
        let mut coefficients = DMatrix::zeros(bs.dim_x(), m);
        for (j, &col) in i1.iter().enumerate() {
            coefficients.set_column(col, &h1.column(j));
        }
        let h0 = bs.ex() - &coefficients * bs.ed();
        let variance = var_x_mid;
        return Ok(AdjustedBeliefs {
            expectation: ex_mid,
            variance,
            h0,
            coefficients,
        });
    }

    // second stage: adjust by D2 under the intermediate structure
    let vmid_pinv = sym_pseudo_inverse(&var_d_mid, rtol)?;
    let h2 = &cov_mid * &vmid_pinv; // n x |i2|
    let expectation = &ex_mid + &h2 * (&d2 - &ed_mid);
    let variance = symmetrise(
        &(&var_x_mid - &h2 * cov_mid.transpose()),
        1e-8,
        "sequential adjusted variance",
    )?;

    // recompose the affine form in the full datum:
    // E(d) = ex + H1 (d1 - ed1) + H2 (d2 - ed2 - G1 (d1 - ed1))
    let h2g1 = &h2 * &g1;
    let mut coefficients = DMatrix::zeros(bs.dim_x(), m);
    for (j, &col) in i1.iter().enumerate() {
        let combined = h1.column(j) - h2g1.column(j);
        coefficients.set_column(col, &combined);
    }
    for (j, &col) in i2.iter().enumerate() {
        coefficients.set_column(col, &h2.column(j));
    }
    let h0 = bs.ex() - &coefficients * bs.ed();

    Ok(AdjustedBeliefs {
        expectation,
        variance,
        h0,
        coefficients,
    })
}
