//! Covariance-function toolkit: squared-exponential and Matern-5/2 kernels,
//! per-dimension product correlations, gram assembly with an observation
//! nugget, Kronecker products for separable covariances, and great-circle
//! distance for spatial models.
//!
//! Length-scale convention: sqexp(r) = amplitude * exp(-r^2 / l^2). The
//! gamma parameterisation amplitude * exp(-gamma r^2) maps through
//! l = gamma^(-1/2) and is exposed via [`KernelSpec::sqexp_from_gamma`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseCorrelation {
    #[serde(alias = "squared_exponential")]
    Sqexp,
    Matern52,
}

/// Kernel family. `Product` multiplies a base correlation over input
/// dimensions; `KroneckerSeparable` marks covariances assembled from two
/// factor matrices via [`kronecker_cov`] and has no pointwise form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[serde(alias = "squared_exponential")]
    Sqexp,
    Matern52,
    Product { base: BaseCorrelation },
    KroneckerSeparable,
}

/// Kernel specification: family, output variance, per-dimension length
/// scales (a single entry broadcasts) and the diagonal observation nugget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub length_scales: Vec<f64>,
    #[serde(default)]
    pub nugget: f64,
}

impl KernelSpec {
    pub fn sqexp(amplitude: f64, length_scale: f64, nugget: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Sqexp,
            amplitude,
            length_scales: vec![length_scale],
            nugget,
        }
    }

    pub fn matern52(amplitude: f64, length_scale: f64, nugget: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Matern52,
            amplitude,
            length_scales: vec![length_scale],
            nugget,
        }
    }

    /// The eta * exp(-gamma r^2) parameterisation.
    pub fn sqexp_from_gamma(eta: f64, gamma: f64, nugget: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::InvalidKernel {
                reason: format!("gamma must be positive, got {gamma}"),
            });
        }
        Ok(KernelSpec::sqexp(eta, gamma.powf(-0.5), nugget))
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude < 0.0 {
            return Err(Error::InvalidKernel {
                reason: format!("amplitude {} negative", self.amplitude),
            });
        }
        if self.nugget < 0.0 {
            return Err(Error::InvalidKernel {
                reason: format!("nugget {} negative", self.nugget),
            });
        }
        if self.length_scales.is_empty() {
            return Err(Error::InvalidKernel {
                reason: "no length scales supplied".to_string(),
            });
        }
        if self.length_scales.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidKernel {
                reason: "length scales must be positive".to_string(),
            });
        }
        Ok(())
    }

    fn scale_for(&self, dim: usize) -> Result<Vec<f64>> {
        if self.length_scales.len() == 1 {
            Ok(vec![self.length_scales[0]; dim])
        } else if self.length_scales.len() == dim {
            Ok(self.length_scales.clone())
        } else {
            Err(Error::DimensionMismatch {
                left: "length_scales",
                left_dim: self.length_scales.len(),
                right: "point",
                right_dim: dim,
            })
        }
    }

    /// Pointwise kernel value between two points (without nugget).
    pub fn value(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.validate()?;
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch {
                left: "x1",
                left_dim: x1.len(),
                right: "x2",
                right_dim: x2.len(),
            });
        }
        let scales = self.scale_for(x1.len())?;
        match self.family {
            KernelFamily::Sqexp => {
                let r2: f64 = x1
                    .iter()
                    .zip(x2)
                    .zip(&scales)
                    .map(|((a, b), l)| ((a - b) / l).powi(2))
                    .sum();
                Ok(self.amplitude * (-r2).exp())
            }
            KernelFamily::Matern52 => {
                let r2: f64 = x1
                    .iter()
                    .zip(x2)
                    .zip(&scales)
                    .map(|((a, b), l)| ((a - b) / l).powi(2))
                    .sum();
                Ok(self.amplitude * matern52_profile(r2.sqrt()))
            }
            KernelFamily::Product { base } => {
                let mut prod = 1.0;
                for ((a, b), l) in x1.iter().zip(x2).zip(&scales) {
                    let r = (a - b).abs() / l;
                    prod *= match base {
                        BaseCorrelation::Sqexp => (-r * r).exp(),
                        BaseCorrelation::Matern52 => matern52_profile(r),
                    };
                }
                Ok(self.amplitude * prod)
            }
            KernelFamily::KroneckerSeparable => Err(Error::InvalidKernel {
                reason: "kronecker_separable has no pointwise form; assemble with kronecker_cov"
                    .to_string(),
            }),
        }
    }

    /// Radial value at distance r (families with an isotropic profile only).
    pub fn radial(&self, r: f64) -> Result<f64> {
        self.validate()?;
        let l = self.length_scales[0];
        match self.family {
            KernelFamily::Sqexp => Ok(self.amplitude * (-(r / l) * (r / l)).exp()),
            KernelFamily::Matern52 => Ok(self.amplitude * matern52_profile(r / l)),
            _ => Err(Error::InvalidKernel {
                reason: "kernel family has no radial profile".to_string(),
            }),
        }
    }
}

fn matern52_profile(r: f64) -> f64 {
    let s = 5.0_f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// amplitude * exp(-||x1 - x2||^2 / l^2).
pub fn sqexp(x1: &[f64], x2: &[f64], amplitude: f64, length_scale: f64) -> Result<f64> {
    KernelSpec::sqexp(amplitude, length_scale, 0.0).value(x1, x2)
}

/// amplitude * (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r), r = ||x1 - x2|| / l.
pub fn matern52(x1: &[f64], x2: &[f64], amplitude: f64, length_scale: f64) -> Result<f64> {
    KernelSpec::matern52(amplitude, length_scale, 0.0).value(x1, x2)
}

/// Product of per-dimension base correlations (correlation form, amplitude 1).
pub fn product_kernel(
    x1: &[f64],
    x2: &[f64],
    length_scales: &[f64],
    base: BaseCorrelation,
) -> Result<f64> {
    KernelSpec {
        family: KernelFamily::Product { base },
        amplitude: 1.0,
        length_scales: length_scales.to_vec(),
        nugget: 0.0,
    }
    .value(x1, x2)
}

/// Gram matrix over a point set, nugget added to the diagonal.
pub fn gram(points: &[Vec<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidKernel {
            reason: "empty point set".to_string(),
        });
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.value(&points[i], &points[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += spec.nugget;
    }
    Ok(k)
}

/// Cross-gram between two point sets; the nugget is observation error and
/// never appears off the data block's own diagonal.
pub fn gram_cross(
    points_a: &[Vec<f64>],
    points_b: &[Vec<f64>],
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let mut k = DMatrix::zeros(points_a.len(), points_b.len());
    for i in 0..points_a.len() {
        for j in 0..points_b.len() {
            k[(i, j)] = spec.value(&points_a[i], &points_b[j])?;
        }
    }
    Ok(k)
}

/// Gram matrix from a precomputed distance matrix (radial families), with
/// the nugget on the diagonal.
pub fn gram_from_distances(distances: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::DimensionMismatch {
            left: "distance rows",
            left_dim: n,
            right: "distance cols",
            right_dim: distances.ncols(),
        });
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.radial(distances[(i, j)])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += spec.nugget;
    }
    Ok(k)
}

/// Cross-covariance from distances, no nugget.
pub fn gram_cross_from_distances(
    distances: &DMatrix<f64>,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let mut k = DMatrix::zeros(distances.nrows(), distances.ncols());
    for i in 0..distances.nrows() {
        for j in 0..distances.ncols() {
            k[(i, j)] = spec.radial(distances[(i, j)])?;
        }
    }
    Ok(k)
}

/// Kronecker product of two symmetric PSD factors; eigenvalues of the
/// result are the pairwise products.
pub fn kronecker_cov(k_t: &DMatrix<f64>, c_phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for (name, m) in [("k_t", k_t), ("c_phi", c_phi)] {
        let f = crate::linalg::eigen_factorise_named(m, 1e-12, 1e-10, 1e-8, "kronecker factor");
        if let Err(e) = f {
            return Err(match e {
                Error::NotPsd { eigenvalue, tol, .. } => Error::NotPsd {
                    name,
                    eigenvalue,
                    tol,
                },
                other => other,
            });
        }
    }
    Ok(k_t.kronecker(c_phi))
}

/// Great-circle distance in kilometres on a sphere of radius 6371 km;
/// coordinates in decimal degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64> {
    for (name, value, min, max) in [
        ("lat1", lat1, -90.0, 90.0),
        ("lat2", lat2, -90.0, 90.0),
        ("lon1", lon1, -180.0, 180.0),
        ("lon2", lon2, -180.0, 180.0),
    ] {
        if !(value >= min && value <= max) {
            return Err(Error::CoordinateOutOfRange {
                name,
                value,
                min,
                max,
            });
        }
    }
    let p1 = lat1.to_radians();
    let p2 = lat2.to_radians();
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin())
}

/// Pairwise haversine distances for (lat, lon) centres.
pub fn haversine_matrix(lat: &[f64], lon: &[f64]) -> Result<DMatrix<f64>> {
    if lat.len() != lon.len() {
        return Err(Error::DimensionMismatch {
            left: "lat",
            left_dim: lat.len(),
            right: "lon",
            right_dim: lon.len(),
        });
    }
    let n = lat.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = haversine_km(lat[i], lon[i], lat[j], lon[j])?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// Wrap a scalar grid as 1-d points for gram assembly.
pub fn grid_points(grid: &[f64]) -> Vec<Vec<f64>> {
    grid.iter().map(|&x| vec![x]).collect()
}

/// Minimum eigenvalue of a gram matrix, for PSD diagnostics in tests.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    for i in 0..n {
        min = min.min(se.eigenvalues[i]);
    }
    min
}

/// Equidistant grid of n points spanning [lo, hi] inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> DVector<f64> {
    if n == 1 {
        return DVector::from_element(1, lo);
    }
    DVector::from_fn(n, |i, _| {
        lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
    })
}
