//! Shared oracles and random generators for the integration suites. Every
//! oracle here is an independent computation path: matrix inversion goes
//! through LU/direct inverses rather than the library's eigendecomposition
//! pseudo-inverse, and optimality checks enumerate or search rather than
//! reuse the solver.

#![allow(dead_code)]

use gbl_core::rng::GaussianStream;
use gbl_core::{BeliefStructure, ConstraintSet, DMatrix, DVector};

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// The bivariate worked example: belief structure and observed datum.
pub fn bivariate_example() -> (BeliefStructure, DVector<f64>) {
    let text = std::fs::read_to_string(fixture_path("bivariate.json"))
        .expect("fixture bivariate.json is committed");
    let bs: BeliefStructure = serde_json::from_str(&text).expect("fixture parses");
    (bs, DVector::from_vec(vec![3.0, 6.5]))
}

/// Random coherent belief structure: the joint covariance is S'S (plus a
/// small ridge for conditioning), sliced into blocks.
pub fn random_structure(stream: &mut GaussianStream, n: usize, m: usize) -> BeliefStructure {
    let dim = n + m;
    let s = DMatrix::from_fn(dim + 2, dim, |_, _| stream.next_normal());
    let mut joint = s.transpose() * &s / dim as f64;
    for i in 0..dim {
        joint[(i, i)] += 0.05;
    }
    let ex = DVector::from_fn(n, |_, _| stream.next_normal());
    let ed = DVector::from_fn(m, |_, _| stream.next_normal());
    let var_x = joint.view((0, 0), (n, n)).into_owned();
    let var_d = joint.view((n, n), (m, m)).into_owned();
    let cov_xd = joint.view((0, n), (n, m)).into_owned();
    BeliefStructure::new(ex, ed, var_x, var_d, cov_xd).expect("S'S construction is coherent")
}

/// Random symmetric PSD matrix S'S / n.
pub fn random_psd(stream: &mut GaussianStream, n: usize) -> DMatrix<f64> {
    let s = DMatrix::from_fn(n + 1, n, |_, _| stream.next_normal());
    s.transpose() * &s / n as f64
}

/// A jointly-Gaussian specification D = H X + eps with its exact posterior
/// computed in precision form (an algebraically different route from the
/// covariance-form updating equations).
pub struct GaussianSpec {
    pub belief: BeliefStructure,
    pub datum: DVector<f64>,
    pub posterior_mean: DVector<f64>,
    pub posterior_cov: DMatrix<f64>,
}

pub fn random_gaussian_spec(stream: &mut GaussianStream, n: usize, m: usize) -> GaussianSpec {
    let mu0 = DVector::from_fn(n, |_, _| stream.next_normal());
    let sigma0 = random_psd(stream, n) + DMatrix::identity(n, n) * 0.3;
    let sigma_e = random_psd(stream, m) + DMatrix::identity(m, m) * 0.3;
    let h = DMatrix::from_fn(m, n, |_, _| stream.next_normal());
    let datum = DVector::from_fn(m, |_, _| 2.0 * stream.next_normal());

    let var_d = &h * &sigma0 * h.transpose() + &sigma_e;
    let cov_xd = &sigma0 * h.transpose();
    let belief = BeliefStructure::new(
        mu0.clone(),
        &h * &mu0,
        sigma0.clone(),
        var_d,
        cov_xd,
    )
    .expect("gaussian specification is coherent");

    let sigma0_inv = sigma0.try_inverse().expect("prior covariance is PD");
    let sigma_e_inv = sigma_e.try_inverse().expect("noise covariance is PD");
    let precision = &sigma0_inv + h.transpose() * &sigma_e_inv * &h;
    let posterior_cov = precision.try_inverse().expect("posterior precision is PD");
    let posterior_mean = &posterior_cov * (&sigma0_inv * &mu0 + h.transpose() * &sigma_e_inv * &datum);

    GaussianSpec {
        belief,
        datum,
        posterior_mean,
        posterior_cov,
    }
}

/// The second-order content of X ~ Gamma(a, b), D | X ~ Poisson(X):
/// E[X] = E[D] = a/b, var[X] = cov[X,D] = a/b^2, var[D] = a/b^2 + a/b.
/// The exact posterior expectation is (a + d) / (b + 1).
pub fn poisson_gamma_spec(a: f64, b: f64) -> BeliefStructure {
    let mean = a / b;
    let var = a / (b * b);
    BeliefStructure::new(
        DVector::from_element(1, mean),
        DVector::from_element(1, mean),
        DMatrix::from_element(1, 1, var),
        DMatrix::from_element(1, 1, var + mean),
        DMatrix::from_element(1, 1, var),
    )
    .expect("conjugate moments are coherent")
}

/// A random projection instance with a positive-definite metric and a
/// polyhedron guaranteed non-empty through a known interior point.
pub struct QpInstance {
    pub e: DVector<f64>,
    pub v: DMatrix<f64>,
    pub c: ConstraintSet,
    pub interior: DVector<f64>,
}

pub fn random_qp(stream: &mut GaussianStream, n: usize, k: usize) -> QpInstance {
    let v = random_psd(stream, n) + DMatrix::identity(n, n) * 0.3;
    let interior = DVector::from_fn(n, |_, _| 0.5 * stream.next_normal());
    let mut a = DMatrix::zeros(k, n);
    let mut b = DVector::zeros(k);
    let mut labels = Vec::with_capacity(k);
    for i in 0..k {
        loop {
            let row = DVector::from_fn(n, |_, _| stream.next_normal());
            let norm = row.norm();
            if norm > 0.3 {
                for j in 0..n {
                    a[(i, j)] = row[j] / norm;
                }
                break;
            }
        }
        let slack = 0.1 + stream.next_normal().abs();
        b[i] = a.row(i).transpose().dot(&interior) - slack;
        labels.push(format!("row[{i}]"));
    }
    let c = ConstraintSet::new(a, b, labels).expect("random rows are nonzero");
    let e = &interior + DVector::from_fn(n, |_, _| 2.0 * stream.next_normal());
    QpInstance { e, v, c, interior }
}

/// Objective (e - q)' v^{-1} (e - q) via direct inversion.
pub fn qp_objective(e: &DVector<f64>, v_inv: &DMatrix<f64>, q: &DVector<f64>) -> f64 {
    let d = e - q;
    (v_inv * &d).dot(&d)
}

/// Exact oracle for polyhedral QP: enumerate every active subset, solve the
/// equality-constrained KKT system, keep the feasible minimum.
pub fn enumerate_oracle(
    e: &DVector<f64>,
    v: &DMatrix<f64>,
    c: &ConstraintSet,
    feas_tol: f64,
) -> Option<(DVector<f64>, f64)> {
    let n = e.len();
    let k = c.len();
    let v_inv = v.clone().try_inverse()?;
    let mut best: Option<(DVector<f64>, f64)> = None;

    for mask in 0u32..(1u32 << k) {
        let rows: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let s = rows.len();
        let mut kkt = DMatrix::zeros(n + s, n + s);
        let mut rhs = DVector::zeros(n + s);
        let two_vinv = v_inv.scale(2.0);
        kkt.view_mut((0, 0), (n, n)).copy_from(&two_vinv);
        for (r, &row) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = c.a()[(row, j)];
                kkt[(j, n + r)] = c.a()[(row, j)];
            }
            rhs[n + r] = c.b()[row];
        }
        let top = two_vinv * e;
        for j in 0..n {
            rhs[j] = top[j];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let q = sol.rows(0, n).into_owned();
        if q.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let slack = c.a() * &q - c.b();
        if slack.iter().any(|&sv| sv < -feas_tol) {
            continue;
        }
        let obj = qp_objective(e, &v_inv, &q);
        if best.as_ref().is_none_or(|(_, bo)| obj < *bo) {
            best = Some((q, obj));
        }
    }
    best
}

/// Derivative-free coarse-to-fine grid search: pattern search over a full
/// 7^n stencil around the incumbent, re-sweeping at each spacing until no
/// grid point improves, then halving the spacing down to `final_step`.
pub fn grid_refine_oracle(
    e: &DVector<f64>,
    v: &DMatrix<f64>,
    c: &ConstraintSet,
    start: &DVector<f64>,
    final_step: f64,
) -> DVector<f64> {
    let n = e.len();
    let v_inv = v.clone().try_inverse().expect("metric is PD");
    let mut best = start.clone();
    let mut best_obj = qp_objective(e, &v_inv, &best);
    let mut step = (1.0_f64.max(2.0 * (e - start).amax())) / 3.0;

    let offsets = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
    while step > final_step / 2.0 {
        loop {
            let centre = best.clone();
            let mut improved = false;
            let consider = |q: DVector<f64>, best: &mut DVector<f64>, best_obj: &mut f64| {
                let slack = c.a() * &q - c.b();
                if slack.iter().all(|&sv| sv >= -1e-12) {
                    let obj = qp_objective(e, &v_inv, &q);
                    if obj < *best_obj - 1e-15 {
                        *best_obj = obj;
                        *best = q;
                        return true;
                    }
                }
                false
            };

            let mut idx = vec![0usize; n];
            'grid: loop {
                let q = DVector::from_fn(n, |i, _| centre[i] + offsets[idx[i]] * step);
                improved |= consider(q, &mut best, &mut best_obj);
                let mut dim = 0;
                loop {
                    idx[dim] += 1;
                    if idx[dim] < offsets.len() {
                        break;
                    }
                    idx[dim] = 0;
                    dim += 1;
                    if dim == n {
                        break 'grid;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step *= 0.5;
    }
    best
}

pub fn relative_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

pub fn relative_gap_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}
