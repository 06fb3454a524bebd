//! Metric projection of a point onto a polyhedron A q >= b under the
//! inverse of a PSD matrix v: minimise (e - q)' v^+ (e - q) over the
//! constraint set.
//!
//! The problem is whitened through the eigen square root L = Q sqrt(lambda)
//! of v, where it becomes a least-distance problem `min ||u||^2 subject to
//! G u >= h` solved by a dual active-set method (Goldfarb-Idnani): start at
//! the unconstrained optimum, repeatedly add the lowest-index most-violated
//! constraint, stepping in primal and dual until it becomes active,
//! dropping blocking constraints along the way. Exact at termination for
//! positive-definite metrics; no phase-1 is needed because u = 0 is always
//! dual feasible.
//!
//! Rank-deficient v: null-space directions carry infinite penalty, so the
//! solution is pinned to e along them. Constraint rows that live entirely
//! in the null space are dropped when the pinned point satisfies them and
//! reported as `PinnedInfeasible` otherwise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::{max_abs_vec, EigenFactorisation};
use crate::tol::Tolerances;

/// Solver options. `max_iters` defaults to 100 * k active-set changes.
#[derive(Debug, Clone, Copy)]
pub struct ProjectOpts {
    /// Absolute feasibility tolerance on A q - b.
    pub feas_tol: f64,
    /// KKT certificate tolerance for declaring success.
    pub kkt_tol: f64,
    /// Cap on active-set changes; None means 100 * k.
    pub max_iters: Option<usize>,
    /// Rank tolerance for the whitening factorisation.
    pub rank_rtol: f64,
    /// Optional regularisation: add `jitter * lambda_max` to the diagonal
    /// of v before factorising, for callers who prefer a full-rank metric
    /// over pinning semantics. Off by default.
    pub jitter: Option<f64>,
}

impl Default for ProjectOpts {
    fn default() -> Self {
        ProjectOpts {
            feas_tol: 1e-9,
            kkt_tol: 1e-8,
            max_iters: None,
            rank_rtol: 1e-10,
            jitter: None,
        }
    }
}

/// A certified solution of the projection problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// The minimiser.
    pub q_star: Vec<f64>,
    /// Rows tight at the solution, ascending.
    pub active_set: Vec<usize>,
    /// KKT multipliers, length k, zero off the active set.
    pub multipliers: Vec<f64>,
    /// Max of the scaled stationarity / primal / dual / slackness residuals.
    pub kkt_residual: f64,
    /// Active-set changes performed.
    pub iterations: usize,
}

impl ProjectionResult {
    pub fn q_star_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.q_star.clone())
    }

    pub fn multiplier_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.multipliers.clone())
    }
}

/// Incrementally maintained active set: normals N (as columns), the upper
/// Cholesky factor R of N'N, and the multipliers.
struct ActiveSet {
    rows: Vec<usize>,
    normals: Vec<DVector<f64>>,
    mu: Vec<f64>,
    r: DMatrix<f64>,
}

impl ActiveSet {
    fn new() -> Self {
        ActiveSet {
            rows: Vec::new(),
            normals: Vec::new(),
            mu: Vec::new(),
            r: DMatrix::zeros(0, 0),
        }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn nt_dot(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.len(), |i, _| self.normals[i].dot(v))
    }

    fn n_dot(&self, y: &DVector<f64>) -> DVector<f64> {
        let dim = self.normals.first().map_or(0, DVector::len);
        let mut out = DVector::zeros(dim);
        for (col, &yi) in self.normals.iter().zip(y.iter()) {
            out.axpy(yi, col, 1.0);
        }
        out
    }

    /// Solve R' z = v (forward substitution; R is upper triangular).
    fn solve_rt(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.len();
        let mut z = DVector::zeros(m);
        for i in 0..m {
            let mut s = v[i];
            for j in 0..i {
                s -= self.r[(j, i)] * z[j];
            }
            z[i] = s / self.r[(i, i)];
        }
        z
    }

    /// Solve R y = z (back substitution).
    fn solve_r(&self, z: &DVector<f64>) -> DVector<f64> {
        let m = self.len();
        let mut y = DVector::zeros(m);
        for i in (0..m).rev() {
            let mut s = z[i];
            for j in (i + 1)..m {
                s -= self.r[(i, j)] * y[j];
            }
            y[i] = s / self.r[(i, i)];
        }
        y
    }

    /// y = (N'N)^{-1} N' g, the dual step direction for candidate normal g.
    fn dual_direction(&self, g: &DVector<f64>) -> DVector<f64> {
        let v = self.nt_dot(g);
        let z = self.solve_rt(&v);
        self.solve_r(&z)
    }

    /// Append a constraint whose normal is independent of the current set.
    /// Returns false when the normal is numerically dependent.
    fn add(&mut self, row: usize, g: DVector<f64>, mu: f64) -> bool {
        let m = self.len();
        let gg = g.dot(&g);
        let (w, diag_sq) = if m == 0 {
            (DVector::zeros(0), gg)
        } else {
            let v = self.nt_dot(&g);
            let w = self.solve_rt(&v);
            let d = gg - w.dot(&w);
            (w, d)
        };
        if diag_sq <= 1e-14 * gg.max(f64::MIN_POSITIVE) {
            return false;
        }
        let mut r = DMatrix::zeros(m + 1, m + 1);
        r.view_mut((0, 0), (m, m)).copy_from(&self.r);
        for i in 0..m {
            r[(i, m)] = w[i];
        }
        r[(m, m)] = diag_sq.sqrt();
        self.r = r;
        self.rows.push(row);
        self.normals.push(g);
        self.mu.push(mu);
        true
    }

    /// Remove constraint at position j, restoring the triangular factor
    /// with Givens rotations.
    fn remove(&mut self, j: usize) {
        let m = self.len();
        self.rows.remove(j);
        self.normals.remove(j);
        self.mu.remove(j);
        // drop column j; columns j.. become one wider than tall below the
        // diagonal, fixed by rotations on row pairs (i, i+1)
        let mut r = self.r.clone().remove_column(j);
        for i in j..(m - 1) {
            let a = r[(i, i)];
            let b = r[(i + 1, i)];
            let hyp = (a * a + b * b).sqrt();
            if hyp == 0.0 {
                continue;
            }
            let c = a / hyp;
            let s = b / hyp;
            for col in i..(m - 1) {
                let top = r[(i, col)];
                let bot = r[(i + 1, col)];
                r[(i, col)] = c * top + s * bot;
                r[(i + 1, col)] = -s * top + c * bot;
            }
        }
        self.r = r.remove_row(m - 1);
    }
}

/// Outcome of the whitened least-distance solve.
struct WhitenedSolution {
    u: DVector<f64>,
    active: ActiveSet,
    iterations: usize,
}

/// Dual active-set solve of min ||u||^2 s.t. G u >= h. `row_map[i]` carries
/// the original row index of G's row i for error reporting.
fn least_distance(
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    labels: &[String],
    row_map: &[usize],
    feas_tol: f64,
    max_iters: usize,
) -> Result<WhitenedSolution> {
    let k = g.nrows();
    let dim = g.ncols();
    let mut u = DVector::zeros(dim);
    let mut active = ActiveSet::new();
    let mut iterations = 0usize;
    let mut in_active = vec![false; k];

    loop {
        // most violated constraint, lowest index on ties
        let slack = g * &u - h;
        let mut chosen: Option<usize> = None;
        let mut worst = -feas_tol;
        for i in 0..k {
            if in_active[i] {
                continue;
            }
            if slack[i] < worst {
                worst = slack[i];
                chosen = Some(i);
            }
        }
        let Some(p) = chosen else {
            return Ok(WhitenedSolution {
                u,
                active,
                iterations,
            });
        };

        let n_plus = g.row(p).transpose();
        let nn = n_plus.dot(&n_plus);
        let mut s_p = slack[p];
        let mut mu_p = 0.0_f64;

        // add/drop steps until constraint p becomes active
        loop {
            iterations += 1;
            if iterations > max_iters {
                return Err(Error::IterationLimit { limit: max_iters });
            }

            let (z, r_dir) = if active.len() == 0 {
                (n_plus.clone(), DVector::zeros(0))
            } else {
                let y = active.dual_direction(&n_plus);
                (&n_plus - active.n_dot(&y), y)
            };
            let ztn = z.dot(&n_plus);

            // full primal step length to make p active
            let t2 = if ztn > 1e-13 * nn {
                Some(-s_p / ztn)
            } else {
                None
            };
            // partial dual step length before a multiplier hits zero
            let mut t1: Option<(f64, usize)> = None;
            for j in 0..active.len() {
                if r_dir[j] > 1e-13 {
                    let step = active.mu[j] / r_dir[j];
                    if t1.is_none_or(|(best, _)| step < best) {
                        t1 = Some((step, j));
                    }
                }
            }

            let take_full = match (t2, t1) {
                (None, None) => {
                    // no primal direction and no droppable constraint:
                    // the dual is unbounded, the polyhedron empty
                    let row = row_map[p];
                    return Err(Error::Infeasible {
                        row,
                        label: labels[row].clone(),
                    });
                }
                (Some(_), None) => true,
                (Some(full), Some((partial, _))) => full <= partial,
                (None, Some(_)) => false,
            };

            if take_full {
                let full = t2.expect("take_full requires a primal direction");
                u.axpy(full, &z, 1.0);
                for j in 0..active.len() {
                    active.mu[j] -= full * r_dir[j];
                }
                mu_p += full;
                if !active.add(p, n_plus.clone(), mu_p) {
                    return Err(Error::KktNotCertified {
                        residual: f64::NAN,
                        tol: feas_tol,
                    });
                }
                in_active[p] = true;
                break;
            } else {
                let (t, drop_idx) = t1.expect("partial step requires a blocker");
                if t2.is_some() {
                    // primal moves part of the way before the blocking
                    // multiplier reaches zero
                    u.axpy(t, &z, 1.0);
                    s_p = n_plus.dot(&u) - h[p];
                }
                for j in 0..active.len() {
                    active.mu[j] -= t * r_dir[j];
                }
                mu_p += t;
                in_active[active.rows[drop_idx]] = false;
                active.remove(drop_idx);
            }
        }
    }
}

/// Residuals of the KKT system for min (e-q)' v^+ (e-q) s.t. A q >= b:
/// stationarity ||2 v^+ (q - e) - A' mu||_inf, primal feasibility
/// max(0, max(b - A q)), dual feasibility max(0, -min mu) and complementary
/// slackness max |mu_i (A_i q - b_i)|, each scaled by the magnitude of the
/// quantities entering it. Returns the largest.
pub fn kkt_residual(
    e: &DVector<f64>,
    v: &DMatrix<f64>,
    c: &ConstraintSet,
    q: &DVector<f64>,
    mu: &DVector<f64>,
    rtol: f64,
) -> Result<f64> {
    let factor = crate::linalg::eigen_factorise(v, rtol)?;
    kkt_residual_from_factor(e, &factor, c, q, mu)
}

pub(crate) fn kkt_residual_from_factor(
    e: &DVector<f64>,
    factor: &EigenFactorisation,
    c: &ConstraintSet,
    q: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<f64> {
    if q.len() != c.dim() || e.len() != c.dim() {
        return Err(Error::DimensionMismatch {
            left: "q",
            left_dim: q.len(),
            right: "constraint columns",
            right_dim: c.dim(),
        });
    }
    if mu.len() != c.len() {
        return Err(Error::DimensionMismatch {
            left: "mu",
            left_dim: mu.len(),
            right: "constraint rows",
            right_dim: c.len(),
        });
    }

    // gradient 2 v^+ (q - e) through the factorisation
    let diff = q - e;
    let mut grad = DVector::zeros(q.len());
    for i in 0..factor.rank {
        let qi = factor.q.column(i);
        let coef = 2.0 * qi.dot(&diff) / factor.lambda[i];
        grad.axpy(coef, &qi, 1.0);
    }
    let at_mu = c.a().transpose() * mu;
    let stat_scale = max_abs_vec(&grad).max(max_abs_vec(&at_mu)).max(1.0);
    let stationarity = max_abs_vec(&(&grad - &at_mu)) / stat_scale;

    let aq = c.a() * q;
    let prim_scale = max_abs_vec(&aq).max(max_abs_vec(c.b())).max(1.0);
    let mut primal = 0.0_f64;
    let mut slack = 0.0_f64;
    for i in 0..c.len() {
        let s = aq[i] - c.b()[i];
        primal = primal.max(-s);
        slack = slack.max((mu[i] * s).abs());
    }
    primal = primal.max(0.0) / prim_scale;

    let mu_scale = max_abs_vec(mu).max(1.0);
    let dual = mu.iter().fold(0.0_f64, |acc, &m| acc.max(-m)) / mu_scale;
    let slack = slack / (mu_scale * prim_scale);

    Ok(stationarity.max(primal).max(dual).max(slack))
}

/// Project through a precomputed whitening factorisation of the metric.
/// Produces the identical minimiser to [`project`].
pub fn whitened_project(
    e: &DVector<f64>,
    factor: &EigenFactorisation,
    c: &ConstraintSet,
    opts: &ProjectOpts,
) -> Result<ProjectionResult> {
    let n = e.len();
    if factor.dim() != n {
        return Err(Error::DimensionMismatch {
            left: "factor",
            left_dim: factor.dim(),
            right: "e",
            right_dim: n,
        });
    }
    if c.dim() != n {
        return Err(Error::DimensionMismatch {
            left: "constraint columns",
            left_dim: c.dim(),
            right: "e",
            right_dim: n,
        });
    }
    let k = c.len();

    // already feasible: the projection is the identity
    let feas = c.satisfies(e, opts.feas_tol)?;
    if feas.satisfied {
        return Ok(ProjectionResult {
            q_star: e.iter().copied().collect(),
            active_set: Vec::new(),
            multipliers: vec![0.0; k],
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    let l = factor.sqrt_factor(); // n x rank
    let rank = factor.rank;
    let g_full = c.a() * &l; // k x rank
    let h_full = c.b() - c.a() * e;

    // rows whose transformed normal vanishes constrain only pinned
    // directions: vacuous when satisfied at e, fatal otherwise
    let sqrt_lam_max = factor.lambda.get(0).copied().unwrap_or(0.0).sqrt();
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    for i in 0..k {
        let row_scale = c.a().row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let g_inf = g_full.row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if g_inf <= 1e-12 * (row_scale * sqrt_lam_max).max(1e-300) {
            if h_full[i] > opts.feas_tol {
                return Err(Error::PinnedInfeasible {
                    row: i,
                    label: c.labels()[i].clone(),
                });
            }
        } else {
            kept.push(i);
        }
    }

    let mut solution = if kept.is_empty() {
        WhitenedSolution {
            u: DVector::zeros(rank),
            active: ActiveSet::new(),
            iterations: 0,
        }
    } else {
        let g = DMatrix::from_fn(kept.len(), rank, |i, j| g_full[(kept[i], j)]);
        let h = DVector::from_fn(kept.len(), |i, _| h_full[kept[i]]);
        let max_iters = opts.max_iters.unwrap_or(100 * k.max(1));
        least_distance(&g, &h, c.labels(), &kept, opts.feas_tol, max_iters)?
    };
    // the solver works with the 1/2 ||u||^2 scaling; the reported
    // multipliers belong to the unhalved objective (e-q)' v^+ (e-q)
    for m in solution.active.mu.iter_mut() {
        *m *= 2.0;
    }

    let q_star = e + &l * &solution.u;
    let mut multipliers = vec![0.0; k];
    let mut active_set: Vec<usize> = Vec::with_capacity(solution.active.len());
    for (pos, &local_row) in solution.active.rows.iter().enumerate() {
        let orig = kept[local_row];
        multipliers[orig] = solution.active.mu[pos];
        active_set.push(orig);
    }
    active_set.sort_unstable();

    let mu_vec = DVector::from_vec(multipliers.clone());
    let kkt = if rank == n {
        kkt_residual_from_factor(e, factor, c, &q_star, &mu_vec)?
    } else {
        // pinned case: certify the reduced problem, whose KKT system is
        // exact for the limiting objective
        whitened_kkt(&solution, &g_full, &h_full, &kept)
    };
    if kkt > opts.kkt_tol {
        return Err(Error::KktNotCertified {
            residual: kkt,
            tol: opts.kkt_tol,
        });
    }

    Ok(ProjectionResult {
        q_star: q_star.iter().copied().collect(),
        active_set,
        multipliers,
        kkt_residual: kkt,
        iterations: solution.iterations,
    })
}

fn whitened_kkt(
    sol: &WhitenedSolution,
    g_full: &DMatrix<f64>,
    h_full: &DVector<f64>,
    kept: &[usize],
) -> f64 {
    let mut gt_mu = DVector::zeros(sol.u.len());
    for (pos, &local) in sol.active.rows.iter().enumerate() {
        let row = g_full.row(kept[local]).transpose();
        gt_mu.axpy(sol.active.mu[pos], &row, 1.0);
    }
    let grad = 2.0 * &sol.u;
    let stat_scale = max_abs_vec(&grad).max(max_abs_vec(&gt_mu)).max(1.0);
    let stationarity = max_abs_vec(&(&grad - &gt_mu)) / stat_scale;

    let mut primal = 0.0_f64;
    let mut slack = 0.0_f64;
    let mut scale = 1.0_f64;
    for (pos, &local) in sol.active.rows.iter().enumerate() {
        let i = kept[local];
        let s = g_full.row(i).transpose().dot(&sol.u) - h_full[i];
        slack = slack.max((sol.active.mu[pos] * s).abs());
        scale = scale.max(s.abs()).max(h_full[i].abs());
    }
    for &i in kept {
        let s = g_full.row(i).transpose().dot(&sol.u) - h_full[i];
        primal = primal.max(-s);
        scale = scale.max(h_full[i].abs());
    }
    let dual = sol
        .active
        .mu
        .iter()
        .fold(0.0_f64, |acc, &m| acc.max(-m));
    stationarity
        .max(primal.max(0.0) / scale)
        .max(dual)
        .max(slack / scale)
}

/// Project e onto the polyhedron under the v-inverse norm.
pub fn project(
    e: &DVector<f64>,
    v: &DMatrix<f64>,
    c: &ConstraintSet,
    opts: &ProjectOpts,
) -> Result<ProjectionResult> {
    let tol = Tolerances::default();
    let metric = match opts.jitter {
        Some(delta) => {
            let f = crate::linalg::eigen_factorise_named(v, opts.rank_rtol, tol.sym_tol, tol.psd_tol, "v")?;
            let lam_max = f.lambda.get(0).copied().unwrap_or(0.0);
            v + DMatrix::identity(v.nrows(), v.ncols()) * (delta * lam_max)
        }
        None => v.clone(),
    };
    let factor =
        crate::linalg::eigen_factorise_named(&metric, opts.rank_rtol, tol.sym_tol, tol.psd_tol, "v")?;
    whitened_project(e, &factor, c, opts)
}
