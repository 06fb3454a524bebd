/// Numerical tolerances shared across validation and factorisation.
///
/// All three are relative: `sym_tol` to the largest absolute entry of the
/// matrix, `psd_tol` and `rank_rtol` to the largest eigenvalue. This keeps
/// every check invariant under rescaling of the belief structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed relative asymmetry before a matrix is rejected.
    pub sym_tol: f64,
    /// Allowed relative magnitude of a negative eigenvalue.
    pub psd_tol: f64,
    /// Eigenvalues below `rank_rtol * lambda_max` count as zero.
    pub rank_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sym_tol: 1e-10,
            psd_tol: 1e-8,
            rank_rtol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn with_rank_rtol(mut self, rtol: f64) -> Self {
        self.rank_rtol = rtol;
        self
    }
}
