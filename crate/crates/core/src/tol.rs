//! Numerical tolerances used by validation and the solvers.
//!
//! Every threshold lives here so the contracts they enforce are auditable in
//! one place.

/// Entrywise tolerance for Hermitian symmetry of a fading covariance.
pub const HERMITIAN_ABS_TOL: f64 = 1e-12;

/// Relative tolerance on negative eigenvalues of a nominally PSD matrix:
/// `lambda_min >= -PSD_REL_TOL * lambda_max` is accepted.
pub const PSD_REL_TOL: f64 = 1e-10;

/// Absolute tolerance on trace budgets (`tr(S) <= gamma + TRACE_TOL`).
pub const TRACE_TOL: f64 = 1e-9;

/// Probabilities must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Singular values below `PINV_REL_TOL * sigma_max` are treated as zero in
/// pseudo-inverses and numerical ranks.
pub const PINV_REL_TOL: f64 = 1e-10;

/// Eigenvalues of an input covariance below `SUPPORT_REL_TOL * gamma` are
/// treated as unsupported directions in Kuhn-Tucker checks.
pub const SUPPORT_REL_TOL: f64 = 1e-8;

/// First relative diagonal jitter tried when a Cholesky factorization of a
/// singular-but-PSD covariance fails.
pub const JITTER_FIRST_REL: f64 = 1e-12;

/// Largest relative jitter tried before falling back to eigendecomposition
/// with negative-eigenvalue clipping.
pub const JITTER_LAST_REL: f64 = 1e-8;

/// Atoms of a discrete measure with probability below this are pruned and
/// the measure renormalized during Blahut-Arimoto iterations.
pub const ATOM_PRUNE_TOL: f64 = 1e-9;
