//! Water-filling for a known channel matrix.
//!
//! With the channel fixed at `Hbar` and an average power budget `gamma`, the
//! optimal Gaussian input covariance shares the eigenbasis of `Hbar' Hbar`
//! and puts power `p_i = w - sigma2 / lambda_i` on every eigenmode whose
//! gain `lambda_i` clears the water level `w = 1/mu`; the level is set so
//! the powers sum to the budget. The solver walks the active-mode count
//! down from the numerical rank, solving the level in closed form each time,
//! and stops at the first count whose powers are all positive.
//!
//! [`kt_margin_awgn`] evaluates the Kuhn-Tucker inequality that certifies a
//! candidate covariance: the margin is zero on the support of the optimal
//! input and negative elsewhere.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, chol_logdet, eigh_desc, hermitian_part, solve_lower_in_place};
use crate::tol;
use crate::types::{InputCovariance, NoiseModel};
use crate::{C64, CMat, CVec};

/// Log2 of e; converts natural-log quantities to bits.
pub(crate) const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Result of a water-filling solve.
#[derive(Debug, Clone)]
pub struct WaterfillResult {
    /// Optimal input covariance, `tr(s) = gamma`.
    pub s: InputCovariance,
    /// Capacity `log2 det(I + Hbar S Hbar' / sigma2)` in bits per use.
    pub capacity_bits: f64,
    /// Water level `w = 1/mu` shared by all active modes.
    pub water_level: f64,
    /// Number of eigenmodes carrying positive power.
    pub active_modes: usize,
    /// Eigenvalues of `Hbar' Hbar`, descending.
    pub mode_gains: Vec<f64>,
    /// Per-mode powers in the same order.
    pub mode_powers: Vec<f64>,
}

/// Water-filling over the eigenmodes of `hbar' hbar`.
///
/// Errors on a non-positive budget and on an identically zero channel
/// matrix (capacity would be zero with a non-unique covariance).
pub fn waterfill(hbar: &CMat, noise: &NoiseModel, gamma: f64) -> Result<WaterfillResult> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Invalid(format!("power budget must be positive, got {gamma}")));
    }
    let n = hbar.ncols();
    let gram = hermitian_part(&(hbar.adjoint() * hbar));
    let (lambda, basis) = eigh_desc(&gram);
    let smax = lambda[0].max(0.0).sqrt();
    if smax == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let cutoff = tol::PINV_REL_TOL * smax;
    let rank = lambda.iter().filter(|&&l| l.max(0.0).sqrt() > cutoff).count();
    let sigma2 = noise.sigma2;

    let mut water = 0.0;
    let mut active = 0;
    for t in (1..=rank).rev() {
        let inv_sum: f64 = (0..t).map(|i| sigma2 / lambda[i]).sum();
        let w = (gamma + inv_sum) / t as f64;
        if w - sigma2 / lambda[t - 1] > 0.0 {
            water = w;
            active = t;
            break;
        }
    }
    debug_assert!(active >= 1, "at least the strongest mode is always active");

    let mut powers = vec![0.0; n];
    for (i, p) in powers.iter_mut().enumerate().take(active) {
        *p = water - sigma2 / lambda[i];
    }
    let capacity_bits: f64 =
        (0..active).map(|i| (1.0 + lambda[i] * powers[i] / sigma2).log2()).sum();

    let mut s = CMat::zeros(n, n);
    for (i, &p) in powers.iter().enumerate() {
        if p > 0.0 {
            let col = basis.column(i);
            s.gerc(C64::new(p, 0.0), &col, &col, C64::new(1.0, 0.0));
        }
    }
    Ok(WaterfillResult {
        s: InputCovariance::new(hermitian_part(&s))?,
        capacity_bits,
        water_level: water,
        active_modes: active,
        mode_gains: lambda.as_slice().to_vec(),
        mode_powers: powers,
    })
}

/// Capacity of the known channel under an arbitrary feasible covariance:
/// `log2 det(I_m + hbar s hbar' / sigma2)` in bits per use.
pub fn awgn_capacity_of(s: &InputCovariance, hbar: &CMat, noise: &NoiseModel) -> Result<f64> {
    if s.dim() != hbar.ncols() {
        return Err(Error::DimMismatch(format!(
            "covariance is {}x{} but channel has {} columns",
            s.dim(),
            s.dim(),
            hbar.ncols()
        )));
    }
    Ok(logdet_capacity_bits(hbar, s.matrix(), noise.sigma2))
}

/// `log2 det(I_m + h s h' / sigma2)` via one Cholesky; shared by the AWGN
/// and ergodic paths so degenerate reductions agree bit-exactly.
pub(crate) fn logdet_capacity_bits(h: &CMat, s: &CMat, sigma2: f64) -> f64 {
    let m = h.nrows();
    let mut a = h * s * h.adjoint();
    a.scale_mut(1.0 / sigma2);
    for i in 0..m {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    let mut l = hermitian_part(&a);
    if !cholesky_in_place(&mut l) {
        // Eigenvalues are >= 1 in exact arithmetic; any failure is roundoff
        // on a near-identity matrix, where the log-determinant is 0.
        return 0.0;
    }
    chol_logdet(&l) * LOG2_E
}

/// Kuhn-Tucker margin of the known-channel optimality condition at probe
/// input `x` for a candidate covariance `s` and multiplier `gamma_mult`
/// (bits convention; recover it from the water level as `log2(e) / w`).
///
/// With `K = hbar s hbar' + sigma2 I` the margin is
/// `log2(e) [sigma2 tr(K^{-1}) - m + x' hbar' K^{-1} hbar x]
///  - gamma_mult (||x||^2 - tr(s))`,
/// the relative-entropy inequality with its constant part pinned so the
/// margin vanishes identically on the support of the optimal input (the
/// range of `s`) and is strictly negative elsewhere. Units are bits.
pub fn kt_margin_awgn(
    x: &CVec,
    s: &InputCovariance,
    hbar: &CMat,
    noise: &NoiseModel,
    gamma_mult: f64,
) -> Result<f64> {
    if x.len() != hbar.ncols() || s.dim() != hbar.ncols() {
        return Err(Error::DimMismatch("probe/covariance/channel dimensions disagree".into()));
    }
    let m = hbar.nrows();
    let sigma2 = noise.sigma2;
    let mut k = hbar * s.matrix() * hbar.adjoint();
    for i in 0..m {
        k[(i, i)] += C64::new(sigma2, 0.0);
    }
    let mut l = hermitian_part(&k);
    if !cholesky_in_place(&mut l) {
        return Err(Error::Numerical("output covariance must be positive definite".into()));
    }
    // tr(K^{-1}) = sum of squared norms of the columns of L^{-1}.
    let mut inv_cols = CMat::identity(m, m);
    solve_lower_in_place(&l, &mut inv_cols);
    let mut tr_kinv = 0.0;
    for j in 0..m {
        tr_kinv += inv_cols.column(j).norm_squared();
    }
    // x' hbar' K^{-1} hbar x = || L^{-1} hbar x ||^2.
    let mut hx = CMat::from_column_slice(m, 1, (hbar * x).as_slice());
    solve_lower_in_place(&l, &mut hx);
    let quad = hx.norm_squared();

    Ok(LOG2_E * (sigma2 * tr_kinv - m as f64 + quad)
        - gamma_mult * (x.norm_squared() - s.trace()))
}

/// Multiplier in the bits convention from a water level.
pub fn gamma_mult_from_water_level(water_level: f64) -> f64 {
    LOG2_E / water_level
}
