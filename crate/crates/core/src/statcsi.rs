//! Ergodic capacity and the optimal Gaussian input covariance under full
//! receiver CSI.
//!
//! The capacity with full CSI at the receiver and a trace budget is achieved
//! by a zero-mean Gaussian input whose covariance `S` satisfies, for some
//! multiplier `mu > 0` fixed by `tr(S) = gamma`,
//!
//! `E[ x' v' (v S v' + sigma2 I)^{-1} v x ] <= mu ||x||^2` for all `x`,
//!
//! with equality exactly on the support of the input. Equivalently, with
//! `M = E[ v' (v S v' + sigma2 I)^{-1} v ]`, all supported directions share
//! `u' M u = mu` and `lambda_max(M) <= mu`. The value is
//! `C = E[ log2 det(I + v S v' / sigma2) ]`.
//!
//! There is no closed form for `S` in general, so [`optimize_covariance`]
//! runs projected gradient ascent over the PSD trace-`gamma` set on a fixed
//! Monte-Carlo sample of fading draws (common random numbers make the
//! objective deterministic), and certifies the answer with the matrix form
//! of the optimality condition on a held-out sample ([`kt_check_fullcsi`]).

use crate::channel::FadingLaw;
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_in_place, chol_logdet, eigh_desc, hermitian_part, project_psd_trace,
    solve_lower_in_place,
};
use crate::rng::sub_seed;
use crate::tol;
use crate::types::{CapacityEstimate, InputCovariance, NoiseModel};
use crate::waterfill::{logdet_capacity_bits, LOG2_E};
use crate::{C64, CMat};

/// Options for [`optimize_covariance`].
#[derive(Debug, Clone)]
pub struct OptimizeOpts {
    /// Initial step as a fraction of the budget; halved on backtracking.
    pub step: f64,
    /// Maximum ascent iterations.
    pub iters: usize,
    /// Monte-Carlo fading draws shared by every iteration.
    pub mc_samples: usize,
    /// Base seed; training, capacity, and certificate streams are derived
    /// from it.
    pub seed: u64,
    /// Convergence threshold on the training-sample optimality gap (same
    /// units as `u' M u`).
    pub tol: f64,
}

impl Default for OptimizeOpts {
    fn default() -> Self {
        Self { step: 0.5, iters: 200, mc_samples: 20_000, seed: 0, tol: 1e-3 }
    }
}

/// Converged (or best-effort) covariance with its certificate.
#[derive(Debug, Clone)]
pub struct StatCsiSolution {
    pub s: InputCovariance,
    /// Ergodic capacity of `s` on a fresh sample stream.
    pub capacity: CapacityEstimate,
    /// Held-out optimality gap `max(0, lambda_max(M) - min_support u'Mu)`.
    pub kt_gap: f64,
    /// Held-out multiplier estimate (largest `u'Mu` over the support).
    pub kt_mu: f64,
    /// Monte-Carlo standard error of the certificate matrix.
    pub kt_stderr: f64,
    pub iterations: usize,
    pub mc_samples_per_iter: usize,
    /// False when the iteration cap was hit before the training gap closed;
    /// the best iterate is still returned.
    pub converged: bool,
    /// Accepted objective values in bits (nondecreasing by construction).
    pub objective_trace_bits: Vec<f64>,
}

/// Kuhn-Tucker certificate for a candidate covariance.
#[derive(Debug, Clone, Copy)]
pub struct KtCheck {
    /// Largest `u' M u` over supported eigenvectors of `s`.
    pub mu: f64,
    /// `max(0, lambda_max(M) - min_support u' M u)`; zero at the optimum.
    pub gap: f64,
    /// Frobenius aggregate of the entrywise Monte-Carlo standard errors of
    /// `M`, for calibrating how small a gap can be resolved.
    pub stderr: f64,
}

/// Monte-Carlo ergodic capacity `E[log2 det(I + v s v'/sigma2)]` in bits per
/// use with a CLT confidence half-width; deterministic given the seed.
///
/// Degenerate laws (zero fading covariance) produce identical draws, so the
/// estimate equals the known-channel capacity exactly with zero half-width.
pub fn ergodic_capacity(
    law: &FadingLaw,
    s: &InputCovariance,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    if n_samples < 2 {
        return Err(Error::Invalid("need at least 2 samples for a CI".into()));
    }
    if s.dim() != law.n_tx() {
        return Err(Error::DimMismatch("covariance does not match transmit antennas".into()));
    }
    let mut sampler = law.sampler(seed)?;
    let values: Vec<f64> = (0..n_samples)
        .map(|_| logdet_capacity_bits(&sampler.next_matrix(), s.matrix(), noise.sigma2))
        .collect();
    Ok(CapacityEstimate::from_samples(&values))
}

/// Scratch buffers for the per-sample kernel: with `B = I + v S v'/sigma2`
/// and `B = L L'`, the objective term is `ln det B` and the gradient term is
/// `v'(v S v' + sigma2 I)^{-1} v = (L^{-1} v)'(L^{-1} v) / sigma2`.
struct SampleKernel {
    vs: CMat,
    b: CMat,
    x: CMat,
    x_adj: CMat,
    term: CMat,
}

impl SampleKernel {
    fn new(m: usize, n: usize) -> Self {
        Self {
            vs: CMat::zeros(m, n),
            b: CMat::zeros(m, m),
            x: CMat::zeros(m, n),
            x_adj: CMat::zeros(n, m),
            term: CMat::zeros(n, n),
        }
    }

    /// Returns `ln det B` and leaves the gradient term in `self.term`.
    fn eval(&mut self, v: &CMat, s: &CMat, sigma2: f64) -> f64 {
        let one = C64::new(1.0, 0.0);
        self.vs.gemm(one, v, s, C64::new(0.0, 0.0));
        // b = vs * v' / sigma2 + I, built without allocating the adjoint.
        let (m, n) = v.shape();
        for i in 0..m {
            for j in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.vs[(i, k)] * v[(j, k)].conj();
                }
                self.b[(i, j)] = acc / sigma2;
            }
        }
        for i in 0..m {
            self.b[(i, i)] += one;
        }
        if !cholesky_in_place(&mut self.b) {
            // B >= I in exact arithmetic; treat roundoff as the identity.
            self.term.fill(C64::new(0.0, 0.0));
            return 0.0;
        }
        let logdet = chol_logdet(&self.b);
        self.x.copy_from(v);
        solve_lower_in_place(&self.b, &mut self.x);
        for i in 0..m {
            for j in 0..n {
                self.x_adj[(j, i)] = self.x[(i, j)].conj();
            }
        }
        self.term.gemm(C64::new(1.0 / sigma2, 0.0), &self.x_adj, &self.x, C64::new(0.0, 0.0));
        logdet
    }
}

/// Mean objective (nats) and gradient matrix over a fixed sample set.
fn objective_and_gradient(
    samples: &[CMat],
    s: &CMat,
    sigma2: f64,
    kernel: &mut SampleKernel,
) -> (f64, CMat) {
    let n = s.nrows();
    let mut grad = CMat::zeros(n, n);
    let mut obj = 0.0;
    for v in samples {
        obj += kernel.eval(v, s, sigma2);
        grad += &kernel.term;
    }
    let inv = 1.0 / samples.len() as f64;
    grad.scale_mut(inv);
    (obj * inv, hermitian_part(&grad))
}

/// Support-aware optimality gap of a certificate matrix `m_mat` for
/// covariance `s`: supported directions (eigenvalues above
/// `SUPPORT_REL_TOL * tr(s)`) should share `u' M u`, and no direction may
/// exceed that common value. Returns `(mu_max_support, gap)`.
fn support_gap(s: &CMat, m_mat: &CMat) -> (f64, f64) {
    let (svals, svecs) = eigh_desc(s);
    let trace: f64 = svals.iter().sum();
    let cut = tol::SUPPORT_REL_TOL * trace.max(f64::MIN_POSITIVE);
    let mut mu_max = f64::NEG_INFINITY;
    let mut mu_min = f64::INFINITY;
    for i in 0..svals.len() {
        if svals[i] > cut {
            let u = svecs.column(i);
            let q = (u.adjoint() * m_mat * u)[(0, 0)].re;
            mu_max = mu_max.max(q);
            mu_min = mu_min.min(q);
        }
    }
    let (mvals, _) = eigh_desc(m_mat);
    let gap = (mvals[0] - mu_min).max(0.0);
    (mu_max, gap)
}

/// Projected gradient ascent for the capacity-achieving covariance under a
/// trace budget, on common random numbers.
///
/// The fixed fading sample makes the objective deterministic, backtracking
/// (step halving on any decrease) makes accepted objective values
/// nondecreasing, and the eigenvalue-simplex projection keeps every iterate
/// PSD with trace exactly `gamma`. Terminates when the training-sample
/// optimality gap drops below `opts.tol`; the reported certificate comes
/// from a held-out stream. Non-convergence is flagged, never silent.
pub fn optimize_covariance(
    law: &FadingLaw,
    noise: &NoiseModel,
    gamma: f64,
    opts: &OptimizeOpts,
) -> Result<StatCsiSolution> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Invalid(format!("power budget must be positive, got {gamma}")));
    }
    if opts.mc_samples < 2 || opts.iters == 0 {
        return Err(Error::Invalid("need mc_samples >= 2 and iters >= 1".into()));
    }
    let n = law.n_tx();
    let sigma2 = noise.sigma2;

    let mut sampler = law.sampler(sub_seed(opts.seed, "statcsi-train", 0))?;
    let samples: Vec<CMat> = (0..opts.mc_samples).map(|_| sampler.next_matrix()).collect();
    let mut kernel = SampleKernel::new(law.n_rx(), n);

    let mut s = CMat::identity(n, n).scale(gamma / n as f64);
    let (mut obj, mut grad) = objective_and_gradient(&samples, &s, sigma2, &mut kernel);
    let mut trace_bits = vec![obj * LOG2_E];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.iters {
        iterations += 1;
        let (_, gap) = support_gap(&s, &grad);
        if gap <= opts.tol {
            converged = true;
            break;
        }
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let mut step = opts.step * gamma / gnorm;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = project_psd_trace(&(&s + grad.scale(step)), gamma);
            let (cand_obj, cand_grad) =
                objective_and_gradient(&samples, &candidate, sigma2, &mut kernel);
            if cand_obj > obj {
                s = candidate;
                obj = cand_obj;
                grad = cand_grad;
                trace_bits.push(obj * LOG2_E);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent direction at this resolution: stationary point.
            break;
        }
    }
    if !converged {
        let (_, gap) = support_gap(&s, &grad);
        converged = gap <= opts.tol;
    }

    let s = InputCovariance::new(s)?;
    let capacity = ergodic_capacity(
        law,
        &s,
        noise,
        opts.mc_samples,
        sub_seed(opts.seed, "statcsi-capacity", 0),
    )?;
    let kt =
        kt_check_fullcsi(&s, law, noise, opts.mc_samples, sub_seed(opts.seed, "statcsi-kt", 0))?;

    Ok(StatCsiSolution {
        s,
        capacity,
        kt_gap: kt.gap,
        kt_mu: kt.mu,
        kt_stderr: kt.stderr,
        iterations,
        mc_samples_per_iter: opts.mc_samples,
        converged,
        objective_trace_bits: trace_bits,
    })
}

/// Monte-Carlo Kuhn-Tucker certificate: estimates
/// `M = E[v'(v s v' + sigma2 I)^{-1} v]`, reads the multiplier off the
/// supported eigenvectors of `s`, and reports how far the largest direction
/// of `M` exceeds the weakest supported one.
pub fn kt_check_fullcsi(
    s: &InputCovariance,
    law: &FadingLaw,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<KtCheck> {
    if s.dim() != law.n_tx() {
        return Err(Error::DimMismatch("covariance does not match transmit antennas".into()));
    }
    if n_samples < 2 {
        return Err(Error::Invalid("need at least 2 samples".into()));
    }
    let n = s.dim();
    let sigma2 = noise.sigma2;
    let mut sampler = law.sampler(seed)?;
    let mut kernel = SampleKernel::new(law.n_rx(), n);
    let mut sum = CMat::zeros(n, n);
    let mut sq = nalgebra::DMatrix::<f64>::zeros(n, n);
    for _ in 0..n_samples {
        let v = sampler.next_matrix();
        kernel.eval(&v, s.matrix(), sigma2);
        sum += &kernel.term;
        for i in 0..n {
            for j in 0..n {
                sq[(i, j)] += kernel.term[(i, j)].norm_sqr();
            }
        }
    }
    let inv = 1.0 / n_samples as f64;
    let m_est = hermitian_part(&sum.scale(inv));
    let mut var_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mean_sq = m_est[(i, j)].norm_sqr();
            var_sum += (sq[(i, j)] * inv - mean_sq).max(0.0);
        }
    }
    let stderr = (var_sum * inv).sqrt();
    let (mu, gap) = support_gap(s.matrix(), &m_est);
    Ok(KtCheck { mu, gap, stderr })
}

/// Residual of the trace identity tying the multiplier to the budget at the
/// optimum: `log2(e) (E[tr B^{-1}] - m + mu gamma)` with
/// `B = I + v s v'/sigma2`, so `E[tr B^{-1}]` equals
/// `sigma2 E[tr (v s v' + sigma2 I)^{-1}]`. `mu` is the certificate
/// multiplier from [`kt_check_fullcsi`]. Units are bits.
///
/// Secondary certificate only: the identity reduces to
/// `mu gamma = tr(M s)`, which already holds algebraically whenever the
/// supported directions of `s` share one `u'Mu` value (any rank-one
/// candidate, for instance). It detects misallocation across a full-rank
/// support, not a wrongly chosen support; pair it with the gap from
/// [`kt_check_fullcsi`].
pub fn capacity_tradeoff_relation(
    s: &InputCovariance,
    law: &FadingLaw,
    noise: &NoiseModel,
    mu: f64,
    gamma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if s.dim() != law.n_tx() {
        return Err(Error::DimMismatch("covariance does not match transmit antennas".into()));
    }
    let m = law.n_rx();
    let sigma2 = noise.sigma2;
    let mut sampler = law.sampler(seed)?;
    let mut kernel = SampleKernel::new(m, s.dim());
    let mut tr_sum = 0.0;
    for _ in 0..n_samples {
        let v = sampler.next_matrix();
        kernel.eval(&v, s.matrix(), sigma2);
        // tr(B^{-1}) is the squared Frobenius norm of L^{-1}.
        let mut inv_cols = CMat::identity(m, m);
        solve_lower_in_place(&kernel.b, &mut inv_cols);
        tr_sum += inv_cols.norm_squared();
    }
    let mean_tr = tr_sum / n_samples as f64;
    Ok(LOG2_E * (mean_tr - m as f64 + mu * gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingLaw;
    use crate::cmat_from_real;
    use crate::linalg::random_psd_trace;
    use crate::rng::rng_from_seed;
    use crate::types::ChannelDims;
    use crate::waterfill::waterfill;
    use crate::CVec;
    use approx::assert_relative_eq;

    fn noise(s2: f64) -> NoiseModel {
        NoiseModel::new(s2).unwrap()
    }

    fn dims(n: usize, m: usize) -> ChannelDims {
        ChannelDims::new(n, m, 1).unwrap()
    }

    #[test]
    fn zero_covariance_estimates_zero_exactly() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let s = InputCovariance::new(CMat::zeros(2, 2)).unwrap();
        let est = ergodic_capacity(&law, &s, &noise(1.0), 1000, 3).unwrap();
        assert_eq!(est.bits_per_use, 0.0);
        assert_eq!(est.ci_half_width, 0.0);
    }

    #[test]
    fn point_mass_fading_matches_awgn_capacity_bit_exactly() {
        let mean = cmat_from_real(2, 2, &[1.3, 0.2, -0.4, 0.9]);
        let law = FadingLaw::new(mean.clone(), CMat::zeros(4, 4)).unwrap();
        let mut rng = rng_from_seed(5);
        let s = InputCovariance::new(random_psd_trace(2, 2.0, &mut rng)).unwrap();
        let est = ergodic_capacity(&law, &s, &noise(0.7), 5000, 11).unwrap();
        let exact = crate::waterfill::awgn_capacity_of(&s, &mean, &noise(0.7)).unwrap();
        assert_eq!(est.bits_per_use.to_bits(), exact.to_bits());
        assert_eq!(est.ci_half_width, 0.0);
    }

    #[test]
    fn siso_rayleigh_matches_quadrature_oracle() {
        // E[log2(1 + |h|^2)] for |h|^2 ~ Exp(1) by quadrature: 0.8603473823.
        let law = FadingLaw::iid_rayleigh(&dims(1, 1));
        let s = InputCovariance::new(cmat_from_real(1, 1, &[1.0])).unwrap();
        let est = ergodic_capacity(&law, &s, &noise(1.0), 200_000, 17).unwrap();
        assert!(
            (est.bits_per_use - 0.860_347_382_3).abs() <= est.ci_half_width,
            "estimate {} +/- {} missed the oracle",
            est.bits_per_use,
            est.ci_half_width
        );
    }

    #[test]
    fn iid_rayleigh_optimum_is_isotropic() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let opts = OptimizeOpts { mc_samples: 20_000, iters: 120, tol: 4e-3, seed: 21, step: 0.5 };
        let sol = optimize_covariance(&law, &noise(1.0), 2.0, &opts).unwrap();
        let eye = CMat::identity(2, 2);
        let rel = (sol.s.matrix() - &eye).norm() / eye.norm();
        assert!(rel < 0.05, "relative deviation from identity {rel}");
        assert_relative_eq!(sol.s.trace(), 2.0, epsilon = 1e-8);
        assert!(sol.converged, "solver should converge on the isotropic case");
    }

    #[test]
    fn deterministic_fading_recovers_waterfilling() {
        let mean = cmat_from_real(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let law = FadingLaw::new(mean.clone(), CMat::zeros(4, 4)).unwrap();
        let opts = OptimizeOpts { mc_samples: 16, iters: 400, tol: 1e-7, seed: 1, step: 0.5 };
        let sol = optimize_covariance(&law, &noise(1.0), 1.0, &opts).unwrap();
        let wf = waterfill(&mean, &noise(1.0), 1.0).unwrap();
        let dev = (sol.s.matrix() - wf.s.matrix()).norm();
        assert!(dev < 1e-3, "covariance deviates from water-filling by {dev}");
    }

    #[test]
    fn fading_confined_to_one_column_concentrates_power() {
        // Only the first transmit dimension fades (vec H ordering is
        // column-major: entries 0..m belong to column 1).
        let mut cov = CMat::zeros(4, 4);
        cov[(0, 0)] = C64::new(1.0, 0.0);
        cov[(1, 1)] = C64::new(1.0, 0.0);
        let law = FadingLaw::new(CMat::zeros(2, 2), cov).unwrap();
        let gamma = 2.0;
        let opts = OptimizeOpts { mc_samples: 8000, iters: 300, tol: 1e-4, seed: 5, step: 0.5 };
        let sol = optimize_covariance(&law, &noise(1.0), gamma, &opts).unwrap();
        assert!(
            sol.s.matrix()[(0, 0)].re > 0.99 * gamma,
            "power on the fading mode is {}",
            sol.s.matrix()[(0, 0)].re
        );

        // One-dimensional scan oracle on a fixed sample set.
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=20 {
            let p = gamma * k as f64 / 20.0;
            let s = InputCovariance::new(CMat::from_diagonal(&CVec::from_column_slice(&[
                C64::new(p, 0.0),
                C64::new(gamma - p, 0.0),
            ])))
            .unwrap();
            let c = ergodic_capacity(&law, &s, &noise(1.0), 4000, 777).unwrap().bits_per_use;
            if c > best.0 {
                best = (c, p);
            }
        }
        assert_relative_eq!(best.1, gamma, epsilon = 1e-9);
    }

    #[test]
    fn accepted_objective_is_monotone() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let opts = OptimizeOpts { mc_samples: 4000, iters: 60, tol: 1e-9, seed: 9, step: 0.5 };
        let sol = optimize_covariance(&law, &noise(1.0), 2.0, &opts).unwrap();
        for w in sol.objective_trace_bits.windows(2) {
            assert!(w[1] >= w[0], "objective decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn kt_check_flags_rank_one_covariance_on_isotropic_fading() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let s_good = InputCovariance::isotropic(2, 2.0);
        let good = kt_check_fullcsi(&s_good, &law, &noise(1.0), 100_000, 33).unwrap();
        assert!(
            good.gap <= 3.0 * good.stderr,
            "isotropic gap {} exceeds 3 x stderr {}",
            good.gap,
            good.stderr
        );

        let mut bad_mat = CMat::zeros(2, 2);
        bad_mat[(0, 0)] = C64::new(2.0, 0.0);
        let s_bad = InputCovariance::new(bad_mat).unwrap();
        let bad = kt_check_fullcsi(&s_bad, &law, &noise(1.0), 100_000, 34).unwrap();
        assert!(bad.gap > 0.05, "rank-one gap should be large, got {}", bad.gap);
    }

    #[test]
    fn kt_check_reduces_to_awgn_certificate_for_point_mass() {
        let mean = cmat_from_real(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let law = FadingLaw::new(mean.clone(), CMat::zeros(4, 4)).unwrap();
        let wf = waterfill(&mean, &noise(1.0), 1.0).unwrap();
        let kt = kt_check_fullcsi(&wf.s, &law, &noise(1.0), 100, 2).unwrap();
        assert!(kt.gap <= 1e-8, "deterministic reduction gap {}", kt.gap);
        assert_relative_eq!(kt.mu, 1.0 / wf.water_level, epsilon = 1e-9);
    }

    #[test]
    fn tradeoff_residual_closed_form_scalar_case() {
        // Known channel |h|^2 = a: residual vanishes at the optimum with
        // mu = 1/(gamma + sigma2/a).
        for &(a, gamma, s2) in &[(1.0, 1.0, 1.0), (2.5, 0.7, 0.3)] {
            let h = cmat_from_real(1, 1, &[(a as f64).sqrt()]);
            let law = FadingLaw::new(h, CMat::zeros(1, 1)).unwrap();
            let s = InputCovariance::new(cmat_from_real(1, 1, &[gamma])).unwrap();
            let mu = 1.0 / (gamma + s2 / a);
            let r = capacity_tradeoff_relation(&s, &law, &noise(s2), mu, gamma, 50, 4).unwrap();
            assert!(r.abs() < 1e-12, "scalar residual {r}");
        }
    }

    #[test]
    fn tradeoff_residual_separates_optimal_from_suboptimal() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let s_opt = InputCovariance::isotropic(2, 2.0);
        let kt = kt_check_fullcsi(&s_opt, &law, &noise(1.0), 100_000, 8).unwrap();
        let r_opt =
            capacity_tradeoff_relation(&s_opt, &law, &noise(1.0), kt.mu, 2.0, 100_000, 8).unwrap();

        // A full-rank misallocation: the supported directions disagree on
        // u'Mu, so the identity picks it up (a rank-one candidate would
        // satisfy it trivially).
        let s_bad = InputCovariance::new(cmat_from_real(2, 2, &[1.5, 0.0, 0.0, 0.5])).unwrap();
        let kt_bad = kt_check_fullcsi(&s_bad, &law, &noise(1.0), 100_000, 8).unwrap();
        let r_bad =
            capacity_tradeoff_relation(&s_bad, &law, &noise(1.0), kt_bad.mu, 2.0, 100_000, 8)
                .unwrap();
        assert!(
            r_bad.abs() > 10.0 * r_opt.abs().max(1e-6),
            "suboptimal residual {r_bad} vs optimal {r_opt}"
        );
    }

    #[test]
    fn tradeoff_residual_vanishes_at_tiny_budget() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let gamma = 1e-6;
        let s = InputCovariance::isotropic(2, gamma);
        let kt = kt_check_fullcsi(&s, &law, &noise(1.0), 20_000, 12).unwrap();
        let r =
            capacity_tradeoff_relation(&s, &law, &noise(1.0), kt.mu, gamma, 20_000, 12).unwrap();
        assert!(r.abs() < 1e-4, "residual at vanishing budget {r}");
    }

    #[test]
    fn permutation_symmetry_is_inherited_by_the_solution() {
        let law = FadingLaw::iid_rayleigh(&dims(2, 2));
        let opts = OptimizeOpts { mc_samples: 20_000, iters: 120, tol: 4e-3, seed: 77, step: 0.5 };
        let sol = optimize_covariance(&law, &noise(1.0), 2.0, &opts).unwrap();
        let p = cmat_from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let swapped = &p * sol.s.matrix() * p.adjoint();
        let dev = (sol.s.matrix() - swapped).norm();
        assert!(dev < 0.08, "permutation symmetry violated by {dev}");
    }

    #[test]
    fn optimum_dominates_isotropic_within_ci() {
        let mut rng = rng_from_seed(91);
        let d = dims(2, 2);
        let law = FadingLaw::random(&d, &mut rng);
        let gamma = 1.5;
        let opts = OptimizeOpts { mc_samples: 10_000, iters: 150, tol: 2e-3, seed: 13, step: 0.5 };
        let sol = optimize_covariance(&law, &noise(1.0), gamma, &opts).unwrap();
        let iso = InputCovariance::isotropic(2, gamma);
        let c_opt = ergodic_capacity(&law, &sol.s, &noise(1.0), 50_000, 99).unwrap();
        let c_iso = ergodic_capacity(&law, &iso, &noise(1.0), 50_000, 99).unwrap();
        assert!(
            c_opt.bits_per_use >= c_iso.bits_per_use - c_opt.ci_half_width - c_iso.ci_half_width,
            "optimized {} vs isotropic {}",
            c_opt.bits_per_use,
            c_iso.bits_per_use
        );
    }
}
