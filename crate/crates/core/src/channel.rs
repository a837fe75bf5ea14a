//! Channel model: fading laws, sampling, Gaussian conditioning on side
//! information, and exact conditional log-densities for every receiver
//! knowledge regime.
//!
//! The channel is `y = H x + z` used `block_len` times per fading block,
//! with `vec H` complex normal of mean `vec Hbar` and covariance `Sigma`
//! (Rayleigh when the mean is zero, Rician otherwise), and white noise
//! `z_ij ~ CN(0, sigma2)`.
//!
//! Densities are taken with respect to Lebesgue measure and returned as
//! natural logs:
//!
//! - known channel: `ln f(y|x,H) = -mL ln(pi sigma2) - ||y - Hx||^2 / sigma2`
//! - no CSI (H marginalized out): `vec y ~ CN(vec(Hbar x), sigma2 Phi_x)`
//!   with `Phi_x = (x^T kron I_m) Sigma (conj(x) kron I_m) / sigma2 + I`
//! - partial CSI: the same expression with `(Hbar, Sigma)` replaced by the
//!   conditional pair `(mu_{H|v}, Sigma_{H|v})` from [`condition_on_side_info`].
//!
//! Vectorization is column-major, so `vec(Hx) = (x^T kron I_m) vec H`; the
//! Kronecker orientation above is the one that reproduces the Monte-Carlo
//! marginalized covariance (see the marginalization-consistency tests).

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    check_psd, cholesky_in_place, chol_logdet, hermitian_deviation, hermitian_part, pinv_psd,
    psd_sqrt_factor, solve_lower_in_place, unvec, vec_mat,
};
use crate::rng::{rng_from_seed, standard_complex_normal, SeededRng};
use crate::tol;
use crate::types::{ChannelDims, NoiseModel};
use crate::{C64, CMat, CVec};

/// Fading law of the channel matrix: `vec H ~ CN(vec mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingLaw {
    mean: CMat,
    cov: CMat,
}

impl FadingLaw {
    /// Validate and build. `mean` is `m x n`; `cov` is `mn x mn`, Hermitian
    /// entrywise within [`tol::HERMITIAN_ABS_TOL`] and PSD within
    /// [`tol::PSD_REL_TOL`] relative to its largest eigenvalue.
    pub fn new(mean: CMat, cov: CMat) -> Result<Self> {
        let mn = mean.nrows() * mean.ncols();
        if cov.nrows() != mn || cov.ncols() != mn {
            return Err(Error::DimMismatch(format!(
                "covariance must be {mn}x{mn} for a {}x{} mean, got {}x{}",
                mean.nrows(),
                mean.ncols(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if hermitian_deviation(&cov) > tol::HERMITIAN_ABS_TOL {
            return Err(Error::Invalid(format!(
                "fading covariance is not Hermitian (max deviation {:.3e})",
                hermitian_deviation(&cov)
            )));
        }
        check_psd(&cov, tol::PSD_REL_TOL)?;
        Ok(Self { mean, cov })
    }

    /// I.i.d. Rayleigh fading: zero mean, identity covariance.
    pub fn iid_rayleigh(dims: &ChannelDims) -> Self {
        Self {
            mean: CMat::zeros(dims.m, dims.n),
            cov: CMat::identity(dims.mn(), dims.mn()),
        }
    }

    /// Rician fading with K-factor `k >= 0`: a rank-one line-of-sight mean
    /// on the all-ones direction and white scattering, normalized so the
    /// total path power is `mn` and `||vec mean||^2 / tr(cov) = k`.
    pub fn rician(dims: &ChannelDims, k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Invalid(format!("Rician K-factor must be >= 0, got {k}")));
        }
        let los = (k / (1.0 + k)).sqrt();
        let mean = CMat::from_element(dims.m, dims.n, C64::new(los, 0.0));
        let cov = CMat::identity(dims.mn(), dims.mn()).scale(1.0 / (1.0 + k));
        Ok(Self { mean, cov })
    }

    /// Separable (Kronecker) correlation: zero mean and
    /// `cov = rtx^T kron rrx` for transmit / receive correlation matrices,
    /// consistent with column-major vectorization.
    pub fn kronecker(rtx: &CMat, rrx: &CMat) -> Result<Self> {
        if rtx.nrows() != rtx.ncols() || rrx.nrows() != rrx.ncols() {
            return Err(Error::DimMismatch("correlation matrices must be square".into()));
        }
        let mean = CMat::zeros(rrx.nrows(), rtx.nrows());
        Self::new(mean, rtx.transpose().kronecker(rrx))
    }

    /// Random valid law for simulation studies: Ginibre mean and a Wishart
    /// covariance rescaled to trace `mn`.
    pub fn random<R: Rng>(dims: &ChannelDims, rng: &mut R) -> Self {
        let mean = CMat::from_fn(dims.m, dims.n, |_, _| standard_complex_normal(rng));
        let cov = crate::linalg::random_psd_trace(dims.mn(), dims.mn() as f64, rng);
        Self { mean, cov }
    }

    /// `m x n` mean matrix.
    pub fn mean(&self) -> &CMat {
        &self.mean
    }

    /// `mn x mn` covariance of `vec H`.
    pub fn cov(&self) -> &CMat {
        &self.cov
    }

    pub fn n_rx(&self) -> usize {
        self.mean.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.mean.ncols()
    }

    /// Streaming sampler of channel realizations for this law.
    pub fn sampler(&self, seed: u64) -> Result<ChannelSampler> {
        ChannelSampler::new(self, seed)
    }
}

/// Streaming i.i.d. sampler of `H` draws; deterministic given its seed.
pub struct ChannelSampler {
    mean_vec: CVec,
    factor: CMat,
    rng: SeededRng,
    z: CVec,
    m: usize,
    n: usize,
}

impl ChannelSampler {
    pub fn new(law: &FadingLaw, seed: u64) -> Result<Self> {
        let factor = psd_sqrt_factor(law.cov())?;
        let k = factor.ncols();
        Ok(Self {
            mean_vec: vec_mat(law.mean()),
            factor,
            rng: rng_from_seed(seed),
            z: CVec::zeros(k),
            m: law.n_rx(),
            n: law.n_tx(),
        })
    }

    /// Next draw as an `m x n` matrix.
    pub fn next_matrix(&mut self) -> CMat {
        let mut v = self.mean_vec.clone();
        if self.factor.ncols() > 0 {
            for e in self.z.iter_mut() {
                *e = standard_complex_normal(&mut self.rng);
            }
            v.gemv(C64::new(1.0, 0.0), &self.factor, &self.z, C64::new(1.0, 0.0));
        }
        unvec(&v, self.m, self.n)
    }
}

/// Draw `count` i.i.d. channel realizations; deterministic given the seed.
pub fn sample_channel(law: &FadingLaw, seed: u64, count: usize) -> Result<Vec<CMat>> {
    if count == 0 {
        return Err(Error::Invalid("sample count must be >= 1".into()));
    }
    let mut s = law.sampler(seed)?;
    Ok((0..count).map(|_| s.next_matrix()).collect())
}

/// Jointly Gaussian side information about the channel: cross-covariance
/// `sigma_hv = cov(vec H, v)`, mean `mu_v`, and covariance `sigma_vv` of the
/// observation `v` living in `C^{mn}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCsiModel {
    sigma_hv: CMat,
    mu_v: CVec,
    sigma_vv: CMat,
}

impl PartialCsiModel {
    /// Validate against the associated fading law: shapes match and the
    /// joint covariance `[[Sigma, Sigma_hv], [Sigma_hv', Sigma_vv]]` is PSD
    /// within [`tol::PSD_REL_TOL`].
    pub fn new(law: &FadingLaw, sigma_hv: CMat, mu_v: CVec, sigma_vv: CMat) -> Result<Self> {
        let mn = law.cov().nrows();
        if sigma_hv.shape() != (mn, mn) || sigma_vv.shape() != (mn, mn) || mu_v.len() != mn {
            return Err(Error::DimMismatch(format!(
                "side-information blocks must be {mn}x{mn} with an {mn}-vector mean"
            )));
        }
        if hermitian_deviation(&sigma_vv) > 1e-10 {
            return Err(Error::Invalid("sigma_vv is not Hermitian".into()));
        }
        let joint = Self::joint_cov(law.cov(), &sigma_hv, &sigma_vv);
        check_psd(&joint, tol::PSD_REL_TOL)
            .map_err(|_| Error::Invalid("joint channel/side-information covariance is not PSD".into()))?;
        Ok(Self { sigma_hv, mu_v, sigma_vv })
    }

    /// Full CSI as a degenerate case: `v = vec H` exactly.
    pub fn full_csi(law: &FadingLaw) -> Self {
        Self {
            sigma_hv: law.cov().clone(),
            mu_v: vec_mat(law.mean()),
            sigma_vv: law.cov().clone(),
        }
    }

    /// Uninformative side information, independent of the channel.
    pub fn independent(law: &FadingLaw) -> Self {
        let mn = law.cov().nrows();
        Self {
            sigma_hv: CMat::zeros(mn, mn),
            mu_v: CVec::zeros(mn),
            sigma_vv: CMat::identity(mn, mn),
        }
    }

    /// Noisy channel estimate `v = vec H + w` with `w ~ CN(0, est_var I)`.
    pub fn noisy_observation(law: &FadingLaw, est_var: f64) -> Result<Self> {
        if !(est_var >= 0.0) {
            return Err(Error::Invalid("estimation noise variance must be >= 0".into()));
        }
        let mn = law.cov().nrows();
        Ok(Self {
            sigma_hv: law.cov().clone(),
            mu_v: vec_mat(law.mean()),
            sigma_vv: law.cov() + CMat::identity(mn, mn).scale(est_var),
        })
    }

    pub fn sigma_hv(&self) -> &CMat {
        &self.sigma_hv
    }

    pub fn mu_v(&self) -> &CVec {
        &self.mu_v
    }

    pub fn sigma_vv(&self) -> &CMat {
        &self.sigma_vv
    }

    fn joint_cov(sigma: &CMat, sigma_hv: &CMat, sigma_vv: &CMat) -> CMat {
        let mn = sigma.nrows();
        let mut joint = CMat::zeros(2 * mn, 2 * mn);
        joint.view_mut((0, 0), (mn, mn)).copy_from(sigma);
        joint.view_mut((0, mn), (mn, mn)).copy_from(sigma_hv);
        joint.view_mut((mn, 0), (mn, mn)).copy_from(&sigma_hv.adjoint());
        joint.view_mut((mn, mn), (mn, mn)).copy_from(sigma_vv);
        joint
    }
}

/// Precomputed Gaussian conditioning map `v -> (mu_{H|v}, Sigma_{H|v})`.
///
/// The conditional covariance does not depend on the observed value, so it
/// is computed once; only the mean is per-observation work.
pub struct Conditioner {
    mean_vec: CVec,
    mu_v: CVec,
    gain: CMat,
    sigma_cond: CMat,
}

impl Conditioner {
    pub fn new(law: &FadingLaw, pcsi: &PartialCsiModel) -> Result<Self> {
        let mn = law.cov().nrows();
        if pcsi.sigma_hv.nrows() != mn {
            return Err(Error::DimMismatch("side-information model does not match the law".into()));
        }
        let vv_pinv = pinv_psd(&pcsi.sigma_vv);
        let gain = &pcsi.sigma_hv * vv_pinv;
        let sigma_cond = hermitian_part(&(law.cov() - &gain * pcsi.sigma_hv.adjoint()));
        Ok(Self {
            mean_vec: vec_mat(law.mean()),
            mu_v: pcsi.mu_v.clone(),
            gain,
            sigma_cond,
        })
    }

    /// Conditional mean of `vec H` given the observation.
    pub fn mean_given(&self, v: &CVec) -> CVec {
        &self.mean_vec + &self.gain * (v - &self.mu_v)
    }

    /// Conditional covariance of `vec H` (observation independent).
    pub fn sigma_cond(&self) -> &CMat {
        &self.sigma_cond
    }
}

/// Gaussian conditioning of the channel on an observed side-information
/// vector: returns `(mu_{H|v}, Sigma_{H|v})` with
/// `mu = vec Hbar + Sigma_hv Sigma_vv^+ (v - mu_v)` and
/// `Sigma_cond = Sigma - Sigma_hv Sigma_vv^+ Sigma_vh`. The pseudo-inverse
/// handles singular observation covariances.
pub fn condition_on_side_info(
    law: &FadingLaw,
    pcsi: &PartialCsiModel,
    v: &CVec,
) -> Result<(CVec, CMat)> {
    if v.len() != law.cov().nrows() {
        return Err(Error::DimMismatch(format!(
            "observation must have length {}, got {}",
            law.cov().nrows(),
            v.len()
        )));
    }
    let c = Conditioner::new(law, pcsi)?;
    Ok((c.mean_given(v), c.sigma_cond))
}

/// Log-density of the channel output for a known realization `h`:
/// `-mL ln(pi sigma2) - ||y - h x||_F^2 / sigma2` (natural log).
pub fn log_density_known_channel(
    y: &CMat,
    x: &CMat,
    h: &CMat,
    noise: &NoiseModel,
) -> Result<f64> {
    let (m, l) = y.shape();
    if h.ncols() != x.nrows() || x.ncols() != l || h.nrows() != m {
        return Err(Error::DimMismatch(format!(
            "inconsistent shapes: y {}x{}, x {}x{}, h {}x{}",
            m,
            l,
            x.nrows(),
            x.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let q = (y - h * x).norm_squared();
    let ml = (m * l) as f64;
    Ok(-ml * (std::f64::consts::PI * noise.sigma2).ln() - q / noise.sigma2)
}

/// Scaled output covariance of the channel with the fading marginalized out:
/// `Phi_x = (x^T kron I_m) Sigma (conj(x) kron I_m) / sigma2 + I_{mL}`,
/// so that `vec y ~ CN(vec(Hbar x), sigma2 Phi_x)`. Hermitian with all
/// eigenvalues `>= 1`.
pub fn output_cov_nocsi(x: &CMat, law: &FadingLaw, noise: &NoiseModel) -> Result<CMat> {
    scaled_output_cov(x, law.cov(), law.n_rx(), noise)
}

fn scaled_output_cov(x: &CMat, cov_vec: &CMat, m: usize, noise: &NoiseModel) -> Result<CMat> {
    let (n, l) = x.shape();
    if cov_vec.nrows() != m * n {
        return Err(Error::DimMismatch(format!(
            "vec-covariance is {}x{}, expected {}x{}",
            cov_vec.nrows(),
            cov_vec.ncols(),
            m * n,
            m * n
        )));
    }
    let a = x.transpose().kronecker(&CMat::identity(m, m));
    let mut phi = (&a * cov_vec * a.adjoint()).scale(1.0 / noise.sigma2);
    for i in 0..m * l {
        phi[(i, i)] += C64::new(1.0, 0.0);
    }
    Ok(hermitian_part(&phi))
}

/// Per-input prepared marginal density: one Cholesky of `Phi_x` serves any
/// number of output evaluations. Used heavily by the mutual-information
/// estimators, where the same atom is scored against many outputs.
pub struct MarginalDensity {
    mean_y: CMat,
    chol: CMat,
    logdet: f64,
    ml: usize,
    sigma2: f64,
}

impl MarginalDensity {
    /// Prepare for input `x` under a Gaussian channel with mean matrix
    /// `mean` (m x n) and `vec`-covariance `cov_vec` (mn x mn).
    pub fn new(x: &CMat, mean: &CMat, cov_vec: &CMat, noise: &NoiseModel) -> Result<Self> {
        let (m, _) = mean.shape();
        if mean.ncols() != x.nrows() {
            return Err(Error::DimMismatch("mean columns must match input rows".into()));
        }
        let mut phi = scaled_output_cov(x, cov_vec, m, noise)?;
        if !cholesky_in_place(&mut phi) {
            return Err(Error::Numerical(
                "output covariance factorization failed; eigenvalues should be >= 1".into(),
            ));
        }
        let logdet = chol_logdet(&phi);
        Ok(Self {
            mean_y: mean * x,
            chol: phi,
            logdet,
            ml: m * x.ncols(),
            sigma2: noise.sigma2,
        })
    }

    /// Prepare for the no-CSI channel of a fading law.
    pub fn from_law(x: &CMat, law: &FadingLaw, noise: &NoiseModel) -> Result<Self> {
        Self::new(x, law.mean(), law.cov(), noise)
    }

    /// `ln f(y|x)` for this prepared input.
    pub fn log_density(&self, y: &CMat) -> f64 {
        let r = y - &self.mean_y;
        self.log_density_residual(r)
    }

    /// Same factorization, explicit output mean (used when the mean varies
    /// with side information while the covariance does not).
    pub fn log_density_with_mean(&self, y: &CMat, mean_y: &CMat) -> f64 {
        let r = y - mean_y;
        self.log_density_residual(r)
    }

    fn log_density_residual(&self, r: CMat) -> f64 {
        let mut rv = CMat::from_column_slice(r.len(), 1, r.as_slice());
        solve_lower_in_place(&self.chol, &mut rv);
        let q = rv.norm_squared();
        -(self.ml as f64) * (std::f64::consts::PI * self.sigma2).ln() - self.logdet
            - q / self.sigma2
    }
}

/// Log-density of the no-CSI channel (fading marginalized out):
/// `ln f(y|x) = -mL ln(pi sigma2) - ln det Phi_x
///  - vec(y - Hbar x)' Phi_x^{-1} vec(y - Hbar x) / sigma2`.
pub fn log_density_nocsi(y: &CMat, x: &CMat, law: &FadingLaw, noise: &NoiseModel) -> Result<f64> {
    if y.shape() != (law.n_rx(), x.ncols()) {
        return Err(Error::DimMismatch(format!(
            "output must be {}x{}, got {}x{}",
            law.n_rx(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(MarginalDensity::from_law(x, law, noise)?.log_density(y))
}

/// Log-density of the partial-CSI channel given the conditional pair
/// `(mu_cond, sigma_cond)` produced by [`condition_on_side_info`]; identical
/// to the no-CSI expression with the prior replaced by the posterior.
pub fn log_density_partialcsi(
    y: &CMat,
    x: &CMat,
    mu_cond: &CVec,
    sigma_cond: &CMat,
    noise: &NoiseModel,
) -> Result<f64> {
    let m = y.nrows();
    let n = x.nrows();
    if mu_cond.len() != m * n {
        return Err(Error::DimMismatch(format!(
            "conditional mean must have length {}, got {}",
            m * n,
            mu_cond.len()
        )));
    }
    let mean = unvec(mu_cond, m, n);
    Ok(MarginalDensity::new(x, &mean, sigma_cond, noise)?.log_density(y))
}

/// Streaming sampler of jointly Gaussian `(H, v)` pairs under a fading law
/// and a side-information model.
pub struct JointSampler {
    mean: CVec,
    factor: CMat,
    rng: SeededRng,
    z: CVec,
    m: usize,
    n: usize,
}

impl JointSampler {
    pub fn new(law: &FadingLaw, pcsi: &PartialCsiModel, seed: u64) -> Result<Self> {
        let mn = law.cov().nrows();
        let joint = PartialCsiModel::joint_cov(law.cov(), &pcsi.sigma_hv, &pcsi.sigma_vv);
        let mut mean = CVec::zeros(2 * mn);
        mean.rows_mut(0, mn).copy_from(&vec_mat(law.mean()));
        mean.rows_mut(mn, mn).copy_from(&pcsi.mu_v);
        let factor = psd_sqrt_factor(&joint)?;
        let k = factor.ncols();
        Ok(Self {
            mean,
            factor,
            rng: rng_from_seed(seed),
            z: CVec::zeros(k),
            m: law.n_rx(),
            n: law.n_tx(),
        })
    }

    /// The underlying stream, for callers that interleave their own draws
    /// (noise, atom selection) with the channel draws.
    pub fn rng_mut(&mut self) -> &mut SeededRng {
        &mut self.rng
    }

    /// Next `(H, v)` draw.
    pub fn next_pair(&mut self) -> (CMat, CVec) {
        let mut w = self.mean.clone();
        if self.factor.ncols() > 0 {
            for e in self.z.iter_mut() {
                *e = standard_complex_normal(&mut self.rng);
            }
            w.gemv(C64::new(1.0, 0.0), &self.factor, &self.z, C64::new(1.0, 0.0));
        }
        let mn = self.m * self.n;
        let h = unvec(&w.rows(0, mn).clone_owned(), self.m, self.n);
        let v = w.rows(mn, mn).clone_owned();
        (h, v)
    }
}

/// Fill `y` with `h x + z` for fresh white noise, reusing the buffer.
#[cfg(test)]
pub(crate) fn add_noise_into<R: Rng>(y: &mut CMat, sigma2: f64, rng: &mut R) {
    let s = sigma2.sqrt();
    for e in y.iter_mut() {
        *e += standard_complex_normal(rng) * C64::new(s, 0.0);
    }
}
