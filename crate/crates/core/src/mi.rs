//! Mutual information for discrete input measures and a power-constrained
//! Blahut-Arimoto solver, under the no-CSI and partial-CSI channels.
//!
//! Estimation: `I(P)/L` in bits per channel use is the Monte-Carlo average
//! of `log2 f(y|x) - log2 sum_i p_i f(y|x_i)` over `(x, y)` drawn from the
//! channel, with the mixture evaluated by log-sum-exp. Any common reference
//! measure cancels in the ratio, so Lebesgue densities are used throughout.
//!
//! Optimization: [`ba_solve`] runs Blahut-Arimoto on a finite candidate
//! grid, with the average-moment constraint `E g(x) <= gamma` handled by an
//! outer bisection on a Lagrange multiplier (complementary slackness: zero
//! when the unconstrained optimum is already feasible). The per-atom
//! relative entropies `D_i = D(W(.|x_i) || P W)` are estimated on common
//! random numbers fixed once per solve, so the iteration is deterministic
//! given the seed, and the classic lower bound
//! `sum_i p_i (D_i - gamma_n g_i)` is tracked each sweep.
//!
//! Certification: a converged solution satisfies the Kuhn-Tucker margin
//! condition `D_i - gamma_mult g(x_i) <= C L - gamma_mult Gamma` on every
//! grid point, with equality on the support; [`kt_margin_profile`] probes
//! the same margin at arbitrary inputs.

use rand::Rng;

use crate::channel::{Conditioner, FadingLaw, JointSampler, MarginalDensity, PartialCsiModel};
use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt_factor, unvec, vec_mat};
use crate::rng::{rng_from_seed, standard_complex_normal, sub_seed, SeededRng};
use crate::tol;
use crate::types::{CapacityEstimate, DiscreteInputMeasure, NoiseModel, PowerConstraint};
use crate::waterfill::LOG2_E;
use crate::{C64, CMat, CVec};

const LN_2: f64 = std::f64::consts::LN_2;

/// Finite candidate set for the input optimization.
#[derive(Debug, Clone)]
pub struct InputGrid {
    pub candidates: Vec<CMat>,
    /// How the grid was built (for reports).
    pub description: String,
}

impl InputGrid {
    /// Validate: nonempty, uniform shape, finite entries, and the zero
    /// matrix present (the always-feasible point).
    pub fn new(candidates: Vec<CMat>, description: impl Into<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Invalid("input grid must be nonempty".into()));
        }
        let shape = candidates[0].shape();
        if candidates.iter().any(|c| c.shape() != shape) {
            return Err(Error::DimMismatch("grid candidates must share one shape".into()));
        }
        if candidates.iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::Invalid("grid candidates must be finite".into()));
        }
        if !candidates.iter().any(|c| c.iter().all(|z| z.norm_sqr() == 0.0)) {
            return Err(Error::Invalid("grid must contain the zero matrix".into()));
        }
        Ok(Self { candidates, description: description.into() })
    }

    /// Scalar amplitude grid `0, step, ..., max_amp` (phase collapsed; valid
    /// whenever the channel law depends on the input only through `|x|`,
    /// e.g. zero-mean single-antenna fading).
    pub fn amplitude_levels(levels: usize, max_amp: f64) -> Result<Self> {
        if levels < 2 || !(max_amp > 0.0) {
            return Err(Error::Invalid("need at least two levels and a positive range".into()));
        }
        let candidates = (0..levels)
            .map(|k| {
                CMat::from_element(1, 1, C64::new(max_amp * k as f64 / (levels - 1) as f64, 0.0))
            })
            .collect();
        Self::new(candidates, format!("amplitude grid: {levels} levels on [0, {max_amp}]"))
    }

    /// Scalar amplitude-phase ring grid: zero plus `n_amp` amplitudes times
    /// `n_phase` equispaced phases.
    pub fn amplitude_phase(n_amp: usize, n_phase: usize, max_amp: f64) -> Result<Self> {
        if n_amp < 1 || n_phase < 1 || !(max_amp > 0.0) {
            return Err(Error::Invalid("need positive ring counts and range".into()));
        }
        let mut candidates = vec![CMat::zeros(1, 1)];
        for a in 1..=n_amp {
            let r = max_amp * a as f64 / n_amp as f64;
            for q in 0..n_phase {
                let th = 2.0 * std::f64::consts::PI * q as f64 / n_phase as f64;
                candidates.push(CMat::from_element(1, 1, C64::new(r * th.cos(), r * th.sin())));
            }
        }
        Self::new(
            candidates,
            format!("ring grid: {n_amp} amplitudes x {n_phase} phases on [0, {max_amp}]"),
        )
    }

    /// Matrix-valued grid: zero, scaled axis-aligned matrices, and scaled
    /// random isotropic frames at each of `n_scales` norm levels.
    pub fn random_frames(
        n: usize,
        block_len: usize,
        n_scales: usize,
        frames_per_scale: usize,
        max_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_scales < 1 || !(max_scale > 0.0) {
            return Err(Error::Invalid("need at least one scale and a positive range".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut candidates = vec![CMat::zeros(n, block_len)];
        for s in 1..=n_scales {
            let scale = max_scale * s as f64 / n_scales as f64;
            for d in 0..n.min(block_len) {
                let mut e = CMat::zeros(n, block_len);
                e[(d, d)] = C64::new(scale, 0.0);
                candidates.push(e);
            }
            for _ in 0..frames_per_scale {
                let g = CMat::from_fn(n, block_len, |_, _| standard_complex_normal(&mut rng));
                let nrm = g.norm();
                candidates.push(g.scale(scale / nrm));
            }
        }
        Self::new(
            candidates,
            format!(
                "frame grid: {n}x{block_len}, {n_scales} scales x ({} axes + {frames_per_scale} frames) on (0, {max_scale}]",
                n.min(block_len)
            ),
        )
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Options for [`ba_solve`].
#[derive(Debug, Clone)]
pub struct BaOpts {
    /// Inner Blahut-Arimoto sweeps per multiplier value.
    pub iters: usize,
    /// Monte-Carlo outputs drawn per grid point (common random numbers).
    pub n_samples: usize,
    /// Kuhn-Tucker margin tolerance in bits.
    pub tol_bits: f64,
    pub seed: u64,
}

impl Default for BaOpts {
    fn default() -> Self {
        Self { iters: 5000, n_samples: 1500, tol_bits: 1e-3, seed: 0 }
    }
}

/// Output of [`ba_solve`].
#[derive(Debug, Clone)]
pub struct BaSolution {
    /// Converged measure (pruned atoms dropped).
    pub measure: DiscreteInputMeasure,
    /// Achieved mutual information of the measure, bits per channel use;
    /// a lower bound on the capacity over the grid.
    pub capacity_lower_bound: f64,
    /// Largest Kuhn-Tucker margin over the whole grid, bits (<= tolerance
    /// at a converged optimum, ~0 on the support).
    pub kt_max_margin: f64,
    /// Kuhn-Tucker margin of every grid candidate (bits), evaluated on the
    /// solver's own common-random-numbers table; deterministic given the
    /// seed.
    pub grid_margins_bits: Vec<f64>,
    /// Achieved average moment `E g(x)` of the returned measure.
    pub achieved_cost: f64,
    /// Lagrange multiplier in bits per unit moment (zero when the power
    /// constraint is slack).
    pub lagrange_gamma: f64,
    /// Total inner sweeps executed across all multiplier evaluations.
    pub iterations: usize,
    /// False when the sweep budget ran out before the certificate closed.
    pub converged: bool,
    /// Lower-bound trace (bits per block) of the final multiplier run;
    /// nondecreasing by the alternating-maximization property.
    pub lower_bound_trace_bits: Vec<f64>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Channel machinery for one CSI regime: prepared per-atom output factors
/// plus conditional-mean plumbing for the partial-CSI case.
struct RegimeCtx {
    phis: Vec<MarginalDensity>,
    cond: Option<Conditioner>,
}

impl RegimeCtx {
    fn new(
        points: &[CMat],
        law: &FadingLaw,
        pcsi: Option<&PartialCsiModel>,
        noise: &NoiseModel,
    ) -> Result<Self> {
        let cond = pcsi.map(|p| Conditioner::new(law, p)).transpose()?;
        let cov = cond.as_ref().map(|c| c.sigma_cond()).unwrap_or_else(|| law.cov());
        let phis = points
            .iter()
            .map(|x| MarginalDensity::new(x, law.mean(), cov, noise))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { phis, cond })
    }

    /// `ln f(y | x_j, context)`: the stored prior mean serves the no-CSI
    /// regime; partial CSI substitutes the conditional mean matrix.
    fn log_density(&self, j: usize, y: &CMat, cond_mean: Option<&CMat>, x_j: &CMat) -> f64 {
        match cond_mean {
            None => self.phis[j].log_density(y),
            Some(mean_mat) => self.phis[j].log_density_with_mean(y, &(mean_mat * x_j)),
        }
    }
}

/// One draw of the regime channel for input `x`: returns `(y, cond_mean)`
/// where `cond_mean` is the conditional mean matrix implied by the drawn
/// side information (partial CSI only). Draw order is fixed: channel, then
/// noise.
enum RegimeSampler {
    NoCsi { mean_vec: CVec, factor: CMat, z: CVec, rng: SeededRng, m: usize, n: usize },
    Partial { joint: JointSampler },
}

impl RegimeSampler {
    fn new(law: &FadingLaw, pcsi: Option<&PartialCsiModel>, seed: u64) -> Result<Self> {
        match pcsi {
            None => {
                let factor = psd_sqrt_factor(law.cov())?;
                let k = factor.ncols();
                Ok(Self::NoCsi {
                    mean_vec: vec_mat(law.mean()),
                    factor,
                    z: CVec::zeros(k),
                    rng: rng_from_seed(seed),
                    m: law.n_rx(),
                    n: law.n_tx(),
                })
            }
            Some(p) => Ok(Self::Partial { joint: JointSampler::new(law, p, seed)? }),
        }
    }

    fn rng(&mut self) -> &mut SeededRng {
        match self {
            Self::NoCsi { rng, .. } => rng,
            Self::Partial { joint } => joint.rng_mut(),
        }
    }

    fn next_output(
        &mut self,
        x: &CMat,
        sigma2: f64,
        cond: Option<&Conditioner>,
    ) -> (CMat, Option<CMat>) {
        let s = sigma2.sqrt();
        match self {
            Self::NoCsi { mean_vec, factor, z, rng, m, n } => {
                let mut hv = mean_vec.clone();
                if factor.ncols() > 0 {
                    for e in z.iter_mut() {
                        *e = standard_complex_normal(rng);
                    }
                    hv.gemv(C64::new(1.0, 0.0), factor, z, C64::new(1.0, 0.0));
                }
                let h = unvec(&hv, *m, *n);
                let mut y = &h * x;
                for e in y.iter_mut() {
                    *e += standard_complex_normal(rng) * C64::new(s, 0.0);
                }
                (y, None)
            }
            Self::Partial { joint } => {
                let (h, v) = joint.next_pair();
                let mut y = &h * x;
                let rng = joint.rng_mut();
                for e in y.iter_mut() {
                    *e += standard_complex_normal(rng) * C64::new(s, 0.0);
                }
                let mean_mat = cond.map(|c| {
                    let mu = c.mean_given(&v);
                    unvec(&mu, h.nrows(), h.ncols())
                });
                (y, mean_mat)
            }
        }
    }
}

fn mi_estimate(
    p: &DiscreteInputMeasure,
    law: &FadingLaw,
    pcsi: Option<&PartialCsiModel>,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    if n_samples < 2 {
        return Err(Error::Invalid("need at least 2 samples for a CI".into()));
    }
    let (n, block_len) = p.atom_shape();
    if n != law.n_tx() {
        return Err(Error::DimMismatch("atom rows must match transmit antennas".into()));
    }
    let ctx = RegimeCtx::new(p.points(), law, pcsi, noise)?;
    let mut sampler = RegimeSampler::new(law, pcsi, seed)?;
    let probs = p.probs().to_vec();
    let scale = 1.0 / (LN_2 * block_len as f64);
    let mut terms = Vec::with_capacity(n_samples);
    let mut weighted = Vec::with_capacity(p.len());
    for _ in 0..n_samples {
        let u: f64 = sampler.rng().gen();
        let idx = p.index_for(u);
        let (y, cond_mean) = sampler.next_output(&p.points()[idx], noise.sigma2, ctx.cond.as_ref());
        let mut lp_own = 0.0;
        weighted.clear();
        for j in 0..p.len() {
            if probs[j] == 0.0 && j != idx {
                continue;
            }
            let lp = ctx.log_density(j, &y, cond_mean.as_ref(), &p.points()[j]);
            if j == idx {
                lp_own = lp;
            }
            if probs[j] > 0.0 {
                weighted.push(lp + probs[j].ln());
            }
        }
        let mix = log_sum_exp(&weighted);
        terms.push((lp_own - mix) * scale);
    }
    Ok(CapacityEstimate::from_samples(&terms))
}

/// Mutual information of a discrete input measure over the no-CSI channel,
/// bits per channel use with a CLT confidence half-width.
pub fn mi_nocsi(
    p: &DiscreteInputMeasure,
    law: &FadingLaw,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    mi_estimate(p, law, None, noise, n_samples, seed)
}

/// Mutual information over the partial-CSI channel: the side information is
/// drawn jointly with the fading and both the conditional density and the
/// mixture are evaluated under the posterior it induces.
pub fn mi_partialcsi(
    p: &DiscreteInputMeasure,
    law: &FadingLaw,
    pcsi: &PartialCsiModel,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    mi_estimate(p, law, Some(pcsi), noise, n_samples, seed)
}

/// Common-random-numbers divergence table: per grid point `i`, `n_samples`
/// outputs drawn from `W(.|x_i)` and the log-densities of every candidate
/// `j` at those outputs, shifted per sample for stable mixture evaluation.
struct DivergenceTable {
    /// `exp(logf[(i,k),j] - shift[(i,k)])`, flattened `(i*K + k)*n + j`.
    shifted: Vec<f64>,
    /// `ln f(y_ik | x_i)`.
    own: Vec<f64>,
    shift: Vec<f64>,
    n: usize,
    k_samples: usize,
}

impl DivergenceTable {
    fn build(
        points: &[CMat],
        ctx: &RegimeCtx,
        law: &FadingLaw,
        pcsi: Option<&PartialCsiModel>,
        noise: &NoiseModel,
        k_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = points.len();
        let mut shifted = vec![0.0; n * k_samples * n];
        let mut own = vec![0.0; n * k_samples];
        let mut shift = vec![0.0; n * k_samples];
        let mut row = vec![0.0; n];
        for i in 0..n {
            let mut sampler = RegimeSampler::new(law, pcsi, sub_seed(seed, "ba-atom", i as u64))?;
            for k in 0..k_samples {
                let (y, cond_mean) =
                    sampler.next_output(&points[i], noise.sigma2, ctx.cond.as_ref());
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = ctx.log_density(j, &y, cond_mean.as_ref(), &points[j]);
                }
                let ik = i * k_samples + k;
                own[ik] = row[i];
                let s = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                shift[ik] = s;
                let base = ik * n;
                for j in 0..n {
                    shifted[base + j] = (row[j] - s).exp();
                }
            }
        }
        Ok(Self { shifted, own, shift, n, k_samples })
    }

    /// `D_i(p) = (1/K) sum_k [ own_ik - ln sum_j p_j f(y_ik|x_j) ]` in
    /// nats, for every grid point.
    fn divergences(&self, probs: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..self.k_samples {
                let ik = i * self.k_samples + k;
                let base = ik * n;
                let mut dot = 0.0;
                for j in 0..n {
                    dot += self.shifted[base + j] * probs[j];
                }
                acc += self.own[ik] - (self.shift[ik] + dot.ln());
            }
            out[i] = acc / self.k_samples as f64;
        }
    }
}

/// Constrained Blahut-Arimoto over a finite input grid.
///
/// Inner loop at a fixed multiplier `gamma_mult` (bits per unit moment):
/// `p_i <- p_i exp(D_i - gamma_mult ln2 g_i) / Z`, with atoms below
/// [`tol::ATOM_PRUNE_TOL`] dropped and the measure renormalized each sweep.
/// The sweep stops when the classic upper and lower capacity bounds meet
/// within a tenth of the margin tolerance. The outer loop bisects the
/// multiplier to meet `E g = gamma` (complementary slackness allows zero),
/// restarting from the uniform measure each time so pruning cannot lock
/// atoms out at a different multiplier.
pub fn ba_solve(
    grid: &InputGrid,
    law: &FadingLaw,
    pcsi: Option<&PartialCsiModel>,
    noise: &NoiseModel,
    constraint: &PowerConstraint,
    opts: &BaOpts,
) -> Result<BaSolution> {
    let points = &grid.candidates;
    let (n_rows, block_len) = points[0].shape();
    if n_rows != law.n_tx() {
        return Err(Error::DimMismatch("grid rows must match transmit antennas".into()));
    }
    if opts.n_samples < 2 || opts.iters == 0 {
        return Err(Error::Invalid("need n_samples >= 2 and iters >= 1".into()));
    }
    let n = points.len();
    let ctx = RegimeCtx::new(points, law, pcsi, noise)?;
    let table = DivergenceTable::build(points, &ctx, law, pcsi, noise, opts.n_samples, opts.seed)?;
    let costs: Vec<f64> = points.iter().map(|x| constraint.cost(x)).collect();
    let gamma_budget = constraint.gamma;
    let inner_tol_nats = opts.tol_bits * LN_2 / 10.0;

    let mut divs = vec![0.0; n];
    let mut total_iters = 0usize;

    // One Blahut-Arimoto run at a fixed multiplier (nats). Returns
    // (probs, divergences, achieved cost, inner-converged, trace).
    //
    // Strict mode additionally requires the carried atoms to share their
    // exponent before declaring convergence; otherwise a low-mass atom can
    // exit mid-decay with a visibly negative margin. It is used for the run
    // whose measure is returned; multiplier probes only need the cost.
    let mut run = |gamma_nats: f64, strict: bool, want_trace: bool| {
        let mut probs = vec![1.0 / n as f64; n];
        let mut trace = Vec::new();
        let mut converged = false;
        for _ in 0..opts.iters {
            total_iters += 1;
            table.divergences(&probs, &mut divs);
            let lower: f64 = probs
                .iter()
                .zip(divs.iter().zip(&costs))
                .map(|(&p, (&d, &g))| p * (d - gamma_nats * g))
                .sum();
            if want_trace {
                trace.push(lower * LOG2_E);
            }
            let mut upper = f64::NEG_INFINITY;
            let mut sup_min = f64::INFINITY;
            let mut sup_max = f64::NEG_INFINITY;
            for ((&p, &d), &g) in probs.iter().zip(divs.iter()).zip(&costs) {
                let e = d - gamma_nats * g;
                upper = upper.max(e);
                if p > 0.0 {
                    sup_min = sup_min.min(e);
                    sup_max = sup_max.max(e);
                }
            }
            // Strict mode also requires every surviving atom to sit within
            // the *reported* tolerance of the common level; near-ties well
            // inside the tolerance are allowed to coexist rather than
            // waiting out their geometric decay.
            let bounds_met = upper - lower <= inner_tol_nats;
            if bounds_met && (!strict || sup_max - sup_min <= opts.tol_bits * LN_2) {
                converged = true;
                break;
            }
            let logw: Vec<f64> = probs
                .iter()
                .zip(divs.iter().zip(&costs))
                .map(|(&p, (&d, &g))| {
                    if p > 0.0 {
                        p.ln() + d - gamma_nats * g
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let lse = log_sum_exp(&logw);
            let mut mass = 0.0;
            for (j, (p, &lw)) in probs.iter_mut().zip(&logw).enumerate() {
                *p = (lw - lse).exp();
                if *p < tol::ATOM_PRUNE_TOL {
                    *p = 0.0;
                }
                // Once the value has converged, an atom whose exponent sits
                // below the support level only decays; dropping it at
                // negligible mass perturbs the measure by < 1e-6.
                if bounds_met
                    && *p < 1e-6
                    && divs[j] - gamma_nats * costs[j] < lower - inner_tol_nats
                {
                    *p = 0.0;
                }
                mass += *p;
            }
            for p in probs.iter_mut() {
                *p /= mass;
            }
        }
        table.divergences(&probs, &mut divs);
        let cost: f64 = probs.iter().zip(&costs).map(|(&p, &g)| p * g).sum();
        (probs, divs.clone(), cost, converged, trace)
    };

    // Complementary slackness: try the unconstrained problem first.
    let (probs0, divs0, cost0, conv0, trace0) = run(0.0, true, true);
    let (probs, divs_final, gamma_bits, inner_ok, trace) = if cost0
        <= gamma_budget + tol::TRACE_TOL
    {
        (probs0, divs0, 0.0, conv0, trace0)
    } else {
        // Bracket a multiplier that tames the cost, then bisect.
        let mut hi_bits = 0.5;
        let mut found = false;
        for _ in 0..60 {
            let (_, _, cost, _, _) = run(hi_bits * LN_2, false, false);
            if cost <= gamma_budget {
                found = true;
                break;
            }
            hi_bits *= 2.0;
        }
        if !found {
            return Err(Error::Numerical(
                "could not bracket the power multiplier; grid may be infeasible".into(),
            ));
        }
        let mut lo_bits = 0.0;
        for _ in 0..48 {
            let mid = 0.5 * (lo_bits + hi_bits);
            let (_, _, cost, _, _) = run(mid * LN_2, false, false);
            if cost > gamma_budget {
                lo_bits = mid;
            } else {
                hi_bits = mid;
            }
            // Stop when the residual atom-margin bias from the remaining
            // power mismatch is negligible against the tolerance.
            if hi_bits * (hi_bits - lo_bits) * gamma_budget < opts.tol_bits * 1e-3 {
                break;
            }
        }
        let gamma_bits = hi_bits;
        let (probs, divs, _, conv, trace) = run(gamma_bits * LN_2, true, true);
        (probs, divs, gamma_bits, conv, trace)
    };

    // Kuhn-Tucker margins over the full grid, in bits.
    let gamma_nats = gamma_bits * LN_2;
    let achieved: f64 = probs.iter().zip(divs_final.iter()).map(|(&p, &d)| p * d).sum();
    let achieved_cost: f64 = probs.iter().zip(&costs).map(|(&p, &g)| p * g).sum();
    let rhs = achieved - gamma_nats * gamma_budget;
    let grid_margins_bits: Vec<f64> = divs_final
        .iter()
        .zip(&costs)
        .map(|(&d, &g)| (d - gamma_nats * g - rhs) / LN_2)
        .collect();
    let kt_max_margin =
        grid_margins_bits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut kept_points = Vec::new();
    let mut kept_probs = Vec::new();
    for (x, &p) in points.iter().zip(&probs) {
        if p > 0.0 {
            kept_points.push(x.clone());
            kept_probs.push(p);
        }
    }
    let total: f64 = kept_probs.iter().sum();
    for p in kept_probs.iter_mut() {
        *p /= total;
    }
    let measure = DiscreteInputMeasure::new(kept_points, kept_probs)?;

    Ok(BaSolution {
        measure,
        capacity_lower_bound: achieved / LN_2 / block_len as f64,
        kt_max_margin,
        grid_margins_bits,
        achieved_cost,
        lagrange_gamma: gamma_bits,
        iterations: total_iters,
        converged: inner_ok && kt_max_margin <= opts.tol_bits,
        lower_bound_trace_bits: trace,
    })
}

/// Kuhn-Tucker margin estimate at one probe input, with its Monte-Carlo
/// standard error (both in bits).
#[derive(Debug, Clone)]
pub struct ProbeMargin {
    pub x: CMat,
    pub margin_bits: f64,
    pub stderr_bits: f64,
}

/// Estimated divergence `D(W(.|x) || P W)` in nats with the variance of the
/// mean estimator.
#[allow(clippy::too_many_arguments)]
fn divergence_at(
    x: &CMat,
    p: &DiscreteInputMeasure,
    ctx: &RegimeCtx,
    law: &FadingLaw,
    pcsi: Option<&PartialCsiModel>,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let cov = ctx.cond.as_ref().map(|c| c.sigma_cond()).unwrap_or_else(|| law.cov());
    let phi_x = MarginalDensity::new(x, law.mean(), cov, noise)?;
    let mut sampler = RegimeSampler::new(law, pcsi, seed)?;
    let probs = p.probs();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut weighted = Vec::with_capacity(p.len());
    for _ in 0..n_samples {
        let (y, cond_mean) = sampler.next_output(x, noise.sigma2, ctx.cond.as_ref());
        let lp_own = match cond_mean.as_ref() {
            None => phi_x.log_density(&y),
            Some(mean_mat) => phi_x.log_density_with_mean(&y, &(mean_mat * x)),
        };
        weighted.clear();
        for j in 0..p.len() {
            if probs[j] > 0.0 {
                weighted
                    .push(ctx.log_density(j, &y, cond_mean.as_ref(), &p.points()[j]) + probs[j].ln());
            }
        }
        let t = lp_own - log_sum_exp(&weighted);
        sum += t;
        sum_sq += t * t;
    }
    let k = n_samples as f64;
    let mean = sum / k;
    let var_mean = ((sum_sq / k - mean * mean).max(0.0)) / k;
    Ok((mean, var_mean))
}

/// Kuhn-Tucker margin profile of a measure at arbitrary probe inputs:
/// `D(W(.|x) || P W) - gamma_mult g(x) - (C L - gamma_mult gamma)` in bits,
/// where `C L` is the measure's own mutual information per block estimated
/// on the same seed schedule. At a true optimum every margin is <= 0 within
/// Monte-Carlo noise and ~ 0 on the atoms.
#[allow(clippy::too_many_arguments)]
pub fn kt_margin_profile(
    p: &DiscreteInputMeasure,
    gamma_mult: f64,
    probes: &[CMat],
    law: &FadingLaw,
    pcsi: Option<&PartialCsiModel>,
    noise: &NoiseModel,
    constraint: &PowerConstraint,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ProbeMargin>> {
    let ctx = RegimeCtx::new(p.points(), law, pcsi, noise)?;
    let gamma_nats = gamma_mult * LN_2;

    // The measure's block mutual information on the same seed family.
    let mut mi_nats = 0.0;
    let mut mi_var = 0.0;
    for i in 0..p.len() {
        let (d, var) = divergence_at(
            &p.points()[i].clone(),
            p,
            &ctx,
            law,
            pcsi,
            noise,
            n_samples,
            sub_seed(seed, "profile-atom", i as u64),
        )?;
        let w = p.probs()[i];
        mi_nats += w * d;
        mi_var += w * w * var;
    }
    let rhs = mi_nats - gamma_nats * constraint.gamma;

    let mut out = Vec::with_capacity(probes.len());
    for (j, x) in probes.iter().enumerate() {
        let (d, var) = divergence_at(
            x,
            p,
            &ctx,
            law,
            pcsi,
            noise,
            n_samples,
            sub_seed(seed, "profile-probe", j as u64),
        )?;
        let margin_nats = d - gamma_nats * constraint.cost(x) - rhs;
        out.push(ProbeMargin {
            x: x.clone(),
            margin_bits: margin_nats / LN_2,
            stderr_bits: (var + mi_var).sqrt() / LN_2,
        });
    }
    Ok(out)
}
