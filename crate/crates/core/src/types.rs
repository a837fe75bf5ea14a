//! Domain types: antenna dimensions, noise, power constraints, input
//! measures and covariances, and Monte-Carlo capacity estimates.

use crate::error::{Error, Result};
use crate::linalg::{eigh_desc, hermitian_deviation};
use crate::tol;
use crate::{C64, CMat};

/// Antenna counts and block length of the channel `y = H x + z` with
/// `H` of size `m x n`, inputs `n x block_len`, outputs `m x block_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    /// Transmit antennas (columns of `H`).
    pub n: usize,
    /// Receive antennas (rows of `H`).
    pub m: usize,
    /// Channel uses per fading block.
    pub block_len: usize,
}

impl ChannelDims {
    pub fn new(n: usize, m: usize, block_len: usize) -> Result<Self> {
        if n == 0 || m == 0 || block_len == 0 {
            return Err(Error::Invalid(format!(
                "channel dimensions must be positive, got n={n}, m={m}, L={block_len}"
            )));
        }
        Ok(Self { n, m, block_len })
    }

    /// Length of `vec H`.
    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Length of `vec y`.
    pub fn ml(&self) -> usize {
        self.m * self.block_len
    }
}

/// Additive complex white noise with per-entry variance `sigma2`
/// (`E|z_ij|^2 = sigma2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Invalid(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }
}

/// Average moment constraint `E g(x) <= gamma` with `g(x) = ||x||_eta^eta`,
/// the sum of `|x_ij|^eta` over all entries. `eta = 2` is the usual average
/// power (squared Frobenius norm) budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConstraint {
    pub eta: f64,
    pub gamma: f64,
}

impl PowerConstraint {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        if !(eta >= 1.0) || !eta.is_finite() {
            return Err(Error::Invalid(format!("moment order must satisfy eta >= 1, got {eta}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Invalid(format!("power budget must be positive, got {gamma}")));
        }
        Ok(Self { eta, gamma })
    }

    /// `g(x) = sum_ij |x_ij|^eta`.
    pub fn cost(&self, x: &CMat) -> f64 {
        if self.eta == 2.0 {
            x.norm_squared()
        } else {
            x.iter().map(|z| z.norm().powf(self.eta)).sum()
        }
    }
}

/// Finite input measure: a list of `n x block_len` atoms with probabilities.
#[derive(Debug, Clone)]
pub struct DiscreteInputMeasure {
    points: Vec<CMat>,
    probs: Vec<f64>,
}

impl DiscreteInputMeasure {
    /// Build and validate: probabilities are nonnegative, sum to one within
    /// [`tol::PROB_SUM_TOL`], and all atoms share one shape.
    pub fn new(points: Vec<CMat>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != probs.len() {
            return Err(Error::Invalid(format!(
                "measure needs matching nonempty atom/probability lists, got {} and {}",
                points.len(),
                probs.len()
            )));
        }
        let shape = points[0].shape();
        if points.iter().any(|p| p.shape() != shape) {
            return Err(Error::DimMismatch("atoms must share one shape".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Invalid("probabilities must be nonnegative and finite".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol::PROB_SUM_TOL {
            return Err(Error::Invalid(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Self { points, probs })
    }

    /// Uniform measure over the given atoms.
    pub fn uniform(points: Vec<CMat>) -> Result<Self> {
        let k = points.len();
        Self::new(points, vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[CMat] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Shape of every atom: `(n, block_len)`.
    pub fn atom_shape(&self) -> (usize, usize) {
        self.points[0].shape()
    }

    /// `sum_i p_i g(x_i)` for the constraint's moment function.
    pub fn average_cost(&self, constraint: &PowerConstraint) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .map(|(x, &p)| p * constraint.cost(x))
            .sum()
    }

    /// Check the average-moment budget `E g(x) <= gamma` within
    /// [`tol::TRACE_TOL`].
    pub fn check_power(&self, constraint: &PowerConstraint) -> Result<()> {
        let avg = self.average_cost(constraint);
        if avg > constraint.gamma + tol::TRACE_TOL {
            return Err(Error::Invalid(format!(
                "average moment {avg} exceeds budget {}",
                constraint.gamma
            )));
        }
        Ok(())
    }

    /// Inverse-CDF atom lookup for a uniform draw `u` in `[0, 1)`.
    pub fn index_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Hermitian PSD input covariance for Gaussian signalling designs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputCovariance {
    s: CMat,
}

impl InputCovariance {
    /// Validate Hermitian symmetry and positive semidefiniteness within
    /// a `1e-10` relative tolerance.
    pub fn new(s: CMat) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::DimMismatch(format!(
                "input covariance must be square, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if hermitian_deviation(&s) > 1e-10 * (1.0 + scale) {
            return Err(Error::Invalid("input covariance is not Hermitian".into()));
        }
        let (vals, _) = eigh_desc(&s);
        let max = vals[0].max(0.0);
        if vals[vals.len() - 1] < -tol::PSD_REL_TOL * max {
            return Err(Error::Invalid(format!(
                "input covariance is not PSD: min eigenvalue {:.3e}",
                vals[vals.len() - 1]
            )));
        }
        Ok(Self { s })
    }

    /// `(gamma / n) I`, the isotropic covariance with trace `gamma`.
    pub fn isotropic(n: usize, gamma: f64) -> Self {
        Self { s: CMat::identity(n, n).scale(gamma / n as f64) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.s.diagonal().iter().map(|z| z.re).sum()
    }

    /// Check `tr(S) <= gamma + 1e-9` against an `eta = 2` constraint.
    pub fn check_budget(&self, constraint: &PowerConstraint) -> Result<()> {
        if constraint.eta != 2.0 {
            return Err(Error::Invalid(
                "trace budgets only correspond to eta = 2 constraints".into(),
            ));
        }
        if self.trace() > constraint.gamma + tol::TRACE_TOL {
            return Err(Error::Invalid(format!(
                "trace {} exceeds budget {}",
                self.trace(),
                constraint.gamma
            )));
        }
        Ok(())
    }
}

/// A capacity or mutual-information value in bits per channel use with a
/// 95% normal-approximation Monte-Carlo confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    pub bits_per_use: f64,
    pub ci_half_width: f64,
    pub samples: usize,
}

impl CapacityEstimate {
    /// Exact (non-stochastic) value.
    pub fn exact(bits_per_use: f64) -> Self {
        Self { bits_per_use, ci_half_width: 0.0, samples: 1 }
    }

    /// Sample mean with CLT half-width `1.96 s / sqrt(N)`.
    ///
    /// When every sample is bit-identical (degenerate point-mass cases) the
    /// value is returned exactly with zero half-width, so deterministic
    /// reductions stay exact rather than picking up summation roundoff.
    pub fn from_samples(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "need at least one sample");
        let n = values.len();
        let first = values[0];
        if values.iter().all(|v| v.to_bits() == first.to_bits()) {
            return Self { bits_per_use: first, ci_half_width: 0.0, samples: n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Self {
            bits_per_use: mean,
            ci_half_width: 1.96 * (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

/// Real part of the trace.
pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Convenience: complex scalar from a real.
pub fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}
