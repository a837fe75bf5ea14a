//! MIMO channel capacity toolkit.
//!
//! Computes capacities and capacity-achieving inputs for a block-fading
//! multi-antenna channel `y = Hx + z` under four receiver-knowledge regimes:
//!
//! - **Known channel (AWGN)**: closed-form water-filling over the eigenmodes
//!   of `H'H`, with a Kuhn-Tucker margin certificate ([`waterfill`]).
//! - **Full CSI at the receiver**: ergodic capacity by Monte Carlo over the
//!   fading law, projected-gradient search for the optimal Gaussian input
//!   covariance, and a Kuhn-Tucker certificate ([`statcsi`]).
//! - **No CSI**: exact Gaussian densities of the channel marginalized over
//!   the fading, mutual-information estimation for discrete input measures,
//!   and a power-constrained Blahut-Arimoto solver ([`channel`], [`mi`]).
//! - **Partial CSI**: Gaussian conditioning on jointly-Gaussian side
//!   information, with the same estimation and solver machinery.
//!
//! Fading is Rayleigh or Rician with an arbitrary correlation profile: the
//! law of `vec H` is complex normal with mean `vec Hbar` and covariance
//! `Sigma` ([`channel::FadingLaw`]). All stochastic operations take explicit
//! seeds and are bit-reproducible; logs are natural internally and converted
//! to bits only at reporting boundaries.
//!
//! # Example
//!
//! ```rust
//! use mimo_capacity::prelude::*;
//!
//! // Water-filling on a known 2x2 channel.
//! let hbar = cmat_from_real(2, 2, &[2.0, 0.0, 0.0, 1.0]);
//! let noise = NoiseModel::new(1.0).unwrap();
//! let wf = waterfill(&hbar, &noise, 1.0).unwrap();
//! assert!((wf.capacity_bits - 2.3399).abs() < 1e-3);
//!
//! // Ergodic capacity of i.i.d. Rayleigh fading with an isotropic input.
//! let dims = ChannelDims::new(2, 2, 1).unwrap();
//! let law = FadingLaw::iid_rayleigh(&dims);
//! let s = InputCovariance::isotropic(2, 2.0);
//! let cap = ergodic_capacity(&law, &s, &noise, 100_000, 7).unwrap();
//! assert!(cap.bits_per_use > 1.0);
//! ```

pub mod channel;
pub mod error;
pub mod linalg;
pub mod mi;
pub mod rng;
pub mod statcsi;
pub mod tol;
pub mod types;
pub mod waterfill;

pub use error::{Error, Result};

/// Complex scalar used throughout: `Complex<f64>`.
pub type C64 = nalgebra::Complex<f64>;
/// Dynamically sized complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dynamically sized complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Build a complex matrix from a row-major slice of real values.
pub fn cmat_from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_slice(
        rows,
        cols,
        &data.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>(),
    )
}

/// Commonly used items re-exported in one place.
pub mod prelude {
    pub use crate::channel::{
        condition_on_side_info, log_density_known_channel, log_density_nocsi,
        log_density_partialcsi, output_cov_nocsi, sample_channel, FadingLaw, MarginalDensity,
        PartialCsiModel,
    };
    pub use crate::cmat_from_real;
    pub use crate::error::{Error, Result};
    pub use crate::mi::{
        ba_solve, kt_margin_profile, mi_nocsi, mi_partialcsi, BaOpts, BaSolution, InputGrid,
    };
    pub use crate::statcsi::{
        capacity_tradeoff_relation, ergodic_capacity, kt_check_fullcsi, optimize_covariance,
        KtCheck, OptimizeOpts, StatCsiSolution,
    };
    pub use crate::types::{
        CapacityEstimate, ChannelDims, DiscreteInputMeasure, InputCovariance, NoiseModel,
        PowerConstraint,
    };
    pub use crate::waterfill::{awgn_capacity_of, kt_margin_awgn, waterfill, WaterfillResult};
    pub use crate::{C64, CMat, CVec};
}
