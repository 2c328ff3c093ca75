//! Desk-scale checks that volume-weighted samples spread evenly over the
//! generated manifold.

mod epsball;
mod gmm;
mod lipschitz;
mod uniformity;

pub use epsball::{default_epsilon, epsball_counts, EpsBallReport, EPSILON_MULTIPLIERS};
pub use gmm::{fit_gmm, gmm_loglik, GmmConfig, GmmFitReport};
pub use lipschitz::{lipschitz_estimate, LipschitzSampler, LipschitzTrace};
pub use uniformity::{
    estimate_region_bins, uniformity_chi2, Binning, RegionBin, UniformityReport, MIN_EXPECTED,
};
