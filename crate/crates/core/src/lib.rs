//! Volume-weighted latent sampling for continuous piecewise-affine generators.
//!
//! A CPA network is affine on each activation region of its latent space.
//! Weighting latent draws by the change of volume of their region and
//! resampling makes the generated samples uniform on the image manifold.
//! The crate also evaluates the pushforward density and entropy and ships the
//! diagnostics used to compare samplers.

pub mod cli;
pub mod cpa_net;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod model_io;
pub mod rng;
pub mod sampling;

pub use cpa_net::{Activation, ActivationKind, ActivationPattern, CpaNetwork, Layer, RegionAffine};
pub use density::{
    density_at_latent, density_at_point, pushforward_entropy, EntropyEstimate, LatentPrior,
    ManifoldDensityValue,
};
pub use error::{Error, Result};
pub use geometry::{volume_scalar, LogVolume, VolumeEstimator, VolumeMethod, VolumePolicy};
pub use model_io::{load_model, make_toy, save_model, ToySpec};
pub use sampling::{
    build_pool, magnet_sample, rejection_sample, standard_sample, AcceptanceRule, LatentDomain,
    RejectionConfig, SampleBatch, SamplerConfig, WeightedLatentPool, Weighting,
};
