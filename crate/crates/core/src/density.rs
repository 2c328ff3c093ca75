//! Density of the generated distribution on the manifold, and its entropy.
//!
//! For a bijective CPA generator the density at `x = S(z)`, measured with the
//! `S`-dimensional volume on the manifold, is `p_z(z) / sigma(z)` where
//! `sigma` is the change of volume of the region containing `z`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpa_net::{ActivationPattern, CpaNetwork, RegionAffine};
use crate::error::{Error, Result};
use crate::geometry::{volume_scalar, VolumeEstimator, VolumePolicy};
use crate::rng;
use crate::sampling::{LatentDomain, RegionVolumeCache};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Default band for deciding that a reconstruction lands on `x`.
pub const ON_MANIFOLD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentPrior {
    StandardGaussian { dim: usize },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl LatentPrior {
    pub fn dim(&self) -> usize {
        match self {
            LatentPrior::StandardGaussian { dim } => *dim,
            LatentPrior::UniformBox { lo, .. } => lo.len(),
        }
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        match self {
            LatentPrior::StandardGaussian { .. } => {
                -0.5 * z.iter().map(|v| v * v).sum::<f64>() - 0.5 * z.len() as f64 * LN_2PI
            }
            LatentPrior::UniformBox { lo, hi } => {
                let inside = z.iter().zip(lo).zip(hi).all(|((v, l), h)| v >= l && v <= h);
                if inside {
                    -self.differential_entropy()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `(S/2) ln(2 pi e)` or `sum ln(hi - lo)`.
    pub fn differential_entropy(&self) -> f64 {
        match self {
            LatentPrior::StandardGaussian { dim } => 0.5 * *dim as f64 * (LN_2PI + 1.0),
            LatentPrior::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(l, h)| (h - l).ln()).sum(),
        }
    }

    pub fn as_domain(&self) -> LatentDomain {
        match self {
            LatentPrior::StandardGaussian { dim } => LatentDomain::standard_gaussian(*dim),
            LatentPrior::UniformBox { lo, hi } => LatentDomain::UniformBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "latent prior",
                expected: dim,
                found: self.dim(),
            });
        }
        self.as_domain().validate(dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldDensityValue {
    pub log_p: f64,
    pub region_pattern: ActivationPattern,
    pub latent_preimage: Vec<f64>,
}

impl ManifoldDensityValue {
    pub fn density(&self) -> f64 {
        self.log_p.exp()
    }
}

/// Density at `S(z)` with respect to the manifold's `S`-dimensional measure.
pub fn density_at_latent(
    net: &CpaNetwork,
    prior: &LatentPrior,
    z: &[f64],
) -> Result<ManifoldDensityValue> {
    prior.validate(net.latent_dim())?;
    let region = net.region_affine(z)?;
    let lv = volume_scalar(&region.a)?;
    if lv.rank_deficient {
        return Err(Error::RankDeficient(format!(
            "region {} collapses volume; density is undefined",
            region.pattern
        )));
    }
    Ok(ManifoldDensityValue {
        log_p: prior.log_density(z) - lv.log_sigma,
        region_pattern: region.pattern,
        latent_preimage: z.to_vec(),
    })
}

/// `A^+ (x - b)` for a full-column-rank region map.
fn affine_preimage(region: &RegionAffine, x: &DVector<f64>) -> Option<DVector<f64>> {
    let pinv = region.a.clone().pseudo_inverse(1e-14).ok()?;
    Some(pinv * (x - &region.b))
}

/// Density at an output point `x`, using caller-supplied candidate preimages.
///
/// Each candidate names a region; the region's affine inverse gives a
/// preimage `A^+ (x - b)`, which validates when it lies in the same region
/// and reconstructs `x` within `tol` (sup norm). At most one region may
/// validate.
pub fn density_at_point(
    net: &CpaNetwork,
    prior: &LatentPrior,
    x: &[f64],
    candidates: &[Vec<f64>],
    tol: f64,
) -> Result<ManifoldDensityValue> {
    if x.len() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "output point",
            expected: net.output_dim(),
            found: x.len(),
        });
    }
    let xv = DVector::from_column_slice(x);
    let mut best_residual = f64::INFINITY;
    let mut hits: Vec<(ActivationPattern, Vec<f64>)> = Vec::new();
    for cand in candidates {
        let region = net.region_affine(cand)?;
        let Some(pre) = affine_preimage(&region, &xv) else {
            continue;
        };
        let pre: Vec<f64> = pre.iter().copied().collect();
        let recon = net.forward(&pre)?;
        let residual = (recon - &xv).amax();
        best_residual = best_residual.min(residual);
        if residual <= tol
            && net.activation_pattern(&pre)? == region.pattern
            && !hits.iter().any(|(p, _)| *p == region.pattern)
        {
            hits.push((region.pattern, pre));
        }
    }
    match hits.len() {
        0 => Err(Error::NotOnManifold {
            residual: best_residual,
        }),
        1 => density_at_latent(net, prior, &hits[0].1),
        n => Err(Error::FoldingDetected { regions: n }),
    }
}

/// Closed-form log density on a region for a standard Gaussian prior:
/// `-1/2 |A^+ (x - b)|^2 - (S/2) ln 2pi - 1/2 ln det(A^T A)`.
pub fn gaussian_closed_form_log_density(region: &RegionAffine, x: &[f64]) -> Result<f64> {
    let s = region.a.ncols();
    let xv = DVector::from_column_slice(x);
    let pre = affine_preimage(region, &xv)
        .ok_or_else(|| Error::RankDeficient("pseudo-inverse failed".into()))?;
    let gram: DMatrix<f64> = region.a.transpose() * &region.a;
    let det = gram.determinant();
    if !(det > 0.0) {
        return Err(Error::RankDeficient("det(A^T A) is not positive".into()));
    }
    Ok(-0.5 * pre.norm_squared() - 0.5 * s as f64 * LN_2PI - 0.5 * det.ln())
}

/// Closed-form density on a region for a uniform prior on a box of volume
/// `box_volume`: `1 / (sqrt(det(A^T A)) * box_volume)`.
pub fn uniform_closed_form_density(region: &RegionAffine, box_volume: f64) -> Result<f64> {
    let gram: DMatrix<f64> = region.a.transpose() * &region.a;
    let det = gram.determinant();
    if !(det > 0.0) {
        return Err(Error::RankDeficient("det(A^T A) is not positive".into()));
    }
    Ok(1.0 / (det.sqrt() * box_volume))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub entropy: f64,
    /// Monte-Carlo standard error of `entropy`.
    pub std_error: f64,
    pub latent_entropy: f64,
    pub mean_log_sigma: f64,
    pub draws: usize,
    /// Draws that landed in rank-deficient regions and were dropped.
    pub excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Differential entropy of the generated distribution: the latent entropy plus
/// the latent-mass-weighted average log volume, estimated by Monte Carlo.
pub fn pushforward_entropy(
    net: &CpaNetwork,
    prior: &LatentPrior,
    mc_samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    let s = net.latent_dim();
    prior.validate(s)?;
    if mc_samples == 0 {
        return Err(Error::invalid("entropy needs at least one Monte-Carlo draw"));
    }
    let domain = prior.as_domain();
    let estimator = VolumeEstimator::new(VolumePolicy::ExactSvd, net.output_dim(), s)?;
    let logs: Vec<f64> = (0..mc_samples)
        .into_par_iter()
        .map_init(
            || (RegionVolumeCache::new(net, &estimator), vec![0.0; s]),
            |(cache, z), i| {
                let mut r = rng::substream(seed, i as u64);
                domain.draw_into(&mut r, z);
                cache.log_sigma(z)
            },
        )
        .collect::<Result<_>>()?;
    let finite: Vec<f64> = logs.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = logs.len() - finite.len();
    if finite.is_empty() {
        return Err(Error::RankDeficient(
            "every Monte-Carlo draw landed in a rank-deficient region".into(),
        ));
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = if finite.len() > 1 {
        finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let frac = excluded as f64 / mc_samples as f64;
    let latent_entropy = prior.differential_entropy();
    Ok(EntropyEstimate {
        entropy: latent_entropy + mean,
        std_error: (var / n).sqrt(),
        latent_entropy,
        mean_log_sigma: mean,
        draws: mc_samples,
        excluded,
        warning: (frac > 0.01).then(|| {
            format!(
                "{:.2}% of draws fell in rank-deficient regions and were excluded",
                100.0 * frac
            )
        }),
    })
}
