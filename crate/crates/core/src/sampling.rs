//! Latent samplers: the standard baseline, volume-weighted resampling of a
//! latent pool, and the online rejection variant.
//!
//! The volume-weighted sampler draws a pool of `N` latents from the domain,
//! scores each with the log change-of-volume of its region, and resamples `K`
//! of them with replacement in proportion to `sigma`. Pushed through the
//! network, the resampled latents are uniform on the generated manifold.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cpa_net::{ActivationPattern, CpaNetwork};
use crate::error::{Error, Result};
use crate::geometry::{VolumeEstimator, VolumePolicy};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Region caches stop growing past this many entries per worker.
const REGION_CACHE_LIMIT: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentDomain {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Gaussian restricted to the standardised ball `|(z - mean) / std| <= radius`.
    TruncatedGaussian {
        mean: Vec<f64>,
        std: Vec<f64>,
        radius: f64,
    },
}

impl LatentDomain {
    pub fn unit_box(dim: usize) -> Self {
        LatentDomain::UniformBox {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn symmetric_box(dim: usize, half_width: f64) -> Self {
        LatentDomain::UniformBox {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        LatentDomain::Gaussian {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LatentDomain::UniformBox { lo, .. } => lo.len(),
            LatentDomain::Gaussian { mean, .. } | LatentDomain::TruncatedGaussian { mean, .. } => {
                mean.len()
            }
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let (a, b) = match self {
            LatentDomain::UniformBox { lo, hi } => (lo, hi),
            LatentDomain::Gaussian { mean, std } | LatentDomain::TruncatedGaussian { mean, std, .. } => {
                (mean, std)
            }
        };
        if a.len() != dim || b.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "latent domain",
                expected: dim,
                found: if a.len() != dim { a.len() } else { b.len() },
            });
        }
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent domain has non-finite parameters"));
        }
        match self {
            LatentDomain::UniformBox { lo, hi } => {
                if lo.iter().zip(hi).any(|(l, h)| l >= h) {
                    return Err(Error::invalid("uniform box needs lo < hi in every coordinate"));
                }
            }
            LatentDomain::Gaussian { std, .. } => {
                if std.iter().any(|s| *s <= 0.0) {
                    return Err(Error::invalid("gaussian std must be positive"));
                }
            }
            LatentDomain::TruncatedGaussian { std, radius, .. } => {
                if std.iter().any(|s| *s <= 0.0) {
                    return Err(Error::invalid("gaussian std must be positive"));
                }
                if !(*radius > 0.0) {
                    return Err(Error::invalid("truncation radius must be positive"));
                }
                if ball_mass(dim, *radius) < 1e-3 {
                    return Err(Error::invalid(format!(
                        "truncation radius {radius} keeps less than 0.1% of the gaussian mass"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes one draw into `z`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64]) {
        match self {
            LatentDomain::UniformBox { lo, hi } => {
                for ((zi, l), h) in z.iter_mut().zip(lo).zip(hi) {
                    *zi = l + (h - l) * rng.random::<f64>();
                }
            }
            LatentDomain::Gaussian { mean, std } => {
                for ((zi, m), s) in z.iter_mut().zip(mean).zip(std) {
                    let g: f64 = StandardNormal.sample(rng);
                    *zi = m + s * g;
                }
            }
            LatentDomain::TruncatedGaussian { mean, std, radius } => loop {
                let mut norm2 = 0.0;
                for zi in z.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    norm2 += g * g;
                    *zi = g;
                }
                if norm2 <= radius * radius {
                    for ((zi, m), s) in z.iter_mut().zip(mean).zip(std) {
                        *zi = m + s * *zi;
                    }
                    break;
                }
            },
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        self.draw_into(rng, &mut z);
        z
    }

    /// Log density of the domain's distribution at `z` (`-inf` outside its support).
    pub fn log_density(&self, z: &[f64]) -> f64 {
        match self {
            LatentDomain::UniformBox { lo, hi } => {
                let inside = z.iter().zip(lo).zip(hi).all(|((v, l), h)| v >= l && v <= h);
                if inside {
                    -lo.iter().zip(hi).map(|(l, h)| (h - l).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
            LatentDomain::Gaussian { mean, std } => gaussian_log_density(z, mean, std),
            LatentDomain::TruncatedGaussian { mean, std, radius } => {
                let r2: f64 = z
                    .iter()
                    .zip(mean)
                    .zip(std)
                    .map(|((v, m), s)| ((v - m) / s).powi(2))
                    .sum();
                if r2 <= radius * radius {
                    gaussian_log_density(z, mean, std) - ball_mass(z.len(), *radius).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Log density of the uniform distribution on the domain's support, when
    /// the support is bounded.
    fn uniform_log_density(&self) -> Option<f64> {
        match self {
            LatentDomain::UniformBox { lo, hi } => {
                Some(-lo.iter().zip(hi).map(|(l, h)| (h - l).ln()).sum::<f64>())
            }
            LatentDomain::Gaussian { .. } => None,
            LatentDomain::TruncatedGaussian { std, radius, .. } => {
                // volume of an axis-scaled ball
                let d = std.len() as f64;
                let log_unit_ball = 0.5 * d * std::f64::consts::PI.ln()
                    - statrs::function::gamma::ln_gamma(0.5 * d + 1.0);
                Some(-(log_unit_ball + d * radius.ln() + std.iter().map(|s| s.ln()).sum::<f64>()))
            }
        }
    }
}

fn gaussian_log_density(z: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    z.iter()
        .zip(mean)
        .zip(std)
        .map(|((v, m), s)| -0.5 * ((v - m) / s).powi(2) - s.ln() - 0.5 * LN_2PI)
        .sum()
}

/// Probability that a standard normal vector in `dim` dimensions has norm `<= radius`.
fn ball_mass(dim: usize, radius: f64) -> f64 {
    ChiSquared::new(dim as f64)
        .map(|c| c.cdf(radius * radius))
        .unwrap_or(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weighting {
    /// Probability proportional to `sigma`.
    Proportional,
    /// Probability proportional to `exp(sigma / temperature)`.
    Softmax { temperature: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub domain: LatentDomain,
    pub pool_size: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub volume_policy: VolumePolicy,
    pub weighting: Weighting,
    /// Multiply each weight by `u(z) / p(z)`, with `u` uniform on the domain's
    /// support, so non-uniform bounded domains act as the uniform one.
    #[serde(default)]
    pub density_correction: bool,
}

impl SamplerConfig {
    pub fn new(domain: LatentDomain, pool_size: usize, sample_count: usize, seed: u64) -> Self {
        SamplerConfig {
            domain,
            pool_size,
            sample_count,
            seed,
            volume_policy: VolumePolicy::ExactSvd,
            weighting: Weighting::Proportional,
            density_correction: false,
        }
    }
}

/// `N` latent draws with the log-volume of the region each one landed in.
#[derive(Clone, Debug)]
pub struct WeightedLatentPool {
    latents: DMatrix<f64>,
    log_sigmas: Vec<f64>,
    log_scores: Vec<f64>,
    rank_deficient: usize,
    config: SamplerConfig,
}

impl WeightedLatentPool {
    pub fn len(&self) -> usize {
        self.log_sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_sigmas.is_empty()
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// `N x S`, one latent per row.
    pub fn latents(&self) -> &DMatrix<f64> {
        &self.latents
    }

    pub fn latent(&self, i: usize) -> Vec<f64> {
        self.latents.row(i).iter().copied().collect()
    }

    pub fn log_sigmas(&self) -> &[f64] {
        &self.log_sigmas
    }

    pub fn rank_deficient_count(&self) -> usize {
        self.rank_deficient
    }

    /// Unnormalised log weights after the configured weighting rule.
    pub(crate) fn log_weights(&self) -> Vec<f64> {
        match self.config.weighting {
            Weighting::Proportional => self.log_scores.clone(),
            Weighting::Softmax { temperature } => self
                .log_scores
                .iter()
                .map(|&l| {
                    if l == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        l.exp() / temperature
                    }
                })
                .collect(),
        }
    }

    /// Resampling probabilities; sums to one.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = unnormalized_weights(&self.log_weights());
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    /// `(sum w)^2 / sum w^2`.
    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights())
    }

    /// Rebuilds the pool with every log-sigma shifted by `delta`; identical to
    /// scaling every volume by `exp(delta)`.
    pub fn with_shifted_log_sigmas(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for v in out.log_sigmas.iter_mut().chain(out.log_scores.iter_mut()) {
            *v += delta;
        }
        out
    }
}

/// `exp(l - max l)`; `-inf` entries map to zero weight.
pub(crate) fn unnormalized_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    log_w
        .iter()
        .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() })
        .collect()
}

pub fn effective_sample_size(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Standard,
    Magnet,
    Rejection,
    Exact,
}

/// Config echo and diagnostics attached to every batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMetadata {
    pub sampler: SamplerKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighting: Option<Weighting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_policy: Option<VolumePolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_sample_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposals: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<AcceptanceRule>,
    /// Set when the pool had fewer latents than samples requested.
    pub pool_smaller_than_sample: bool,
}

impl BatchMetadata {
    pub fn new(sampler: SamplerKind, seed: u64) -> Self {
        BatchMetadata {
            sampler,
            seed,
            pool_seed: None,
            pool_size: None,
            weighting: None,
            volume_policy: None,
            effective_sample_size: None,
            acceptance_rate: None,
            proposals: None,
            rule: None,
            pool_smaller_than_sample: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    /// `K x S`
    pub latents: DMatrix<f64>,
    /// `K x D`
    pub outputs: DMatrix<f64>,
    /// Pool index of each sample, `-1` for samplers without a pool.
    pub source_indices: Vec<i64>,
    pub metadata: BatchMetadata,
}

impl SampleBatch {
    /// Pushes `latents` (row-major, `K x S`) through the network.
    pub fn from_latents(
        net: &CpaNetwork,
        latents: Vec<f64>,
        source_indices: Vec<i64>,
        metadata: BatchMetadata,
    ) -> Self {
        let (s, d) = (net.latent_dim(), net.output_dim());
        let k = source_indices.len();
        debug_assert_eq!(latents.len(), k * s);
        let outputs: Vec<f64> = latents
            .par_chunks(s.max(1))
            .flat_map_iter(|z| net.forward_unchecked(z))
            .collect();
        SampleBatch {
            latents: DMatrix::from_row_slice(k, s, &latents),
            outputs: DMatrix::from_row_slice(k, d, &outputs),
            source_indices,
            metadata,
        }
    }

    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }

    pub fn latent(&self, i: usize) -> Vec<f64> {
        self.latents.row(i).iter().copied().collect()
    }

    pub fn output(&self, i: usize) -> Vec<f64> {
        self.outputs.row(i).iter().copied().collect()
    }
}

/// `K` i.i.d. draws from `domain`, pushed through `net`.
pub fn standard_sample(
    net: &CpaNetwork,
    domain: &LatentDomain,
    k: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let s = net.latent_dim();
    domain.validate(s)?;
    let latents = draw_latents(domain, s, k, seed);
    Ok(SampleBatch::from_latents(
        net,
        latents,
        vec![-1; k],
        BatchMetadata::new(SamplerKind::Standard, seed),
    ))
}

/// Row-major `count x dim` draws; draw `i` uses stream `i` of `seed`.
pub(crate) fn draw_latents(domain: &LatentDomain, dim: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; count * dim];
    if dim == 0 {
        return out;
    }
    out.par_chunks_mut(dim).enumerate().for_each(|(i, z)| {
        let mut r = rng::substream(seed, i as u64);
        domain.draw_into(&mut r, z);
    });
    out
}

/// Memoises log-volumes by activation pattern. `(A, b)` depend only on the
/// pattern, so cached and fresh values are bit-identical.
pub(crate) struct RegionVolumeCache<'a> {
    net: &'a CpaNetwork,
    estimator: &'a VolumeEstimator,
    cache: HashMap<ActivationPattern, f64>,
}

impl<'a> RegionVolumeCache<'a> {
    pub(crate) fn new(net: &'a CpaNetwork, estimator: &'a VolumeEstimator) -> Self {
        RegionVolumeCache {
            net,
            estimator,
            cache: HashMap::new(),
        }
    }

    pub(crate) fn log_sigma(&mut self, z: &[f64]) -> Result<f64> {
        let pattern = self.net.pattern_unchecked(z);
        if let Some(&v) = self.cache.get(&pattern) {
            return Ok(v);
        }
        let affine = self.net.affine_for_pattern(&pattern)?;
        let v = self.estimator.estimate(&affine.a)?.log_sigma;
        if self.cache.len() < REGION_CACHE_LIMIT {
            self.cache.insert(pattern, v);
        }
        Ok(v)
    }
}

/// Draws the latent pool and scores every draw with its region's log-volume.
pub fn build_pool(net: &CpaNetwork, config: &SamplerConfig) -> Result<WeightedLatentPool> {
    let s = net.latent_dim();
    config.domain.validate(s)?;
    if config.pool_size == 0 {
        return Err(Error::invalid("pool size must be positive"));
    }
    if let Weighting::Softmax { temperature } = config.weighting {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid("softmax temperature must be positive"));
        }
    }
    let correction = if config.density_correction {
        Some(config.domain.uniform_log_density().ok_or_else(|| {
            Error::invalid("density correction needs a bounded latent domain")
        })?)
    } else {
        None
    };
    let estimator = VolumeEstimator::new(config.volume_policy, net.output_dim(), s)?;
    let latents = draw_latents(&config.domain, s, config.pool_size, config.seed);

    let log_sigmas: Vec<f64> = latents
        .par_chunks(s)
        .map_init(
            || RegionVolumeCache::new(net, &estimator),
            |cache, z| cache.log_sigma(z),
        )
        .collect::<Result<_>>()?;

    let rank_deficient = log_sigmas.iter().filter(|v| **v == f64::NEG_INFINITY).count();
    if rank_deficient == log_sigmas.len() {
        return Err(Error::NoValidWeights {
            pool_size: log_sigmas.len(),
        });
    }
    let log_scores = match correction {
        None => log_sigmas.clone(),
        Some(log_u) => log_sigmas
            .iter()
            .zip(latents.chunks(s))
            .map(|(&l, z)| l + log_u - config.domain.log_density(z))
            .collect(),
    };

    Ok(WeightedLatentPool {
        latents: DMatrix::from_row_slice(config.pool_size, s, &latents),
        log_sigmas,
        log_scores,
        rank_deficient,
        config: config.clone(),
    })
}

/// Categorical draws with replacement by inverse CDF over unnormalised
/// weights. Ties go to the lowest index; zero-weight entries are never drawn.
pub(crate) fn categorical_draws<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cdf.push(acc);
    }
    (0..k)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

/// Resamples `k` latents from `pool` with probability given by the pool's
/// weighting rule.
pub fn magnet_sample(
    net: &CpaNetwork,
    pool: &WeightedLatentPool,
    k: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if pool.latents.ncols() != net.latent_dim() {
        return Err(Error::DimensionMismatch {
            context: "pool latent dimension",
            expected: net.latent_dim(),
            found: pool.latents.ncols(),
        });
    }
    let log_w = pool.log_weights();
    let w = unnormalized_weights(&log_w);
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::NoValidWeights {
            pool_size: pool.len(),
        });
    }
    // The inverse CDF walks the pool heaviest first (ties by index), so a
    // given seed makes comparable picks from pools of different sizes.
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| log_w[b].total_cmp(&log_w[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    let mut r = rng::substream(seed, rng::SEQUENTIAL_STREAM);
    let picks: Vec<usize> = categorical_draws(&sorted, k, &mut r)
        .into_iter()
        .map(|j| order[j])
        .collect();

    let s = net.latent_dim();
    let mut latents = Vec::with_capacity(k * s);
    for &i in &picks {
        latents.extend(pool.latents.row(i).iter());
    }
    let mut meta = BatchMetadata::new(SamplerKind::Magnet, seed);
    meta.pool_seed = Some(pool.config.seed);
    meta.pool_size = Some(pool.len());
    meta.weighting = Some(pool.config.weighting);
    meta.volume_policy = Some(pool.config.volume_policy);
    meta.effective_sample_size = Some(effective_sample_size(&w));
    meta.pool_smaller_than_sample = pool.len() < k;
    Ok(SampleBatch::from_latents(
        net,
        latents,
        picks.into_iter().map(|i| i as i64).collect(),
        meta,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// Accept iff `sigma_z / (sigma_z + sum_i sigma_i) >= alpha`.
    AsWritten,
    /// Accept iff `sigma_z / sigma_max >= alpha`, growing the envelope online.
    MaxNormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionConfig {
    pub rule: AcceptanceRule,
    pub volume_policy: VolumePolicy,
    /// Abort once this many proposals have been made with an acceptance rate
    /// below `min_acceptance`.
    pub abort_after: u64,
    pub min_acceptance: f64,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        RejectionConfig {
            rule: AcceptanceRule::MaxNormalized,
            volume_policy: VolumePolicy::ExactSvd,
            abort_after: 10_000_000,
            min_acceptance: 1e-6,
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Online rejection sampler. `warm_log_sigmas` are the logs of the running
/// volume set `{sigma_1, ..., sigma_N}`.
///
/// Under [`AcceptanceRule::MaxNormalized`], when a proposal's volume exceeds
/// the current envelope every accepted sample is kept with probability
/// `old_max / new_max`, which leaves the accepted set distributed as if the
/// larger envelope had been used from the start.
pub fn rejection_sample(
    net: &CpaNetwork,
    domain: &LatentDomain,
    warm_log_sigmas: &[f64],
    k: usize,
    seed: u64,
    config: &RejectionConfig,
) -> Result<SampleBatch> {
    let s = net.latent_dim();
    domain.validate(s)?;
    if warm_log_sigmas.is_empty() {
        return Err(Error::invalid("rejection sampling needs a non-empty warm set"));
    }
    let estimator = VolumeEstimator::new(config.volume_policy, net.output_dim(), s)?;
    let mut cache = RegionVolumeCache::new(net, &estimator);
    let mut r = rng::substream(seed, rng::SEQUENTIAL_STREAM);

    let log_warm_sum = log_sum_exp(warm_log_sigmas);
    let mut log_max = warm_log_sigmas
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut proposals: u64 = 0;
    let mut z = vec![0.0; s];
    while accepted.len() < k {
        if proposals >= config.abort_after
            && (accepted.len() as f64) < config.min_acceptance * proposals as f64
        {
            return Err(Error::AcceptanceCollapse {
                accepted: accepted.len(),
                proposals: proposals as usize,
            });
        }
        proposals += 1;
        domain.draw_into(&mut r, &mut z);
        let alpha: f64 = r.random();
        let lv = cache.log_sigma(&z)?;
        if lv == f64::NEG_INFINITY {
            continue;
        }
        let log_ratio = match config.rule {
            AcceptanceRule::AsWritten => lv - log_sum_exp(&[lv, log_warm_sum]),
            AcceptanceRule::MaxNormalized => {
                if lv > log_max {
                    if log_max > f64::NEG_INFINITY {
                        let keep = (log_max - lv).exp();
                        accepted.retain(|_| r.random::<f64>() < keep);
                    }
                    log_max = lv;
                }
                lv - log_max
            }
        };
        if log_ratio >= alpha.ln() {
            accepted.push(z.clone());
        }
    }

    let mut meta = BatchMetadata::new(SamplerKind::Rejection, seed);
    meta.acceptance_rate = Some(k as f64 / proposals.max(1) as f64);
    meta.proposals = Some(proposals);
    meta.rule = Some(config.rule);
    meta.volume_policy = Some(config.volume_policy);
    Ok(SampleBatch::from_latents(
        net,
        accepted.concat(),
        vec![-1; k],
        meta,
    ))
}
