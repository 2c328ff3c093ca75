use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpa_net::CpaNetwork;
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::{categorical_draws, unnormalized_weights, LatentDomain, WeightedLatentPool};

/// Where the Lipschitz estimator gets its latents from.
#[derive(Clone, Copy, Debug)]
pub enum LipschitzSampler<'a> {
    Standard(&'a LatentDomain),
    Magnet(&'a WeightedLatentPool),
}

/// Running maximum of `|A(z)|_F` over sampler draws, for several runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzTrace {
    /// `per_run[r][n - 1]` is the max over the first `n` draws of run `r`.
    pub per_run: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LipschitzTrace {
    pub fn runs(&self) -> usize {
        self.per_run.len()
    }

    pub fn n_max(&self) -> usize {
        self.mean.len()
    }
}

pub fn lipschitz_estimate(
    net: &CpaNetwork,
    sampler: LipschitzSampler<'_>,
    n_max: usize,
    runs: usize,
    seed: u64,
) -> Result<LipschitzTrace> {
    if n_max == 0 || runs == 0 {
        return Err(Error::invalid("lipschitz estimation needs n_max >= 1 and runs >= 1"));
    }
    let s = net.latent_dim();
    let pool_weights = match sampler {
        LipschitzSampler::Standard(domain) => {
            domain.validate(s)?;
            None
        }
        LipschitzSampler::Magnet(pool) => {
            if pool.latents().ncols() != s {
                return Err(Error::DimensionMismatch {
                    context: "pool latent dimension",
                    expected: s,
                    found: pool.latents().ncols(),
                });
            }
            Some(unnormalized_weights(&pool.log_weights()))
        }
    };

    let per_run: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::substream(seed, r as u64);
            let mut cache: HashMap<_, f64> = HashMap::new();
            let mut norm = |z: &[f64]| -> Result<f64> {
                let pattern = net.pattern_unchecked(z);
                if let Some(&v) = cache.get(&pattern) {
                    return Ok(v);
                }
                let v = net.affine_for_pattern(&pattern)?.a.norm();
                cache.insert(pattern, v);
                Ok(v)
            };
            let latents: Vec<Vec<f64>> = match (sampler, &pool_weights) {
                (LipschitzSampler::Standard(domain), _) => {
                    (0..n_max).map(|_| domain.draw(&mut rng)).collect()
                }
                (LipschitzSampler::Magnet(pool), Some(w)) => categorical_draws(w, n_max, &mut rng)
                    .into_iter()
                    .map(|i| pool.latent(i))
                    .collect(),
                _ => unreachable!(),
            };
            let mut best = f64::NEG_INFINITY;
            latents
                .iter()
                .map(|z| {
                    best = best.max(norm(z)?);
                    Ok(best)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut mean = vec![0.0; n_max];
    let mut std = vec![0.0; n_max];
    let nr = runs as f64;
    for n in 0..n_max {
        let m = per_run.iter().map(|r| r[n]).sum::<f64>() / nr;
        mean[n] = m;
        if runs > 1 {
            std[n] = (per_run.iter().map(|r| (r[n] - m).powi(2)).sum::<f64>() / (nr - 1.0)).sqrt();
        }
    }
    Ok(LipschitzTrace { per_run, mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, DVector};

    #[test]
    fn linear_net_is_constant() {
        let a = dmatrix![1.0, 2.0; 0.0, 1.0; 3.0, -1.0];
        let net = CpaNetwork::linear(a.clone(), DVector::zeros(3)).unwrap();
        let dom = LatentDomain::unit_box(2);
        let t = lipschitz_estimate(&net, LipschitzSampler::Standard(&dom), 20, 3, 1).unwrap();
        for run in &t.per_run {
            assert!(run.iter().all(|&v| v == a.norm()));
        }
        assert!(t.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn running_max_is_monotone() {
        let net = crate::model_io::make_toy(&crate::model_io::ToySpec::random_cpa(2, 3, vec![8, 8], 1)).unwrap();
        let dom = LatentDomain::symmetric_box(2, 2.0);
        let t = lipschitz_estimate(&net, LipschitzSampler::Standard(&dom), 200, 4, 9).unwrap();
        for run in &t.per_run {
            assert!(run.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
