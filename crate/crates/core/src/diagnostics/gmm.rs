//! Diagonal-covariance Gaussian mixtures fitted by EM.
//!
//! Used only ordinally: batches that concentrate around a few modes reach a
//! higher likelihood for the same number of components than batches spread
//! uniformly over the same support.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub n_components: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
    pub var_floor: f64,
    pub seed: u64,
}

impl GmmConfig {
    pub fn new(n_components: usize, seed: u64) -> Self {
        GmmConfig {
            n_components,
            restarts: 5,
            max_iter: 100,
            tol: 1e-3,
            var_floor: 1e-6,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmFitReport {
    pub n_components: usize,
    /// Total log-likelihood of the best restart.
    pub log_likelihood: f64,
    pub mean_log_likelihood: f64,
    pub n_restarts: usize,
    /// EM converged and no more than half of the components hit the variance floor.
    pub converged: bool,
    pub degenerate_components: usize,
    pub iterations: usize,
    /// Total log-likelihood after each EM iteration of the best restart.
    pub trace: Vec<f64>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

struct Mixture {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

/// Per-iteration constants: `ln w_c - 1/2 (d ln 2pi + sum ln var)` and `1 / var`.
struct Prepared {
    offsets: Vec<f64>,
    inv_vars: Vec<f64>,
    means: Vec<f64>,
}

impl Mixture {
    fn prepare(&self) -> Prepared {
        let d = self.means[0].len();
        Prepared {
            offsets: (0..self.means.len())
                .map(|c| {
                    self.log_weights[c]
                        - 0.5 * (d as f64 * LN_2PI + self.vars[c].iter().map(|v| v.ln()).sum::<f64>())
                })
                .collect(),
            inv_vars: self.vars.iter().flatten().map(|v| 1.0 / v).collect(),
            means: self.means.concat(),
        }
    }
}

impl Prepared {
    /// `ln w_c + ln N(x; mu_c, diag var_c)` for every component.
    fn joint_logs(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for (c, o) in out.iter_mut().enumerate() {
            let (m, iv) = (&self.means[c * d..(c + 1) * d], &self.inv_vars[c * d..(c + 1) * d]);
            let mut q = 0.0;
            for j in 0..d {
                let t = x[j] - m[j];
                q += t * t * iv[j];
            }
            *o = self.offsets[c] - 0.5 * q;
        }
    }
}

/// k-means++ style seeding: first centre uniform, the rest with probability
/// proportional to squared distance from the nearest chosen centre.
fn seed_centres<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centres = vec![rows[rng.random_range(0..rows.len())].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|x| sq(x, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&v| {
                    acc += v;
                    acc > u
                })
                .unwrap_or(rows.len() - 1)
        } else {
            rng.random_range(0..rows.len())
        };
        centres.push(rows[pick].clone());
        let c = centres.last().unwrap();
        for (v, x) in d2.iter_mut().zip(rows) {
            *v = v.min(sq(x, c));
        }
    }
    centres
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Fit {
    mixture: Mixture,
    trace: Vec<f64>,
    em_converged: bool,
    floored: Vec<bool>,
}

fn fit_once(rows: &[Vec<f64>], cfg: &GmmConfig, restart: usize) -> Fit {
    let n = rows.len();
    let d = rows[0].len();
    let k = cfg.n_components;
    let mut r = rng::substream(cfg.seed, restart as u64);

    let mut global_var = vec![0.0; d];
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    for x in rows {
        for j in 0..d {
            global_var[j] += (x[j] - mean[j]).powi(2) / n as f64;
        }
    }
    for v in &mut global_var {
        *v = v.max(cfg.var_floor);
    }
    let mut mix = Mixture {
        log_weights: vec![-(k as f64).ln(); k],
        means: seed_centres(rows, k, &mut r),
        vars: vec![global_var; k],
    };

    let mut trace = Vec::new();
    let mut floored = vec![false; k];
    let mut em_converged = false;
    let mut joint = vec![0.0; k];
    let mut nk = vec![0.0; k];
    let mut s1 = vec![0.0; k * d];
    let mut s2 = vec![0.0; k * d];
    for _ in 0..cfg.max_iter {
        // E-step, accumulating the sufficient statistics as we go
        let prep = mix.prepare();
        nk.fill(0.0);
        s1.fill(0.0);
        s2.fill(0.0);
        let mut ll = 0.0;
        for x in rows {
            prep.joint_logs(x, &mut joint);
            let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in joint.iter_mut() {
                *j = (*j - max).exp();
                total += *j;
            }
            ll += max + total.ln();
            for c in 0..k {
                let w = joint[c] / total;
                nk[c] += w;
                // second moments about the previous mean to avoid cancellation
                for j in 0..d {
                    let t = x[j] - prep.means[c * d + j];
                    s1[c * d + j] += w * x[j];
                    s2[c * d + j] += w * t * t;
                }
            }
        }
        if let Some(&prev) = trace.last() {
            if (ll - prev) / (n as f64) < cfg.tol {
                trace.push(ll);
                em_converged = true;
                break;
            }
        }
        trace.push(ll);

        // M-step
        for c in 0..k {
            if nk[c] <= 1e-12 {
                mix.log_weights[c] = f64::NEG_INFINITY;
                continue;
            }
            mix.log_weights[c] = (nk[c] / n as f64).ln();
            floored[c] = false;
            for j in 0..d {
                let mu = s1[c * d + j] / nk[c];
                let shift = mu - mix.means[c][j];
                let v = s2[c * d + j] / nk[c] - shift * shift;
                if v <= cfg.var_floor {
                    floored[c] = true;
                }
                mix.means[c][j] = mu;
                mix.vars[c][j] = v.max(cfg.var_floor);
            }
        }
    }
    Fit {
        mixture: mix,
        trace,
        em_converged,
        floored,
    }
}

/// Best-of-restarts EM fit.
pub fn fit_gmm(samples: &DMatrix<f64>, cfg: &GmmConfig) -> Result<GmmFitReport> {
    let n = samples.nrows();
    if cfg.n_components == 0 || cfg.restarts == 0 {
        return Err(Error::invalid("GMM needs at least one component and one restart"));
    }
    if n <= cfg.n_components {
        return Err(Error::invalid(format!(
            "GMM with {} components needs more than {} samples",
            cfg.n_components, n
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("GMM samples contain non-finite values"));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| samples.row(i).iter().copied().collect()).collect();
    let fits: Vec<Fit> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| fit_once(&rows, cfg, r))
        .collect();
    // ties go to the earliest restart
    let best = fits
        .into_iter()
        .reduce(|a, b| {
            if b.trace.last().unwrap() > a.trace.last().unwrap() {
                b
            } else {
                a
            }
        })
        .expect("at least one restart");
    let ll = *best.trace.last().unwrap();
    let degenerate = best.floored.iter().filter(|&&f| f).count();
    Ok(GmmFitReport {
        n_components: cfg.n_components,
        log_likelihood: ll,
        mean_log_likelihood: ll / n as f64,
        n_restarts: cfg.restarts,
        converged: best.em_converged && 2 * degenerate <= cfg.n_components,
        degenerate_components: degenerate,
        iterations: best.trace.len(),
        trace: best.trace,
        weights: best.mixture.log_weights.iter().map(|l| l.exp()).collect(),
        means: best.mixture.means,
        variances: best.mixture.vars,
    })
}

/// [`fit_gmm`] with the default floor, iteration cap and tolerance.
pub fn gmm_loglik(
    samples: &DMatrix<f64>,
    n_components: usize,
    restarts: usize,
    seed: u64,
) -> Result<GmmFitReport> {
    fit_gmm(
        samples,
        &GmmConfig {
            restarts,
            ..GmmConfig::new(n_components, seed)
        },
    )
}
