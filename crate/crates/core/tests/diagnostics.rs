mod common;

use magnet::diagnostics::{
    default_epsilon, epsball_counts, gmm_loglik, lipschitz_estimate, uniformity_chi2, Binning,
    LipschitzSampler,
};
use magnet::rng::substream;
use magnet::sampling::{BatchMetadata, SampleBatch, SamplerKind};
use magnet::{build_pool, magnet_sample, make_toy, standard_sample, CpaNetwork, LatentDomain, SamplerConfig, ToySpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn two_region() -> CpaNetwork {
    make_toy(&ToySpec::TwoRegion1D {
        slope_neg: 0.5,
        slope_pos: 1.0,
    })
    .unwrap()
}

/// Latents whose region counts are an exact multinomial draw from the
/// image-volume masses (left 1/3, right 2/3).
fn exact_multinomial_batch(net: &CpaNetwork, k: usize, seed: u64) -> SampleBatch {
    let mut r = substream(seed, 0);
    let latents: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = r.random();
            let side: f64 = r.random();
            if side < 1.0 / 3.0 {
                -u
            } else {
                u
            }
        })
        .collect();
    SampleBatch::from_latents(net, latents, vec![-1; k], BatchMetadata::new(SamplerKind::Exact, seed))
}

#[test]
fn chi2_null_is_calibrated() {
    let net = two_region();
    let bins = Binning::Regions(common::two_region_bins(&net));
    let p: Vec<f64> = (0..200)
        .map(|seed| uniformity_chi2(&net, &exact_multinomial_batch(&net, 5000, seed), &bins).unwrap().p_value)
        .collect();
    // chi-square p-values for a df = 1 discrete statistic are only roughly
    // continuous at this K; KS at level 0.01
    let (d, ks_p) = common::ks_uniform(&p);
    assert!(ks_p > 0.01, "KS D = {d}, p = {ks_p}");
}

#[test]
fn chi2_null_is_calibrated_on_intervals() {
    let net = two_region();
    let bins = Binning::Intervals {
        edges: (0..=15).map(|i| -0.5 + 0.1 * i as f64).collect(),
        support: (-0.5, 1.0),
    };
    let p: Vec<f64> = (0..200)
        .map(|seed| uniformity_chi2(&net, &exact_multinomial_batch(&net, 3000, 1000 + seed), &bins).unwrap().p_value)
        .collect();
    let (d, ks_p) = common::ks_uniform(&p);
    assert!(ks_p > 0.01, "KS D = {d}, p = {ks_p}");
}

#[test]
fn standard_sampling_fails_uniformity_on_biased_net() {
    let net = two_region();
    let batch = standard_sample(&net, &LatentDomain::symmetric_box(1, 1.0), 50_000, 1).unwrap();
    let rep = uniformity_chi2(&net, &batch, &Binning::Regions(common::two_region_bins(&net))).unwrap();
    assert!(rep.p_value < 1e-6);
}

#[test]
fn grid_bins_on_the_triangle() {
    let net = make_toy(&ToySpec::biased_triangle()).unwrap();
    let domain = LatentDomain::unit_box(2);
    let edges: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let bins = Binning::Grid2D {
        x_edges: edges.clone(),
        y_edges: edges,
        support: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    };
    let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), 200_000, 20_000, 2)).unwrap();
    let good = uniformity_chi2(&net, &magnet_sample(&net, &pool, 20_000, 2).unwrap(), &bins).unwrap();
    assert!(good.p_value > 0.001, "{good:?}");
    let bad = uniformity_chi2(&net, &standard_sample(&net, &domain, 20_000, 2).unwrap(), &bins).unwrap();
    assert!(bad.p_value < 1e-6);
}

#[test]
fn epsball_on_uniform_points_is_poisson() {
    let id = CpaNetwork::linear(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
    let samples = standard_sample(&id, &LatentDomain::unit_box(2), 10_000, 3).unwrap().outputs;
    // reference grid inset by the radius so every ball lies inside the box
    let side = 40;
    let spacing = 0.02;
    let eps = spacing;
    let offset = 0.5 - spacing * (side - 1) as f64 / 2.0;
    assert!(offset >= eps);
    let reference = DMatrix::from_fn(side * side, 2, |i, j| {
        let (a, b) = (i / side, i % side);
        offset + spacing * if j == 0 { a } else { b } as f64
    });
    assert!((default_epsilon(&reference).unwrap() - spacing).abs() < 1e-12);
    let rep = epsball_counts(&reference, &samples, eps).unwrap();
    assert!((rep.dispersion - 1.0).abs() < 0.2, "dispersion {}", rep.dispersion);
}

#[test]
fn default_epsilon_matches_brute_force() {
    let id = CpaNetwork::linear(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
    let pts = standard_sample(&id, &LatentDomain::unit_box(2), 2000, 4).unwrap().outputs;
    let n = pts.nrows();
    let brute: f64 = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| ((pts[(i, 0)] - pts[(j, 0)]).powi(2) + (pts[(i, 1)] - pts[(j, 1)]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / n as f64;
    let fast = default_epsilon(&pts).unwrap();
    assert!((fast - brute).abs() < 1e-12);
    // Poisson process: mean NN distance is 1 / (2 sqrt(density))
    assert!((fast - 0.5 / (n as f64).sqrt()).abs() < 0.1 * fast);
}

#[test]
fn epsball_dispersion_is_lower_for_magnet_on_two_regions() {
    let net = two_region();
    let domain = LatentDomain::symmetric_box(1, 1.0);
    let reference = DMatrix::from_fn(300, 1, |i, _| -0.5 + 1.5 * (i as f64 + 0.5) / 300.0);
    let eps = default_epsilon(&reference).unwrap();
    let standard = standard_sample(&net, &domain, 10_000, 5).unwrap();
    let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), 100_000, 10_000, 6)).unwrap();
    let weighted = magnet_sample(&net, &pool, 10_000, 6).unwrap();
    let a = epsball_counts(&reference, &standard.outputs, eps).unwrap().dispersion;
    let b = epsball_counts(&reference, &weighted.outputs, eps).unwrap().dispersion;
    assert!(b < a, "magnet {b} vs standard {a}");
}

#[test]
fn gmm_prefers_concentrated_batches() {
    let net = make_toy(&ToySpec::biased_triangle()).unwrap();
    let domain = LatentDomain::unit_box(2);
    let standard = standard_sample(&net, &domain, 2000, 7).unwrap();
    let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), 100_000, 2000, 8)).unwrap();
    let weighted = magnet_sample(&net, &pool, 2000, 8).unwrap();
    for c in [2, 5, 8] {
        let a = gmm_loglik(&standard.outputs, c, 3, 1).unwrap();
        let b = gmm_loglik(&weighted.outputs, c, 3, 1).unwrap();
        assert!(a.log_likelihood > b.log_likelihood, "c = {c}");
        for w in a.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
    }
}

#[test]
fn lipschitz_mean_never_exceeds_the_grid_maximum() {
    let net = make_toy(&ToySpec::lipschitz_probe()).unwrap();
    let domain = LatentDomain::symmetric_box(1, 1.0);
    let grid_max = (0..=20_000)
        .map(|i| net.region_affine(&[-1.0 + i as f64 / 10_000.0]).unwrap().a.norm())
        .fold(0.0, f64::max);
    let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), 20_000, 0, 1)).unwrap();
    for sampler in [LipschitzSampler::Standard(&domain), LipschitzSampler::Magnet(&pool)] {
        let t = lipschitz_estimate(&net, sampler, 200, 50, 2).unwrap();
        assert!(t.mean.iter().all(|&m| m <= grid_max));
        assert!(t.per_run.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1])));
    }
}

#[test]
fn two_region_hitting_time_is_shorter_under_magnet() {
    // slopes 0.5 and 1 with the steep region on 10% of the latent interval:
    // the norm-1 region is hit with probability 0.1 per standard draw and
    // 0.1 / (0.1 + 0.45) under volume weighting
    let net = make_toy(&ToySpec::Piecewise1D {
        breakpoints: vec![0.8],
        slopes: vec![0.5, 1.0],
    })
    .unwrap();
    let domain = LatentDomain::symmetric_box(1, 1.0);
    let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), 50_000, 0, 3)).unwrap();
    let a = lipschitz_estimate(&net, LipschitzSampler::Standard(&domain), 10, 400, 4).unwrap();
    let b = lipschitz_estimate(&net, LipschitzSampler::Magnet(&pool), 10, 400, 4).unwrap();
    let hit = |t: &magnet::diagnostics::LipschitzTrace| t.per_run.iter().filter(|r| r[4] > 0.75).count() as f64 / 400.0;
    // P(hit within 5 draws): 1 - 0.9^5 = 0.41 vs 1 - (1 - 2/11)^5 = 0.63
    assert!((hit(&a) - 0.41).abs() < 0.08);
    assert!((hit(&b) - 0.63).abs() < 0.08);
}
