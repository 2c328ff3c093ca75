//! Epsilon-ball counts around uniform reference points on the triangle.

use magnet::diagnostics::{default_epsilon, epsball_counts, EPSILON_MULTIPLIERS};
use magnet::rng::substream;
use magnet::{build_pool, magnet_sample, make_toy, standard_sample, LatentDomain, SamplerConfig, ToySpec};
use nalgebra::DMatrix;
use rand::Rng;

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::biased_triangle())?;
    let domain = LatentDomain::unit_box(2);

    let mut r = substream(3, 0);
    let mut pts = Vec::new();
    while pts.len() < 2 * 2000 {
        let (x, y): (f64, f64) = (r.random(), r.random());
        if x + y <= 1.0 {
            pts.extend([x, y]);
        }
    }
    let reference = DMatrix::from_row_slice(2000, 2, &pts);
    let eps = default_epsilon(&reference)?;

    let standard = standard_sample(&net, &domain, 10_000, 4)?;
    let pool = build_pool(&net, &SamplerConfig::new(domain, 100_000, 10_000, 4))?;
    let weighted = magnet_sample(&net, &pool, 10_000, 4)?;

    println!("eps = {eps:.5}");
    for m in EPSILON_MULTIPLIERS {
        let a = epsball_counts(&reference, &standard.outputs, m * eps)?;
        let b = epsball_counts(&reference, &weighted.outputs, m * eps)?;
        println!("{m:>4} eps: dispersion standard {:.3}, volume-weighted {:.3}", a.dispersion, b.dispersion);
    }
    Ok(())
}
