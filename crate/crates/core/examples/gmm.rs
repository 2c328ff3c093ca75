//! GMM log-likelihood of standard and volume-weighted batches.

use magnet::diagnostics::{fit_gmm, GmmConfig};
use magnet::{build_pool, magnet_sample, make_toy, standard_sample, LatentDomain, SamplerConfig, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::biased_triangle())?;
    let domain = LatentDomain::unit_box(2);
    let standard = standard_sample(&net, &domain, 2000, 1)?;
    let pool = build_pool(&net, &SamplerConfig::new(domain, 100_000, 2000, 1))?;
    let weighted = magnet_sample(&net, &pool, 2000, 1)?;

    println!("components  standard  volume-weighted");
    for c in 2..=6 {
        let cfg = GmmConfig::new(c, 0);
        let a = fit_gmm(&standard.outputs, &cfg)?;
        let b = fit_gmm(&weighted.outputs, &cfg)?;
        println!("{c:>10}  {:>8.2}  {:>15.2}", a.log_likelihood, b.log_likelihood);
    }
    Ok(())
}
