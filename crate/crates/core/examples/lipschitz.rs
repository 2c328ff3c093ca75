//! Running-max Jacobian norm on a net whose steepest region is small in latent space.

use magnet::diagnostics::{lipschitz_estimate, LipschitzSampler};
use magnet::{build_pool, make_toy, LatentDomain, SamplerConfig, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::lipschitz_probe())?;
    let domain = LatentDomain::symmetric_box(1, 1.0);
    let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), 100_000, 0, 0))?;

    let a = lipschitz_estimate(&net, LipschitzSampler::Standard(&domain), 100, 200, 1)?;
    let b = lipschitz_estimate(&net, LipschitzSampler::Magnet(&pool), 100, 200, 1)?;
    println!("   n   standard mean/std   volume-weighted mean/std");
    for n in [1, 5, 10, 20, 50, 100] {
        println!(
            "{n:>4}   {:.3} / {:.3}       {:.3} / {:.3}",
            a.mean[n - 1], a.std[n - 1], b.mean[n - 1], b.std[n - 1]
        );
    }
    Ok(())
}
