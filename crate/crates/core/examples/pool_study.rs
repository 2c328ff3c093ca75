//! How the pool size affects weight concentration and uniformity.

use magnet::diagnostics::{uniformity_chi2, Binning, RegionBin};
use magnet::{build_pool, magnet_sample, make_toy, LatentDomain, SamplerConfig, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::biased_triangle())?;
    let domain = LatentDomain::unit_box(2);
    let bins = Binning::Regions(
        [[0.7, 0.2], [0.2, 0.7]]
            .iter()
            .map(|z| {
                let region = net.region_affine(z)?;
                let sigma = magnet::volume_scalar(&region.a)?.sigma();
                Ok(RegionBin {
                    pattern: region.pattern,
                    latent_volume: 0.5,
                    sigma,
                })
            })
            .collect::<magnet::Result<_>>()?,
    );

    println!("     N   ESS/N   max weight   p-value");
    for n in [100, 1000, 10_000, 100_000] {
        let pool = build_pool(&net, &SamplerConfig::new(domain.clone(), n, 20_000, 3))?;
        let batch = magnet_sample(&net, &pool, 20_000, 3)?;
        let p = uniformity_chi2(&net, &batch, &bins)?.p_value;
        let max_w = pool.weights().into_iter().fold(0.0, f64::max);
        println!(
            "{n:>6}   {:.3}   {max_w:.2e}     {p:.3}",
            pool.effective_sample_size() / n as f64
        );
    }
    Ok(())
}
