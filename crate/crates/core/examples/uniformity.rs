//! Chi-square uniformity test with region bins estimated from latent draws.

use magnet::diagnostics::{estimate_region_bins, uniformity_chi2, Binning};
use magnet::{build_pool, magnet_sample, make_toy, standard_sample, LatentDomain, SamplerConfig, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::random_cpa(2, 2, vec![4], 21))?;
    let domain = LatentDomain::symmetric_box(2, 1.0);
    let bins = estimate_region_bins(&net, &domain, 1_000_000, 5)?;
    println!("{} regions", bins.len());
    for b in &bins {
        println!("  {}  latent volume {:.4}  sigma {:.4}", b.pattern, b.latent_volume, b.sigma);
    }
    let bins = Binning::Regions(bins);

    let standard = standard_sample(&net, &domain, 20_000, 6)?;
    let pool = build_pool(&net, &SamplerConfig::new(domain, 250_000, 20_000, 6))?;
    let weighted = magnet_sample(&net, &pool, 20_000, 6)?;
    for (name, batch) in [("standard", &standard), ("volume-weighted", &weighted)] {
        let rep = uniformity_chi2(&net, batch, &bins)?;
        println!("{name:>16}: chi2 {:.1} on {} dof, p = {:.3e}", rep.statistic, rep.dof, rep.p_value);
    }
    Ok(())
}
