//! Standard vs volume-weighted sampling on a 1-d net with slopes 1/2 and 1.
//!
//! The left region is half the latent mass but a third of the image length.

use magnet::{build_pool, magnet_sample, make_toy, standard_sample, LatentDomain, SamplerConfig, ToySpec};

fn left_share(xs: &nalgebra::DMatrix<f64>) -> f64 {
    xs.column(0).iter().filter(|&&x| x < 0.0).count() as f64 / xs.nrows() as f64
}

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::TwoRegion1D {
        slope_neg: 0.5,
        slope_pos: 1.0,
    })?;
    let domain = LatentDomain::symmetric_box(1, 1.0);
    let cfg = SamplerConfig::new(domain.clone(), 100_000, 20_000, 42);

    let standard = standard_sample(&net, &domain, cfg.sample_count, cfg.seed)?;
    let pool = build_pool(&net, &cfg)?;
    let weighted = magnet_sample(&net, &pool, cfg.sample_count, cfg.seed)?;

    println!("pool ESS     {:.0} of {}", pool.effective_sample_size(), pool.len());
    println!("standard     left share {:.4}", left_share(&standard.outputs));
    println!("volume-wtd   left share {:.4} (target 0.3333)", left_share(&weighted.outputs));
    Ok(())
}
