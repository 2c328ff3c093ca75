//! Rejection sampling with both acceptance rules.

use magnet::sampling::{AcceptanceRule, RejectionConfig};
use magnet::{build_pool, make_toy, rejection_sample, LatentDomain, SamplerConfig, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::biased_triangle())?;
    let domain = LatentDomain::unit_box(2);
    let warm = build_pool(&net, &SamplerConfig::new(domain.clone(), 1000, 0, 1))?;

    for rule in [AcceptanceRule::MaxNormalized, AcceptanceRule::AsWritten] {
        let cfg = RejectionConfig {
            rule,
            ..RejectionConfig::default()
        };
        let batch = rejection_sample(&net, &domain, warm.log_sigmas(), 10_000, 2, &cfg)?;
        let lower = batch.outputs.row_iter().filter(|x| x[1] < 2.0 * x[0]).count();
        println!(
            "{rule:?}: acceptance {:.3}, proposals {}, share below the split {:.4} (target 0.6667)",
            batch.metadata.acceptance_rate.unwrap_or(f64::NAN),
            batch.metadata.proposals.unwrap_or(0),
            lower as f64 / batch.len() as f64,
        );
    }
    Ok(())
}
