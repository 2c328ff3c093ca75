//! Differential entropy of the pushforward of a uniform latent.

use magnet::{make_toy, pushforward_entropy, LatentPrior, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::TwoRegion1D {
        slope_neg: 0.5,
        slope_pos: 1.0,
    })?;
    let prior = LatentPrior::UniformBox {
        lo: vec![-1.0],
        hi: vec![1.0],
    };
    let est = pushforward_entropy(&net, &prior, 200_000, 0)?;
    println!("entropy {:.5} +- {:.5}", est.entropy, est.std_error);
    println!("closed form {:.5}", 0.5 * 2f64.ln());
    println!("latent entropy {:.5}, mean log sigma {:.5}", est.latent_entropy, est.mean_log_sigma);
    Ok(())
}
