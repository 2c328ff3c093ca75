//! Density of the generated distribution, from a latent and from an output point.

use magnet::density::{density_at_latent, density_at_point, ON_MANIFOLD_TOL};
use magnet::{make_toy, LatentPrior, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::random_cpa(2, 3, vec![16, 16], 5))?;
    let prior = LatentPrior::StandardGaussian { dim: 2 };
    let z = [0.4, -0.7];
    let at_latent = density_at_latent(&net, &prior, &z)?;
    println!("log p at S(z)   {:.10}", at_latent.log_p);

    let x: Vec<f64> = net.forward(&z)?.iter().copied().collect();
    // any latent in the right region works as a candidate
    let candidates = vec![vec![0.0, 0.0], vec![0.41, -0.69], vec![-1.0, 1.0]];
    let at_point = density_at_point(&net, &prior, &x, &candidates, ON_MANIFOLD_TOL)?;
    println!("log p at x      {:.10}", at_point.log_p);
    println!("preimage        {:?}", at_point.latent_preimage);

    match density_at_point(&net, &prior, &[9.0, 9.0, 9.0], &candidates, ON_MANIFOLD_TOL) {
        Ok(v) => println!("unexpected hit {}", v.log_p),
        Err(e) => println!("off the manifold: {e}"),
    }
    Ok(())
}
