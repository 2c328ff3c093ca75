//! Activation pattern and affine map of the region containing a latent point.

use magnet::{make_toy, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::random_cpa(2, 3, vec![8, 8], 11))?;
    for z in [[0.3, -0.2], [0.31, -0.2], [-1.5, 0.8]] {
        let region = net.region_affine(&z)?;
        println!("z = {z:?}");
        println!("  pattern {}", region.pattern);
        println!("  f(z)    {:?}", net.forward(&z)?.as_slice());
        println!("  A z + b {:?}", region.apply(&z).as_slice());
        print!("  A ={}", region.a);
    }
    Ok(())
}
