//! Saves a network, loads it back and checks outputs match bit for bit.

use magnet::{load_model, make_toy, save_model, ToySpec};

fn main() -> magnet::Result<()> {
    let net = make_toy(&ToySpec::random_cpa(3, 5, vec![32, 32], 8))?;
    let path = std::env::temp_dir().join("magnet-round-trip.json");
    save_model(&net, &path)?;
    let back = load_model(&path)?;

    let z = [0.1, -0.4, 1.3];
    let (a, b) = (net.forward(&z)?, back.forward(&z)?);
    println!("saved to {}", path.display());
    println!("outputs identical: {}", a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    Ok(())
}
