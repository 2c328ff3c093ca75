//! Volume scalar of a tall slope matrix, exact and by random projection.

use magnet::geometry::{make_projection, projected_volume_scalar, volume_scalar, volume_scalar_gram};
use nalgebra::DMatrix;

fn main() -> magnet::Result<()> {
    let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.0, 0.5]);
    let svd = volume_scalar(&a)?;
    let gram = volume_scalar_gram(&a)?;
    println!("log sigma (svd)  {:.12}", svd.log_sigma);
    println!("log sigma (gram) {:.12}", gram.log_sigma);
    println!("sigma            {:.12}", svd.sigma());

    for d_proj in [2, 3, 4] {
        let p = make_projection(4, d_proj, 7)?;
        let v = projected_volume_scalar(&a, &p, 2)?;
        println!("projected to {d_proj}: log sigma {:.6}", v.log_sigma);
    }

    // a rank-one map carries no 2-d volume
    let flat = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
    let v = volume_scalar(&flat)?;
    println!("rank deficient: {} (log sigma {})", v.rank_deficient, v.log_sigma);
    Ok(())
}
