use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cpa_net::{Activation, ActivationKind, CpaNetwork, Layer};
use crate::error::{Error, Result};
use crate::rng;

/// Small generators with known region structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToySpec {
    /// `1 -> 1`, slope `slope_neg` for `z < 0` and `slope_pos` for `z >= 0`.
    TwoRegion1D { slope_neg: f64, slope_pos: f64 },
    /// `2 -> 2` map of the unit square onto the triangle `(0,0), (1,0), (0,1)`.
    ///
    /// The half `v <= u` is mapped onto `(0,0), (1,0), (t, 1-t)` and the half
    /// `v > u` onto `(0,0), (t, 1-t), (0,1)` with `t = split`. The two pieces
    /// have volume scalars `1 - t` and `t`, so uniform latents give a
    /// pushforward density that differs between the two halves unless
    /// `split = 0.5`.
    TriangularSupport2D { split: f64 },
    /// Dense net with hidden widths `widths`; weights and biases are standard
    /// normal scaled by `1/sqrt(fan_in)`. `alpha` picks the hidden activation:
    /// 0 for ReLU, -1 for absolute value, > 0 for leaky ReLU.
    RandomCpa {
        latent_dim: usize,
        output_dim: usize,
        widths: Vec<usize>,
        seed: u64,
        alpha: f64,
    },
    /// `1 -> 1` continuous piecewise-linear map with the given increasing
    /// breakpoints and `breakpoints.len() + 1` slopes, passing through 0.
    Piecewise1D { breakpoints: Vec<f64>, slopes: Vec<f64> },
}

impl ToySpec {
    pub fn random_cpa(latent_dim: usize, output_dim: usize, widths: Vec<usize>, seed: u64) -> Self {
        ToySpec::RandomCpa {
            latent_dim,
            output_dim,
            widths,
            seed,
            alpha: 0.0,
        }
    }

    /// The biased triangle with split `1/3` (volume scalars `2/3` and `1/3`).
    pub fn biased_triangle() -> Self {
        ToySpec::TriangularSupport2D { split: 1.0 / 3.0 }
    }

    /// Three regions on `[-1, 1]` with slopes `0.5, 1, 4`; the steepest
    /// region `[0.9, 1]` holds 5% of the uniform latent mass.
    pub fn lipschitz_probe() -> Self {
        ToySpec::Piecewise1D {
            breakpoints: vec![0.0, 0.9],
            slopes: vec![0.5, 1.0, 4.0],
        }
    }
}

fn layer(rows: usize, cols: usize, w: &[f64], b: &[f64], act: Activation) -> Result<Layer> {
    Layer::new(
        DMatrix::from_row_slice(rows, cols, w),
        DVector::from_column_slice(b),
        act,
    )
}

pub fn make_toy(spec: &ToySpec) -> Result<CpaNetwork> {
    match spec {
        ToySpec::TwoRegion1D { slope_neg, slope_pos } => two_region(*slope_neg, *slope_pos),
        ToySpec::TriangularSupport2D { split } => triangle(*split),
        ToySpec::RandomCpa {
            latent_dim,
            output_dim,
            widths,
            seed,
            alpha,
        } => random_cpa(*latent_dim, *output_dim, widths, *seed, *alpha),
        ToySpec::Piecewise1D { breakpoints, slopes } => piecewise_1d(breakpoints, slopes),
    }
}

fn two_region(slope_neg: f64, slope_pos: f64) -> Result<CpaNetwork> {
    if slope_neg == 0.0 || slope_pos == 0.0 {
        return Err(Error::invalid(
            "two-region slopes must be non-zero (a zero slope collapses its region)",
        ));
    }
    let alpha = slope_neg / slope_pos;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(
            "two-region slopes must share a sign, otherwise the map folds",
        ));
    }
    let act = if alpha == 1.0 {
        Activation::IDENTITY
    } else {
        Activation::leaky_relu(alpha)?
    };
    CpaNetwork::new(vec![
        layer(1, 1, &[1.0], &[0.0], act)?,
        layer(1, 1, &[slope_pos], &[0.0], Activation::IDENTITY)?,
    ])
}

fn triangle(split: f64) -> Result<CpaNetwork> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::invalid("triangle split must lie in (0, 1)"));
    }
    let t = split;
    // hidden: relu(u), relu(-u), relu(v), relu(-v), relu(v - u)
    let hidden = layer(
        5,
        2,
        &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, -1.0, 1.0],
        &[0.0; 5],
        Activation::RELU,
    )?;
    // x = A1 z + c relu(v - u) with A1 = [[1, t-1], [0, 1-t]], c = (1-t, t)
    let out = layer(
        2,
        5,
        &[
            1.0, -1.0, t - 1.0, 1.0 - t, 1.0 - t, //
            0.0, 0.0, 1.0 - t, t - 1.0, t,
        ],
        &[0.0, 0.0],
        Activation::IDENTITY,
    )?;
    CpaNetwork::new(vec![hidden, out])
}

fn random_cpa(s: usize, d: usize, widths: &[usize], seed: u64, alpha: f64) -> Result<CpaNetwork> {
    if s == 0 || d == 0 || widths.contains(&0) {
        return Err(Error::invalid("random CPA dimensions must be positive"));
    }
    let act = match alpha {
        0.0 => Activation::RELU,
        -1.0 => Activation::ABS,
        1.0 => Activation::IDENTITY,
        a => Activation::new(ActivationKind::LeakyReLU, a)?,
    };
    let mut r = rng::substream(seed, rng::SEQUENTIAL_STREAM);
    let mut dims = vec![s];
    dims.extend_from_slice(widths);
    dims.push(d);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (l, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || -> f64 {
            let g: f64 = StandardNormal.sample(&mut r);
            g * scale
        };
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| draw()).collect();
        let b: Vec<f64> = (0..fan_out).map(|_| draw()).collect();
        let a = if l + 2 == dims.len() {
            Activation::IDENTITY
        } else {
            act
        };
        layers.push(layer(fan_out, fan_in, &w, &b, a)?);
    }
    CpaNetwork::new(layers)
}

fn piecewise_1d(breakpoints: &[f64], slopes: &[f64]) -> Result<CpaNetwork> {
    if slopes.len() != breakpoints.len() + 1 {
        return Err(Error::invalid(format!(
            "{} breakpoints need {} slopes, got {}",
            breakpoints.len(),
            breakpoints.len() + 1,
            slopes.len()
        )));
    }
    if slopes.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::invalid("piecewise slopes must be finite and non-zero"));
    }
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) || breakpoints.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("breakpoints must be finite and strictly increasing"));
    }
    let m = breakpoints.len();
    // hidden: relu(z), relu(-z), relu(z - t_j)
    let mut w = vec![1.0, -1.0];
    let mut b = vec![0.0, 0.0];
    for &t in breakpoints {
        w.push(1.0);
        b.push(-t);
    }
    let hidden = layer(m + 2, 1, &w, &b, Activation::RELU)?;
    let mut out_w = vec![slopes[0], -slopes[0]];
    for j in 0..m {
        out_w.push(slopes[j + 1] - slopes[j]);
    }
    // relu(z - t_j) contributes below z = 0 when t_j < 0; shift to pass through 0
    let offset: f64 = breakpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| (slopes[j + 1] - slopes[j]) * (-t).max(0.0))
        .sum();
    let out = layer(1, m + 2, &out_w, &[-offset], Activation::IDENTITY)?;
    CpaNetwork::new(vec![hidden, out])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::volume_scalar;
    use crate::model_io::ModelFile;

    #[test]
    fn two_region_volume_pair() {
        let net = make_toy(&ToySpec::TwoRegion1D {
            slope_neg: 0.5,
            slope_pos: 1.0,
        })
        .unwrap();
        let neg = volume_scalar(&net.region_affine(&[-0.3]).unwrap().a).unwrap();
        let pos = volume_scalar(&net.region_affine(&[0.3]).unwrap().a).unwrap();
        assert_eq!(neg.log_sigma, 0.5f64.ln());
        assert_eq!(pos.log_sigma, 0.0);
        assert_eq!(net.forward(&[-1.0]).unwrap()[0], -0.5);
        assert!(make_toy(&ToySpec::TwoRegion1D {
            slope_neg: 0.0,
            slope_pos: 1.0
        })
        .is_err());
    }

    #[test]
    fn random_cpa_is_deterministic() {
        let spec = ToySpec::random_cpa(2, 3, vec![8, 8], 7);
        let a = ModelFile::from_network(&make_toy(&spec).unwrap()).to_json();
        let b = ModelFile::from_network(&make_toy(&spec).unwrap()).to_json();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn triangle_maps_corners() {
        let t = 1.0 / 3.0;
        let net = make_toy(&ToySpec::TriangularSupport2D { split: t }).unwrap();
        let f = |u: f64, v: f64| net.forward(&[u, v]).unwrap();
        assert!((f(0.0, 0.0)).amax() < 1e-15);
        assert!((f(1.0, 0.0) - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-15);
        assert!((f(0.0, 1.0) - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-15);
        assert!((f(1.0, 1.0) - DVector::from_vec(vec![t, 1.0 - t])).amax() < 1e-15);
        let lower = volume_scalar(&net.region_affine(&[0.7, 0.2]).unwrap().a).unwrap();
        let upper = volume_scalar(&net.region_affine(&[0.2, 0.7]).unwrap().a).unwrap();
        assert!((lower.sigma() - (1.0 - t)).abs() < 1e-14);
        assert!((upper.sigma() - t).abs() < 1e-14);
    }

    #[test]
    fn piecewise_slopes() {
        let net = make_toy(&ToySpec::lipschitz_probe()).unwrap();
        for (z, slope) in [(-0.5, 0.5), (0.5, 1.0), (0.95, 4.0)] {
            assert!((net.region_affine(&[z]).unwrap().a[(0, 0)] - slope).abs() < 1e-15);
        }
        assert!(net.forward(&[0.0]).unwrap()[0].abs() < 1e-15);
        assert!((net.forward(&[1.0]).unwrap()[0] - (0.9 + 0.4)).abs() < 1e-14);

        let shifted = make_toy(&ToySpec::Piecewise1D {
            breakpoints: vec![-0.5],
            slopes: vec![2.0, 1.0],
        })
        .unwrap();
        assert!(shifted.forward(&[0.0]).unwrap()[0].abs() < 1e-15);
        assert!((shifted.forward(&[-1.0]).unwrap()[0] - (-0.5 - 1.0)).abs() < 1e-14);
    }
}
