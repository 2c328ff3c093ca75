//! Change-of-volume scalars `sqrt(det(A^T A))` of per-region slope matrices.
//!
//! Everything is stored as a natural log: products of many singular values
//! under/overflow quickly, and all downstream weighting works in log space.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A singular value `s` counts as zero when `s <= RANK_TOLERANCE * s_max`.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum VolumeMethod {
    ExactGram,
    ExactSvd,
    ProjectedTopK { k: usize, proj_seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogVolume {
    /// `ln sqrt(det(A^T A))`, or `-inf` when rank-deficient.
    pub log_sigma: f64,
    pub rank_deficient: bool,
    pub method: VolumeMethod,
}

impl LogVolume {
    fn from_singular_values(sv: &[f64], method: VolumeMethod) -> Self {
        let max = sv.iter().copied().fold(0.0_f64, f64::max);
        let deficient = max <= 0.0 || sv.iter().any(|&s| s <= RANK_TOLERANCE * max);
        LogVolume {
            log_sigma: if deficient {
                f64::NEG_INFINITY
            } else {
                sv.iter().map(|s| s.ln()).sum()
            },
            rank_deficient: deficient,
            method,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("slope matrix has non-finite entries"));
    }
    Ok(())
}

fn check_tall(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return Err(Error::invalid(format!(
            "slope matrix must be D x S with D >= S >= 1, got {} x {}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    a.singular_values().as_slice().to_vec()
}

/// Sum of the logs of all `min(rows, cols)` singular values of `m`, for a
/// matrix of any shape. `-inf` if any of them is numerically zero.
pub fn log_singular_product(m: &DMatrix<f64>) -> Result<LogVolume> {
    check_finite(m)?;
    Ok(LogVolume::from_singular_values(
        &singular_values(m),
        VolumeMethod::ExactSvd,
    ))
}

/// `ln sqrt(det(A^T A))` as the sum of log singular values of `A`.
pub fn volume_scalar(a: &DMatrix<f64>) -> Result<LogVolume> {
    check_tall(a)?;
    Ok(LogVolume::from_singular_values(
        &singular_values(a),
        VolumeMethod::ExactSvd,
    ))
}

/// Same quantity through the eigenvalues of the Gram matrix `A^T A`.
/// Squaring halves the usable precision; kept as a cross-check.
pub fn volume_scalar_gram(a: &DMatrix<f64>) -> Result<LogVolume> {
    check_tall(a)?;
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);
    let sv: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(LogVolume::from_singular_values(&sv, VolumeMethod::ExactGram))
}

/// A `d_proj x D` matrix with orthonormal rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    pub q: DMatrix<f64>,
    pub seed: u64,
}

impl ProjectionMatrix {
    pub fn d_proj(&self) -> usize {
        self.q.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.q.ncols()
    }
}

/// Orthonormalises a seeded standard-normal `d_proj x D` matrix.
pub fn make_projection(ambient_dim: usize, d_proj: usize, seed: u64) -> Result<ProjectionMatrix> {
    if d_proj == 0 || d_proj > ambient_dim {
        return Err(Error::invalid(format!(
            "projection dimension {d_proj} must be in 1..={ambient_dim}"
        )));
    }
    let mut rng = rng::substream(seed, rng::SEQUENTIAL_STREAM);
    let g = DMatrix::<f64>::from_fn(ambient_dim, d_proj, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    // fix the column signs so Q does not depend on Householder conventions
    let r = qr.r();
    for j in 0..d_proj {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(ProjectionMatrix {
        q: q.transpose(),
        seed,
    })
}

/// Sum of the logs of the `k` largest singular values of `Q A`.
pub fn projected_volume_scalar(
    a: &DMatrix<f64>,
    proj: &ProjectionMatrix,
    k: usize,
) -> Result<LogVolume> {
    check_tall(a)?;
    if proj.ambient_dim() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "projection ambient dimension",
            expected: a.nrows(),
            found: proj.ambient_dim(),
        });
    }
    if k == 0 || k > proj.d_proj().min(a.ncols()) {
        return Err(Error::invalid(format!(
            "k = {k} must be in 1..={}",
            proj.d_proj().min(a.ncols())
        )));
    }
    let sv = singular_values(&(&proj.q * a));
    let max = sv[0];
    let kept = &sv[..k];
    let mut lv = LogVolume::from_singular_values(
        kept,
        VolumeMethod::ProjectedTopK {
            k,
            proj_seed: proj.seed,
        },
    );
    if max <= 0.0 || kept.iter().any(|&s| s <= RANK_TOLERANCE * max) {
        lv.rank_deficient = true;
        lv.log_sigma = f64::NEG_INFINITY;
    }
    Ok(lv)
}

/// How pool construction turns a slope matrix into a log-volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolumePolicy {
    ExactSvd,
    /// Project outputs to `d_proj` dimensions and keep the top `k` singular values.
    ProjectedTopK { d_proj: usize, k: usize, seed: u64 },
}

impl VolumePolicy {
    /// `d_proj = min(D, 64)`, `k = S`.
    pub fn default_projected(output_dim: usize, latent_dim: usize, seed: u64) -> Self {
        let d_proj = output_dim.min(64);
        VolumePolicy::ProjectedTopK {
            d_proj,
            k: latent_dim.min(d_proj),
            seed,
        }
    }
}

/// A [`VolumePolicy`] bound to concrete dimensions, with its projection
/// matrix built once.
#[derive(Clone, Debug)]
pub struct VolumeEstimator {
    policy: VolumePolicy,
    projection: Option<(ProjectionMatrix, usize)>,
}

impl VolumeEstimator {
    pub fn new(policy: VolumePolicy, output_dim: usize, latent_dim: usize) -> Result<Self> {
        let projection = match policy {
            VolumePolicy::ExactSvd => None,
            VolumePolicy::ProjectedTopK { d_proj, k, seed } => {
                if k == 0 || k > d_proj.min(latent_dim) {
                    return Err(Error::invalid(format!(
                        "k = {k} must be in 1..={}",
                        d_proj.min(latent_dim)
                    )));
                }
                Some((make_projection(output_dim, d_proj, seed)?, k))
            }
        };
        Ok(VolumeEstimator { policy, projection })
    }

    pub fn policy(&self) -> VolumePolicy {
        self.policy
    }

    pub fn estimate(&self, a: &DMatrix<f64>) -> Result<LogVolume> {
        match &self.projection {
            None => volume_scalar(a),
            Some((q, k)) => projected_volume_scalar(a, q, *k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn padded_identity_is_an_isometry() {
        let mut a = DMatrix::zeros(5, 3);
        a.fill_diagonal(1.0);
        let lv = volume_scalar(&a).unwrap();
        assert!(lv.log_sigma.abs() < 1e-15);
        assert!(!lv.rank_deficient);
    }

    #[test]
    fn embedded_diagonal() {
        let a = dmatrix![2.0, 0.0; 0.0, 3.0; 0.0, 0.0];
        assert!((volume_scalar(&a).unwrap().log_sigma - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn gram_determinant_three_by_two() {
        // A^T A = [[2,1],[1,2]], det = 2*2 - 1*1 = 3
        let a = dmatrix![1.0, 1.0; 0.0, 1.0; 1.0, 0.0];
        let expected = 0.5 * 3f64.ln();
        assert!((volume_scalar(&a).unwrap().log_sigma - expected).abs() < 1e-14);
        assert!((volume_scalar_gram(&a).unwrap().log_sigma - expected).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0];
        let lv = volume_scalar(&a).unwrap();
        assert!(lv.rank_deficient);
        assert_eq!(lv.log_sigma, f64::NEG_INFINITY);
        assert!(volume_scalar(&DMatrix::zeros(3, 2)).unwrap().rank_deficient);
    }

    #[test]
    fn wide_matrix_is_rejected() {
        assert!(volume_scalar(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn projection_is_orthonormal_and_deterministic() {
        let q = make_projection(64, 16, 3).unwrap();
        let qqt = &q.q * q.q.transpose();
        assert!((qqt - DMatrix::identity(16, 16)).abs().max() < 1e-10);
        assert_eq!(q, make_projection(64, 16, 3).unwrap());

        let full = make_projection(4, 4, 11).unwrap();
        assert!((full.q.determinant().abs() - 1.0).abs() < 1e-10);
        assert!(make_projection(4, 5, 0).is_err());
    }

    #[test]
    fn top_one_singular_value() {
        let a = dmatrix![5.0, 0.0; 0.0, 2.0];
        let id = ProjectionMatrix {
            q: DMatrix::identity(2, 2),
            seed: 0,
        };
        let lv = projected_volume_scalar(&a, &id, 1).unwrap();
        assert!((lv.log_sigma - 5f64.ln()).abs() < 1e-14);
        assert_eq!(lv.method, VolumeMethod::ProjectedTopK { k: 1, proj_seed: 0 });
        assert!(projected_volume_scalar(&a, &id, 3).is_err());
    }

    #[test]
    fn square_projection_preserves_volume() {
        let a = dmatrix![1.0, 0.5; -0.3, 2.0; 0.7, 0.1; 0.0, 1.0];
        let q = make_projection(4, 4, 9).unwrap();
        let p = projected_volume_scalar(&a, &q, 2).unwrap();
        let e = volume_scalar(&a).unwrap();
        assert!((p.log_sigma - e.log_sigma).abs() < 1e-8);
    }
}
