//! Continuous piecewise-affine (CPA) generator networks.
//!
//! A [`CpaNetwork`] is a stack of dense layers, each followed by an
//! elementwise activation with two slopes `{alpha, 1}` split at zero. Inside
//! every region of the latent partition the whole network is a single affine
//! map `z -> A z + b`; the region is identified by the [`ActivationPattern`]
//! (one bit per hidden unit) and the map by [`RegionAffine`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    #[serde(rename = "relu")]
    ReLU,
    #[serde(rename = "leaky_relu")]
    LeakyReLU,
    #[serde(rename = "absolute_value")]
    AbsoluteValue,
    #[serde(rename = "identity")]
    Identity,
}

/// Elementwise activation `x -> x` for `x >= 0` and `x -> alpha * x` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub kind: ActivationKind,
    pub alpha: f64,
}

impl Activation {
    pub const RELU: Activation = Activation {
        kind: ActivationKind::ReLU,
        alpha: 0.0,
    };
    pub const ABS: Activation = Activation {
        kind: ActivationKind::AbsoluteValue,
        alpha: -1.0,
    };
    pub const IDENTITY: Activation = Activation {
        kind: ActivationKind::Identity,
        alpha: 1.0,
    };

    /// Validates that `alpha` is consistent with `kind`.
    pub fn new(kind: ActivationKind, alpha: f64) -> Result<Self> {
        let ok = match kind {
            ActivationKind::ReLU => alpha == 0.0,
            ActivationKind::AbsoluteValue => alpha == -1.0,
            ActivationKind::Identity => alpha == 1.0,
            ActivationKind::LeakyReLU => alpha.is_finite() && alpha > 0.0,
        };
        if ok {
            Ok(Activation { kind, alpha })
        } else {
            Err(Error::invalid(format!(
                "activation {kind:?} is inconsistent with alpha = {alpha}"
            )))
        }
    }

    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        Self::new(ActivationKind::LeakyReLU, alpha)
    }

    #[inline]
    fn is_identity(&self) -> bool {
        self.kind == ActivationKind::Identity
    }

    /// Slope selected by a pattern bit.
    #[inline]
    pub fn slope(&self, bit: bool) -> f64 {
        if bit {
            1.0
        } else {
            self.alpha
        }
    }

    #[inline]
    pub fn apply(&self, pre: f64) -> f64 {
        if pre >= 0.0 {
            pre
        } else {
            self.alpha * pre
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    weight: DMatrix<f64>,
    bias: DVector<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>, activation: Activation) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weight.nrows(),
                found: bias.len(),
            });
        }
        if weight.nrows() == 0 || weight.ncols() == 0 {
            return Err(Error::invalid("layer weight must be non-empty"));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer contains non-finite entries"));
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// `out = W x + b` without allocating.
    #[inline]
    fn preactivate(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(self.bias.as_slice());
        let rows = self.weight.nrows();
        for (j, &xj) in x.iter().enumerate() {
            let col = &self.weight.as_slice()[j * rows..(j + 1) * rows];
            for (o, &w) in out.iter_mut().zip(col) {
                *o += w * xj;
            }
        }
    }
}

/// Per-unit record of which side of the activation breakpoint each hidden
/// unit sits on. Bit = 1 iff the preactivation is `>= 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    widths: Vec<usize>,
    words: Vec<u64>,
}

impl ActivationPattern {
    fn with_widths(widths: Vec<usize>) -> Self {
        let total: usize = widths.iter().sum();
        ActivationPattern {
            widths,
            words: vec![0; total.div_ceil(64).max(1)],
        }
    }

    /// Builds a pattern from explicit per-layer bits.
    pub fn from_bits(bits: &[Vec<bool>]) -> Self {
        let mut p = Self::with_widths(bits.iter().map(Vec::len).collect());
        let mut idx = 0;
        for layer in bits {
            for &b in layer {
                p.set(idx, b);
                idx += 1;
            }
        }
        p
    }

    #[inline]
    fn set(&mut self, idx: usize, bit: bool) {
        if bit {
            self.words[idx / 64] |= 1 << (idx % 64);
        }
    }

    #[inline]
    fn get(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// Total number of bits (sum of hidden-layer widths).
    pub fn len(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.widths
    }

    /// Bit of `unit` in hidden layer `layer` (0-based).
    pub fn bit(&self, layer: usize, unit: usize) -> bool {
        assert!(unit < self.widths[layer], "unit index out of range");
        let offset: usize = self.widths[..layer].iter().sum();
        self.get(offset + unit)
    }

    pub fn layer_bits(&self, layer: usize) -> Vec<bool> {
        (0..self.widths[layer]).map(|u| self.bit(layer, u)).collect()
    }

    /// Number of positions where the two patterns disagree.
    pub fn hamming(&self, other: &ActivationPattern) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut idx = 0;
        for (l, &w) in self.widths.iter().enumerate() {
            if l > 0 {
                f.write_str("|")?;
            }
            for _ in 0..w {
                f.write_str(if self.get(idx) { "1" } else { "0" })?;
                idx += 1;
            }
        }
        Ok(())
    }
}

/// The affine map `z -> a z + b` valid on the region identified by `pattern`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionAffine {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub pattern: ActivationPattern,
}

impl RegionAffine {
    pub fn apply(&self, z: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(z) + &self.b
    }
}

/// Central-difference Jacobian together with the columns whose two probe
/// points fell in different regions.
#[derive(Clone, Debug)]
pub struct FdJacobian {
    pub jacobian: DMatrix<f64>,
    pub contaminated_columns: Vec<usize>,
}

impl FdJacobian {
    pub fn is_clean(&self) -> bool {
        self.contaminated_columns.is_empty()
    }
}

/// A dense CPA network `R^S -> R^D`. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct CpaNetwork {
    layers: Vec<Layer>,
}

impl CpaNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("network needs at least one layer"));
        };
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::invalid(format!(
                    "layer {} expects input dimension {} but layer {} produces {}",
                    i + 1,
                    pair[1].input_dim(),
                    i,
                    pair[0].output_dim()
                )));
            }
        }
        if !last.activation.is_identity() {
            return Err(Error::invalid("final layer activation must be Identity"));
        }
        let (s, d) = (layers[0].input_dim(), last.output_dim());
        if d < s {
            return Err(Error::invalid(format!(
                "output dimension {d} is smaller than latent dimension {s}"
            )));
        }
        Ok(CpaNetwork { layers })
    }

    /// A single affine layer `z -> a z + b`.
    pub fn linear(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::new(vec![Layer::new(a, b, Activation::IDENTITY)?])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::output_dim)
            .collect()
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                context: "latent vector",
                expected: self.latent_dim(),
                found: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent vector has non-finite entries"));
        }
        Ok(())
    }

    /// Runs the network, optionally recording the activation pattern.
    fn run(&self, z: &[f64], mut pattern: Option<&mut ActivationPattern>) -> Vec<f64> {
        let mut cur = z.to_vec();
        let mut next = Vec::new();
        let mut bit = 0;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.preactivate(&cur, &mut next);
            let act = layer.activation;
            for v in next.iter_mut() {
                if l < last {
                    if let Some(p) = pattern.as_deref_mut() {
                        p.set(bit, act.is_identity() || *v >= 0.0);
                    }
                    bit += 1;
                }
                *v = act.apply(*v);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Evaluates the generator at `z`.
    pub fn forward(&self, z: &[f64]) -> Result<DVector<f64>> {
        self.check_latent(z)?;
        Ok(DVector::from_vec(self.run(z, None)))
    }

    /// Evaluates without input validation; caller guarantees `z.len() == S`.
    pub(crate) fn forward_unchecked(&self, z: &[f64]) -> Vec<f64> {
        self.run(z, None)
    }

    pub fn activation_pattern(&self, z: &[f64]) -> Result<ActivationPattern> {
        self.check_latent(z)?;
        Ok(self.pattern_unchecked(z))
    }

    pub(crate) fn pattern_unchecked(&self, z: &[f64]) -> ActivationPattern {
        let mut p = ActivationPattern::with_widths(self.hidden_widths());
        self.run(z, Some(&mut p));
        p
    }

    /// Affine parameters of the region containing `z`.
    pub fn region_affine(&self, z: &[f64]) -> Result<RegionAffine> {
        let pattern = self.activation_pattern(z)?;
        self.affine_for_pattern(&pattern)
    }

    /// Affine parameters of the region identified by `pattern`.
    ///
    /// Accumulates `A <- diag(s) W A` and `b <- diag(s) (W b + b_l)` layer by
    /// layer, where `s` holds the slopes selected by the pattern. The result
    /// depends only on the pattern, so every latent point in a region gets a
    /// bit-identical `(A, b)`.
    pub fn affine_for_pattern(&self, pattern: &ActivationPattern) -> Result<RegionAffine> {
        if pattern.widths != self.hidden_widths() {
            return Err(Error::invalid(
                "activation pattern does not match the network's hidden widths",
            ));
        }
        let s = self.latent_dim();
        let mut a = DMatrix::<f64>::identity(s, s);
        let mut b = DVector::<f64>::zeros(s);
        let mut bit = 0;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut na = &layer.weight * &a;
            let mut nb = &layer.weight * &b + &layer.bias;
            if l < last {
                for r in 0..layer.output_dim() {
                    let slope = layer.activation.slope(pattern.get(bit));
                    bit += 1;
                    if slope != 1.0 {
                        na.row_mut(r).scale_mut(slope);
                        nb[r] *= slope;
                    }
                }
            }
            a = na;
            b = nb;
        }
        Ok(RegionAffine {
            a,
            b,
            pattern: pattern.clone(),
        })
    }

    /// Central-difference Jacobian with step `h`; columns whose probes straddle
    /// a region boundary are reported in [`FdJacobian::contaminated_columns`].
    pub fn jacobian_fd(&self, z: &[f64], h: f64) -> Result<FdJacobian> {
        self.check_latent(z)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        let (s, d) = (self.latent_dim(), self.output_dim());
        let mut jac = DMatrix::zeros(d, s);
        let mut contaminated = Vec::new();
        let mut plus = z.to_vec();
        let mut minus = z.to_vec();
        for j in 0..s {
            plus[j] = z[j] + h;
            minus[j] = z[j] - h;
            if self.pattern_unchecked(&plus) != self.pattern_unchecked(&minus) {
                contaminated.push(j);
            }
            let fp = self.run(&plus, None);
            let fm = self.run(&minus, None);
            for i in 0..d {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
            plus[j] = z[j];
            minus[j] = z[j];
        }
        Ok(FdJacobian {
            jacobian: jac,
            contaminated_columns: contaminated,
        })
    }
}
