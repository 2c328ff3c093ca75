use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rank-deficient slope matrix: {0}")]
    RankDeficient(String),

    #[error("point is not on the generated manifold (closest reconstruction error {residual:e})")]
    NotOnManifold { residual: f64 },

    #[error("folding detected: {regions} distinct regions map onto the same output point")]
    FoldingDetected { regions: usize },

    #[error("no finite resampling weight in a pool of {pool_size} latents")]
    NoValidWeights { pool_size: usize },

    #[error("rejection sampler stalled: {accepted} accepted out of {proposals} proposals")]
    AcceptanceCollapse { accepted: usize, proposals: usize },

    #[error("EM degenerate: {floored} of {components} components hit the variance floor")]
    EmDegenerate { floored: usize, components: usize },

    #[error("model file {field}: {message}")]
    ModelFormat { field: String, message: String },

    #[error("unsupported model format version {0} (expected 1)")]
    UnsupportedVersion(u64),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-parsable code used on the CLI diagnostic stream.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::RankDeficient(_) => "rank_deficient",
            Error::NotOnManifold { .. } => "not_on_manifold",
            Error::FoldingDetected { .. } => "folding_detected",
            Error::NoValidWeights { .. } => "no_valid_weights",
            Error::AcceptanceCollapse { .. } => "acceptance_collapse",
            Error::EmDegenerate { .. } => "em_degenerate",
            Error::ModelFormat { .. } => "model_format",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Io { .. } => "io",
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_)
                | Error::NoValidWeights { .. }
                | Error::AcceptanceCollapse { .. }
                | Error::FoldingDetected { .. }
                | Error::EmDegenerate { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
