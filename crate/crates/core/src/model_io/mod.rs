//! Model files, toy generators and output writers.
//!
//! Models are stored as JSON:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "latent_dim": 1,
//!   "output_dim": 1,
//!   "layers": [
//!     { "rows": 1, "cols": 1, "weight_data": [1.0], "bias_data": [0.0],
//!       "activation": { "kind": "leaky_relu", "alpha": 0.5 } },
//!     { "rows": 1, "cols": 1, "weight_data": [1.0], "bias_data": [0.0],
//!       "activation": { "kind": "identity", "alpha": 1.0 } }
//!   ]
//! }
//! ```
//!
//! `weight_data` is row-major. Floats are written in shortest round-trip
//! form and parsed exactly, so a save/load cycle is bit-exact.

mod output;
mod toys;

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cpa_net::{Activation, CpaNetwork, Layer};
use crate::error::{Error, Result};

pub use output::{write_report, write_samples, write_samples_to, Report};
pub use toys::{make_toy, ToySpec};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weight_data: Vec<f64>,
    pub bias_data: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u64,
    pub latent_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerRecord>,
}

fn format_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ModelFormat {
        field: field.into(),
        message: message.into(),
    }
}

impl ModelFile {
    pub fn from_network(net: &CpaNetwork) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            latent_dim: net.latent_dim(),
            output_dim: net.output_dim(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    rows: l.output_dim(),
                    cols: l.input_dim(),
                    weight_data: l.weight().transpose().as_slice().to_vec(),
                    bias_data: l.bias().as_slice().to_vec(),
                    activation: l.activation(),
                })
                .collect(),
        }
    }

    /// Checks the schema invariants and builds the network.
    pub fn to_network(&self) -> Result<CpaNetwork> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(self.format_version));
        }
        if self.layers.is_empty() {
            return Err(format_err("layers", "at least one layer is required"));
        }
        let mut expected_cols = self.latent_dim;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            let at = |f: &str| format!("layers[{i}].{f}");
            if rec.cols != expected_cols {
                return Err(format_err(
                    at("cols"),
                    format!("expected {expected_cols} to chain with the previous layer, found {}", rec.cols),
                ));
            }
            if rec.weight_data.len() != rec.rows * rec.cols {
                return Err(format_err(
                    at("weight_data"),
                    format!(
                        "layer {i}: rows x cols = {} x {} but {} values given",
                        rec.rows,
                        rec.cols,
                        rec.weight_data.len()
                    ),
                ));
            }
            if rec.bias_data.len() != rec.rows {
                return Err(format_err(
                    at("bias_data"),
                    format!("layer {i}: expected {} values, found {}", rec.rows, rec.bias_data.len()),
                ));
            }
            if let Some(j) = rec.weight_data.iter().position(|v| !v.is_finite()) {
                return Err(format_err(format!("layers[{i}].weight_data[{j}]"), "non-finite value"));
            }
            if let Some(j) = rec.bias_data.iter().position(|v| !v.is_finite()) {
                return Err(format_err(format!("layers[{i}].bias_data[{j}]"), "non-finite value"));
            }
            let act = Activation::new(rec.activation.kind, rec.activation.alpha)
                .map_err(|e| format_err(at("activation"), e.to_string()))?;
            let weight = DMatrix::from_row_slice(rec.rows, rec.cols, &rec.weight_data);
            let bias = DVector::from_column_slice(&rec.bias_data);
            layers.push(Layer::new(weight, bias, act).map_err(|e| format_err(at("weight_data"), e.to_string()))?);
            expected_cols = rec.rows;
        }
        if expected_cols != self.output_dim {
            return Err(format_err(
                "output_dim",
                format!("declared {} but the last layer produces {expected_cols}", self.output_dim),
            ));
        }
        CpaNetwork::new(layers).map_err(|e| format_err("layers", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serialises");
        s.push('\n');
        s
    }

    /// Parses a model file, reporting the JSON path of the first schema violation.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format_err("<document>", e.to_string()))?;
        match value.get("format_version") {
            None => return Err(format_err("format_version", "missing")),
            Some(v) => match v.as_u64() {
                Some(FORMAT_VERSION) => {}
                Some(other) => return Err(Error::UnsupportedVersion(other)),
                None => return Err(format_err("format_version", "must be a non-negative integer")),
            },
        }
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            format_err(path, e.into_inner().to_string())
        })
    }
}

pub fn save_model(net: &CpaNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ModelFile::from_network(net).to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CpaNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_json(&text)?.to_network()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_region_json() -> String {
        ModelFile::from_network(&make_toy(&ToySpec::TwoRegion1D {
            slope_neg: 0.5,
            slope_pos: 1.0,
        })
        .unwrap())
        .to_json()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = make_toy(&ToySpec::random_cpa(2, 3, vec![8, 8], 7)).unwrap();
        let text = ModelFile::from_network(&net).to_json();
        let back = ModelFile::from_json(&text).unwrap().to_network().unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn data_length_mismatch_names_the_layer() {
        let mut mf: ModelFile = ModelFile::from_json(&two_region_json()).unwrap();
        mf.layers[1].weight_data.push(2.0);
        let err = ModelFile::from_json(&mf.to_json()).unwrap().to_network().unwrap_err();
        match err {
            Error::ModelFormat { field, message } => {
                assert_eq!(field, "layers[1].weight_data");
                assert!(message.contains("layer 1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_two_is_unsupported() {
        let text = two_region_json().replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(ModelFile::from_json(&text), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let text = two_region_json().replacen("\"rows\": 1", "\"rows\": \"one\"", 1);
        match ModelFile::from_json(&text) {
            Err(Error::ModelFormat { field, .. }) => assert_eq!(field, "layers[0].rows"),
            other => panic!("unexpected {other:?}"),
        }
        let text = two_region_json().replace("\"kind\": \"identity\"", "\"kind\": \"sigmoid\"");
        match ModelFile::from_json(&text) {
            Err(Error::ModelFormat { field, .. }) => assert_eq!(field, "layers[1].activation.kind"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn broken_chain_and_inconsistent_activation() {
        let mut mf = ModelFile::from_json(&two_region_json()).unwrap();
        mf.latent_dim = 2;
        assert!(matches!(mf.to_network(), Err(Error::ModelFormat { ref field, .. }) if field == "layers[0].cols"));
        let mut mf = ModelFile::from_json(&two_region_json()).unwrap();
        mf.layers[0].activation.alpha = -0.5;
        assert!(matches!(mf.to_network(), Err(Error::ModelFormat { ref field, .. }) if field == "layers[0].activation"));
    }
}
