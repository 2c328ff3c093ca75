use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::SampleBatch;

/// Structured run report. Carries the full resolved config (seeds included)
/// so the run can be replayed; nothing time-dependent is recorded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(command: impl Into<String>, config: impl Serialize, results: impl Serialize) -> Self {
        Report {
            command: command.into(),
            config: serde_json::to_value(config).expect("config serialises"),
            results: serde_json::to_value(results).expect("results serialise"),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

/// CSV with header `z_0..z_{S-1},x_0..x_{D-1},source_index`; reals carry 17
/// significant digits.
pub fn write_samples_to<W: Write>(batch: &SampleBatch, w: W) -> std::io::Result<()> {
    let (s, d) = (batch.latents.ncols(), batch.outputs.ncols());
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = (0..s)
        .map(|i| format!("z_{i}"))
        .chain((0..d).map(|i| format!("x_{i}")))
        .chain(std::iter::once("source_index".to_string()))
        .collect();
    out.write_record(&header)?;
    for k in 0..batch.len() {
        let record: Vec<String> = batch
            .latents
            .row(k)
            .iter()
            .chain(batch.outputs.row(k).iter())
            .map(|v| format!("{v:.16e}"))
            .chain(std::iter::once(batch.source_indices[k].to_string()))
            .collect();
        out.write_record(&record)?;
    }
    out.flush()
}

pub fn write_samples(batch: &SampleBatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_samples_to(batch, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::{make_toy, ToySpec};
    use crate::sampling::{standard_sample, LatentDomain};

    #[test]
    fn csv_shape() {
        let net = make_toy(&ToySpec::biased_triangle()).unwrap();
        let b = standard_sample(&net, &LatentDomain::unit_box(2), 3, 1).unwrap();
        let mut buf = Vec::new();
        write_samples_to(&b, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "z_0,z_1,x_0,x_1,source_index");
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 5);
        let z0: f64 = first[0].parse().unwrap();
        assert_eq!(z0, b.latents[(0, 0)]);

        let empty = standard_sample(&net, &LatentDomain::unit_box(2), 0, 1).unwrap();
        let mut buf = Vec::new();
        write_samples_to(&empty, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "z_0,z_1,x_0,x_1,source_index\n");
    }

    #[test]
    fn unwritable_path_reports_the_path() {
        let net = make_toy(&ToySpec::biased_triangle()).unwrap();
        let b = standard_sample(&net, &LatentDomain::unit_box(2), 1, 1).unwrap();
        let err = write_samples(&b, "/nonexistent-dir/s.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/s.csv"));
    }
}
