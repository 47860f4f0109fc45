//! JSON documents written by the command-line tool.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcovReport {
    pub label: String,
    /// Row-major.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub name: String,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedGroup {
    pub category: String,
    pub label: String,
    pub n_obs: usize,
}

/// Output of `hdfe estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub family: String,
    pub engine: String,
    pub response: String,
    pub regressors: Vec<String>,
    pub fixed_effects: Vec<FactorSummary>,
    pub coefficients: Vec<Coefficient>,
    pub vcov: VcovReport,
    pub iterations: usize,
    pub converged: bool,
    pub loglik: f64,
    pub n: usize,
    pub ap_tolerance: f64,
    pub ap_schedule: String,
    pub dropped_groups: Vec<DroppedGroup>,
    /// Input rows used, when groups were dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<usize>>,
    /// Final linear predictor, one entry per used row.
    pub eta: Vec<f64>,
    pub wall_time_seconds: f64,
}

impl EstimateReport {
    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.coefficients.iter().map(|c| c.name.clone()).collect()
    }

    pub fn vcov_matrix(&self) -> hdfe_core::Matrix {
        let rows: Vec<&[f64]> = self.vcov.matrix.iter().map(Vec::as_slice).collect();
        if rows.is_empty() {
            return hdfe_core::Matrix::zeros(0, 0);
        }
        hdfe_core::Matrix::from_rows(&rows)
    }

    /// The estimation payload without timing, for reproducibility checks.
    pub fn payload(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v.as_object_mut().expect("object").remove("wall_time_seconds");
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldReport {
    pub restrictions: String,
    pub vcov: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
