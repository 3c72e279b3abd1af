use std::fmt::Write as _;
use std::path::Path;

use crate::chanmodel::FrequencyResponse;
use crate::{Error, Result};

/// `mean_n |pred(n) - truth(n)|^2`.
pub fn metric_mse(pred: &FrequencyResponse, truth: &FrequencyResponse) -> Result<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::Usage(format!("cannot compare {} and {} subcarriers", pred.len(), truth.len())));
    }
    Ok(pred.values.iter().zip(&truth.values).map(|(p, t)| (p - t).norm_sqr()).sum::<f64>() / truth.len() as f64)
}

/// MSE divided by `mean_n |truth(n)|^2`.
pub fn metric_nmse(pred: &FrequencyResponse, truth: &FrequencyResponse) -> Result<f64> {
    let mse = metric_mse(pred, truth)?;
    let power = truth.values.iter().map(|t| t.norm_sqr()).sum::<f64>() / truth.len() as f64;
    if !(power > 0.0) {
        return Err(Error::UndefinedMetric("truth has zero power, NMSE undefined".into()));
    }
    Ok(mse / power)
}

/// Pooled error over many samples of flattened (re/im) vectors. The pooled
/// NMSE is total error energy over total channel energy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccumulator {
    err: f64,
    power: f64,
    /// Complex entries seen.
    entries: u64,
    pub samples: u64,
}

impl ErrorAccumulator {
    /// `pred` and `truth` hold one or more flattened samples of equal length.
    pub fn add_flat(&mut self, pred: &[f32], truth: &[f32], samples: usize) {
        assert_eq!(pred.len(), truth.len());
        for (p, t) in pred.iter().zip(truth) {
            let (p, t) = (*p as f64, *t as f64);
            self.err += (p - t) * (p - t);
            self.power += t * t;
        }
        self.entries += (truth.len() / 2) as u64;
        self.samples += samples as u64;
    }

    pub fn add(&mut self, pred: &FrequencyResponse, truth: &FrequencyResponse) {
        for (p, t) in pred.values.iter().zip(&truth.values) {
            self.err += (p - t).norm_sqr();
            self.power += t.norm_sqr();
        }
        self.entries += truth.len() as u64;
        self.samples += 1;
    }

    pub fn mse(&self) -> Result<f64> {
        if self.entries == 0 {
            return Err(Error::UndefinedMetric("no samples".into()));
        }
        Ok(self.err / self.entries as f64)
    }

    pub fn nmse(&self) -> Result<f64> {
        if !(self.power > 0.0) {
            return Err(Error::UndefinedMetric("truth has zero power, NMSE undefined".into()));
        }
        Ok(self.err / self.power)
    }
}

pub const CSV_HEADER: &str = "experiment,class,x_name,x_value,method,metric,value,n_samples,config_hash,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub experiment: String,
    /// `TDL-A`..`TDL-E`, or `all` for pooled rows.
    pub class: String,
    pub x_name: String,
    pub x_value: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub n_samples: u64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:e},{},{},{}",
                r.experiment, r.class, r.x_name, r.x_value, r.method, r.metric, r.value, r.n_samples, r.config_hash, r.seed
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Value of the single row matching all fields, if any.
    pub fn value(&self, class: &str, x_value: f64, method: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.class == class && r.x_value == x_value && r.method == method && r.metric == metric).map(|r| r.value)
    }
}
