use serde::{Deserialize, Serialize};

use super::{classification_metrics, mse, plcc, rough_accuracy, srcc};
use crate::error::Result;
use crate::protocol::MosRange;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const CSV_HEADER: [&str; 12] = [
    "dataset",
    "split",
    "variant",
    "n",
    "srcc",
    "plcc",
    "mse",
    "rough_accuracy",
    "accuracy",
    "precision",
    "f1",
    "schema_version",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub dataset: String,
    pub split: String,
    #[serde(default)]
    pub variant: String,
    pub n: usize,
    pub srcc: f64,
    pub plcc: f64,
    pub mse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rough_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
}

impl MetricsReport {
    /// Correlations and MSE always; label metrics when `labels` gives the
    /// MOS range to bucket into. Predictions are clamped into the range
    /// before bucketing.
    pub fn compute(
        dataset: &str,
        split: &str,
        pred: &[f64],
        truth: &[f64],
        labels: Option<MosRange>,
    ) -> Result<Self> {
        let srcc = srcc(pred, truth)?;
        let plcc = plcc(pred, truth)?;
        let mse = mse(pred, truth)?;
        let mut report = Self {
            schema_version: REPORT_SCHEMA_VERSION,
            dataset: dataset.into(),
            split: split.into(),
            variant: String::new(),
            n: pred.len(),
            srcc,
            plcc,
            mse,
            rough_accuracy: None,
            accuracy: None,
            precision: None,
            f1: None,
        };
        if let Some(range) = labels {
            let p: Vec<usize> = pred.iter().map(|&v| range.label_clamped(v).index()).collect();
            let t: Vec<usize> = truth.iter().map(|&v| range.label_clamped(v).index()).collect();
            let cls = classification_metrics(&p, &t)?;
            report.rough_accuracy = Some(rough_accuracy(&p, &t)?);
            report.accuracy = Some(cls.accuracy);
            report.precision = Some(cls.precision);
            report.f1 = Some(cls.f1);
        }
        Ok(report)
    }

    pub fn with_variant(mut self, variant: impl Into<String>) -> Self {
        self.variant = variant.into();
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.srcc, self.plcc, self.mse].iter().all(|v| v.is_finite())
            && [self.rough_accuracy, self.accuracy, self.precision, self.f1]
                .iter()
                .flatten()
                .all(|v| v.is_finite())
    }

    pub fn csv_header() -> &'static [&'static str] {
        &CSV_HEADER
    }

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.dataset.clone(),
            self.split.clone(),
            self.variant.clone(),
            self.n.to_string(),
            self.srcc.to_string(),
            self.plcc.to_string(),
            self.mse.to_string(),
            opt(self.rough_accuracy),
            opt(self.accuracy),
            opt(self.precision),
            opt(self.f1),
            self.schema_version.to_string(),
        ]
    }

    /// Header plus one row per report.
    pub fn to_csv(reports: &[MetricsReport]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::csv_header())?;
        for r in reports {
            w.write_record(r.csv_row())?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
