use serde::{Deserialize, Serialize};

use super::data::check_width;
use super::Sample;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::MetricsReport;
use crate::predictor::PredictorParams;
use crate::protocol::MosRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    pub y_hat: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub predictions: Vec<ScoredPrediction>,
}

/// Forward pass over every sample, in sample order.
pub fn predict(params: &PredictorParams<f32>, samples: &[Sample], exec: Exec) -> Result<Vec<f64>> {
    check_width(samples, params.config.d_vocab)?;
    exec.map(samples, |s| params.forward(&s.seq).map(|y| y as f64))
        .into_iter()
        .collect()
}

/// Scores `samples` with frozen parameters. `labels` enables the
/// five-level label metrics for that MOS range.
pub fn evaluate(
    params: &PredictorParams<f32>,
    samples: &[Sample],
    dataset: &str,
    split: &str,
    labels: Option<MosRange>,
    exec: Exec,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let pred = predict(params, samples, exec)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let report = MetricsReport::compute(dataset, split, &pred, &truth, labels)?
        .with_variant(params.config.variant());
    let predictions = samples
        .iter()
        .zip(pred)
        .map(|(s, y_hat)| ScoredPrediction { id: s.id.clone(), y_hat, y: s.y })
        .collect();
    Ok(Evaluation { report, predictions })
}

/// `id,y_hat,y` with full round-trip precision.
pub fn predictions_csv(rows: &[ScoredPrediction]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_predictions_csv(text: &str) -> Result<Vec<ScoredPrediction>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
