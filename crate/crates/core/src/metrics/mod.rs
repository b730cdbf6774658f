//! Evaluation mathematics. Everything here runs in f64.

mod correlation;
mod labels;
mod polyfit;
mod report;

pub use correlation::{average_ranks, plcc, srcc};
pub use labels::{classification_metrics, rough_accuracy, ClassificationMetrics};
pub use polyfit::{polyfit4, polyval};
pub use report::{MetricsReport, REPORT_SCHEMA_VERSION};

pub use crate::predictor::mse_loss as mse;
