//! Training, evaluation, cross-dataset transfer, ablations and reports.

mod ablation;
mod cross;
mod data;
mod eval;
mod gradcheck;
mod report;
mod train;

pub use ablation::{ablation_csv, parse_suite, run_ablation, AblationRow, Variant};
pub use cross::{cross_eval, CrossEval};
pub use data::{load_partition, load_samples, resolve_split, Partition, Sample};
pub use gradcheck::{preset_gradcheck, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use eval::{evaluate, predict, read_predictions_csv, predictions_csv, Evaluation, ScoredPrediction};
pub use report::{emit_report, ReportFiles, RunSeries};
pub use train::{initial_params, save_run, train, EpochStats, RunRecord, Trained, ValidationStats};

use serde::{Deserialize, Serialize};

use crate::datasets::{Composition, FixtureKey};
use crate::error::{Error, Result};
use crate::numerics::AdamWConfig;
use crate::predictor::PredictorConfig;
use crate::protocol::Aspect;

pub const RUN_RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Parameters from the epoch with the highest validation SRCC; earliest
    /// epoch wins ties.
    #[default]
    BestValSrcc,
    LastEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub predictor: PredictorConfig,
    pub optimizer: AdamWConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub aspect: Aspect,
    pub composition: Composition,
    /// train : test : validation. `None` uses the dataset's published ratios,
    /// or 4:1:0 for datasets without any.
    pub split_ratios: Option<[u32; 3]>,
    /// Share of train carved out for validation when the ratios leave none.
    pub carve_val_percent: u32,
    pub selection: Selection,
    /// Start the final bias at the mean training score.
    pub init_bias_to_mean: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            predictor: PredictorConfig::default(),
            optimizer: AdamWConfig::default(),
            epochs: 50,
            batch_size: 16,
            clip_norm: Some(1.0),
            seed: 0,
            aspect: Aspect::Quality,
            composition: Composition::WithDesc,
            split_ratios: None,
            carve_val_percent: 10,
            selection: Selection::BestValSrcc,
            init_bias_to_mean: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.predictor.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(format!(
                "epochs ({}) and batch size ({}) must be ≥ 1",
                self.epochs, self.batch_size
            )));
        }
        let o = &self.optimizer;
        if !(o.lr.is_finite() && o.lr >= 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {}", o.lr)));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return Err(Error::InvalidConfig("AdamW needs β1, β2 in [0, 1) and ε > 0".into()));
        }
        if !(o.weight_decay.is_finite() && o.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!("weight decay {}", o.weight_decay)));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidConfig(format!("clip norm {c}")));
            }
        }
        if self.carve_val_percent >= 100 {
            return Err(Error::InvalidConfig("validation carve must be below 100%".into()));
        }
        if let Some(r) = self.split_ratios {
            if r.iter().all(|&x| x == 0) {
                return Err(Error::InvalidConfig("split ratios sum to zero".into()));
            }
        }
        Ok(())
    }

    pub fn fixture_key(&self) -> FixtureKey {
        FixtureKey::new(self.aspect, self.composition, self.predictor.feature_source)
    }

    /// Configuration for the synthetic acceptance set: D = 64, d_h = 32,
    /// the default four-block layout.
    pub fn synthetic(d_vocab: usize) -> Self {
        Self {
            predictor: PredictorConfig {
                d_vocab,
                d_h: 32,
                ..PredictorConfig::default()
            },
            ..Self::default()
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::Sample;
    use crate::datasets::{synth_samples, Composition, FixtureKey, SynthSpec};
    use crate::exec::Exec;
    use crate::predictor::FeatureSource;
    use crate::protocol::Aspect;

    pub fn synthetic(count: usize, len: usize, width: usize, seed: u64) -> Vec<Sample> {
        let spec = SynthSpec { count, len, width, seed, ..SynthSpec::default() };
        let key = FixtureKey::new(Aspect::Quality, Composition::WithDesc, FeatureSource::Logits);
        synth_samples(&spec, Exec::Parallel)
            .unwrap()
            .into_iter()
            .map(|s| Sample { id: s.id, seq: s.fixtures[&key].clone(), y: s.score })
            .collect()
    }
}
