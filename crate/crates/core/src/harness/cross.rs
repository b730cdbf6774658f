use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::train::{train, RunRecord};
use super::{Partition, TrainConfig};
use crate::error::Result;
use crate::exec::Exec;
use crate::metrics::MetricsReport;
use crate::predictor::PredictorParams;
use crate::protocol::MosRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEval {
    pub zero_shot: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_tp: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_run: Option<RunRecord>,
}

/// Scores the source-trained predictor on the target test split, then, given
/// `tp_cfg`, continues training it on the target train split (the input
/// sequences stay fixed) and scores it again.
pub fn cross_eval(
    source: &PredictorParams<f32>,
    target: &Partition,
    target_name: &str,
    labels: Option<MosRange>,
    tp_cfg: Option<&TrainConfig>,
    exec: Exec,
) -> Result<CrossEval> {
    let zero_shot = evaluate(source, &target.test, target_name, "test", labels, exec)?
        .report
        .with_variant("zero_shot");
    let (with_tp, tp_run) = match tp_cfg {
        Some(cfg) => {
            let cfg = TrainConfig { predictor: source.config.clone(), ..cfg.clone() };
            let t = train(&cfg, &target.train, &target.val, Some(source.clone()), exec)?;
            let report = evaluate(&t.params, &target.test, target_name, "test", labels, exec)?
                .report
                .with_variant("with_tp");
            (Some(report), Some(t.record))
        }
        None => (None, None),
    };
    Ok(CrossEval { zero_shot, with_tp, tp_run })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::test_support::synthetic;
    use crate::predictor::PredictorConfig;

    fn setup() -> (TrainConfig, Partition) {
        let data = synthetic(40, 4, 8, 7);
        let cfg = TrainConfig {
            predictor: PredictorConfig { d_vocab: 8, d_h: 4, layout: "s".parse().unwrap(), ..PredictorConfig::default() },
            epochs: 2,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let part = Partition { train: data[..24].to_vec(), val: data[24..30].to_vec(), test: data[30..].to_vec() };
        (cfg, part)
    }

    #[test]
    fn self_transfer_zero_shot_equals_evaluate() {
        let (cfg, part) = setup();
        let t = train(&cfg, &part.train, &part.val, None, Exec::Parallel).unwrap();
        let plain = evaluate(&t.params, &part.test, "A", "test", None, Exec::Parallel).unwrap().report;
        let x = cross_eval(&t.params, &part, "A", None, None, Exec::Parallel).unwrap();
        assert_eq!(x.zero_shot, plain.with_variant("zero_shot"));
        assert!(x.with_tp.is_none() && x.tp_run.is_none());

        let y = cross_eval(&t.params, &part, "A", None, Some(&cfg), Exec::Parallel).unwrap();
        assert_eq!(y.zero_shot, x.zero_shot);
        assert!(y.with_tp.unwrap().is_finite());
        assert_eq!(y.tp_run.unwrap().epochs.len(), 2);
    }
}
