use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::check_width;
use super::eval::{evaluate, predict, predictions_csv, Evaluation};
use super::{Sample, Selection, TrainConfig, RUN_RECORD_VERSION};
use crate::datasets::Split;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fsio::write_atomic;
use crate::metrics::{mse, plcc, srcc, MetricsReport};
use crate::numerics::{stream, AdamW, ParamSet, Stream};
use crate::predictor::{write_checkpoint, PredictorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationStats {
    /// `None` when the predictions are constant.
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean squared error over the epoch's minibatches, measured before each
    /// update.
    pub train_loss: f64,
    pub grad_norm_max: f64,
    pub val: Option<ValidationStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config: TrainConfig,
    #[serde(default)]
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: PredictorParams<f32>,
    pub record: RunRecord,
}

/// Parameters training starts from: seeded initialization, with the final
/// bias at the mean training score when configured.
pub fn initial_params(cfg: &TrainConfig, train: &[Sample]) -> Result<PredictorParams<f32>> {
    let mut p = PredictorParams::init(&cfg.predictor, cfg.seed)?;
    if cfg.init_bias_to_mean && !train.is_empty() {
        let mean = train.iter().map(|s| s.y).sum::<f64>() / train.len() as f64;
        p.b2.as_mut_slice()[0] = mean as f32;
    }
    Ok(p)
}

fn validation_stats(params: &PredictorParams<f32>, val: &[Sample], exec: Exec) -> Result<Option<ValidationStats>> {
    if val.is_empty() {
        return Ok(None);
    }
    let pred = predict(params, val, exec)?;
    let truth: Vec<f64> = val.iter().map(|s| s.y).collect();
    Ok(Some(ValidationStats {
        srcc: srcc(&pred, &truth).ok(),
        plcc: plcc(&pred, &truth).ok(),
        mse: mse(&pred, &truth)?,
    }))
}

/// Minimizes MSE with AdamW. `init` warm-starts from existing parameters
/// (which must match `cfg.predictor`); otherwise [`initial_params`] is used.
///
/// Per-sample gradients of a minibatch are computed through `exec` and summed
/// in sample order, so the result is identical in sequential and parallel
/// mode.
pub fn train(
    cfg: &TrainConfig,
    train: &[Sample],
    val: &[Sample],
    init: Option<PredictorParams<f32>>,
    exec: Exec,
) -> Result<Trained> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    check_width(train, cfg.predictor.d_vocab)?;
    check_width(val, cfg.predictor.d_vocab)?;
    let mut params = match init {
        Some(p) if p.config != cfg.predictor => {
            return Err(Error::InvalidConfig("warm-start parameters use a different predictor config".into()))
        }
        Some(p) => p,
        None => initial_params(cfg, train)?,
    };
    let started = Instant::now();
    let mut opt = AdamW::<f32>::new(cfg.optimizer, params.shapes());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, PredictorParams<f32>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut stream(cfg.seed, Stream::Shuffle(epoch as u32)));
        let mut sq_sum = 0.0;
        let mut grad_norm_max: f64 = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 2.0 / batch.len() as f64;
            let per_sample = exec.map(batch, |&i| {
                let s = &train[i];
                let (y, cache) = params.forward_cached(&s.seq)?;
                let err = y as f64 - s.y;
                Ok((err * err, params.backward(&cache, (scale * err) as f32)?))
            });
            let mut grad = params.zeros_like();
            let mut batch_sq = 0.0;
            for r in per_sample {
                let (sq, g): (f64, PredictorParams<f32>) = r.map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch, batch: b + 1, loss: f64::NAN },
                    other => other,
                })?;
                batch_sq += sq;
                grad.accumulate(&g)?;
            }
            let loss = batch_sq / batch.len() as f64;
            let norm = grad.global_norm();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1, loss });
            }
            sq_sum += batch_sq;
            grad_norm_max = grad_norm_max.max(norm);
            if let Some(c) = cfg.clip_norm {
                if norm > c {
                    grad.scale_all((c / norm) as f32);
                }
            }
            opt.step(&mut params.tensors_mut(), &grad.tensors())?;
            if !params.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1, loss });
            }
        }
        let val_stats = validation_stats(&params, val, exec)?;
        log::debug!("epoch {epoch}: train mse {:.5}", sq_sum / train.len() as f64);
        if cfg.selection == Selection::BestValSrcc {
            if let Some(rho) = val_stats.as_ref().and_then(|v| v.srcc) {
                if best.as_ref().is_none_or(|(b, _, _)| rho > *b) {
                    best = Some((rho, epoch, params.clone()));
                }
            }
        }
        epochs.push(EpochStats {
            epoch,
            train_loss: sq_sum / train.len() as f64,
            grad_norm_max,
            val: val_stats,
        });
    }

    let (selected_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (cfg.epochs, params),
    };
    Ok(Trained {
        params,
        record: RunRecord {
            schema_version: RUN_RECORD_VERSION,
            config: cfg.clone(),
            dataset: String::new(),
            split: None,
            epochs,
            selected_epoch,
            test: None,
            checkpoint: None,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    })
}

/// Writes `checkpoint.m3ck`, `run.json`, and for an evaluation
/// `predictions.csv` and `report.json` under `dir`. Updates the record's
/// checkpoint path and test report.
pub fn save_run(dir: &Path, trained: &mut Trained, test: Option<&Evaluation>) -> Result<()> {
    let ckpt = dir.join("checkpoint.m3ck");
    write_checkpoint(&ckpt, &trained.params)?;
    trained.record.checkpoint = Some(ckpt);
    if let Some(ev) = test {
        trained.record.test = Some(ev.report.clone());
        write_atomic(&dir.join("predictions.csv"), predictions_csv(&ev.predictions)?.as_bytes())?;
        write_atomic(&dir.join("report.json"), ev.report.to_json()?.as_bytes())?;
    }
    write_atomic(&dir.join("run.json"), serde_json::to_string_pretty(&trained.record)?.as_bytes())
}

/// Trains, then evaluates on `test` when it is non-empty.
pub(crate) fn train_and_test(
    cfg: &TrainConfig,
    data: &super::Partition,
    dataset: &str,
    labels: Option<crate::protocol::MosRange>,
    exec: Exec,
) -> Result<(Trained, Option<Evaluation>)> {
    let mut t = train(cfg, &data.train, &data.val, None, exec)?;
    t.record.dataset = dataset.into();
    let ev = if data.test.is_empty() {
        None
    } else {
        let ev = evaluate(&t.params, &data.test, dataset, "test", labels, exec)?;
        t.record.test = Some(ev.report.clone());
        Some(ev)
    };
    Ok((t, ev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::test_support::synthetic;
    use crate::predictor::{read_checkpoint, PredictorConfig};

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            predictor: PredictorConfig { d_vocab: 8, d_h: 4, layout: "m,s".parse().unwrap(), ..PredictorConfig::default() },
            epochs: 3,
            batch_size: 4,
            optimizer: crate::numerics::AdamWConfig { lr: 1e-2, ..Default::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initial_params() {
        let data = synthetic(20, 5, 8, 1);
        let mut cfg = small_cfg();
        cfg.epochs = 1;
        cfg.optimizer.lr = 0.0;
        let t = train(&cfg, &data, &[], None, Exec::Parallel).unwrap();
        assert_eq!(t.params, initial_params(&cfg, &data).unwrap());
        assert_eq!(t.record.epochs.len(), 1);
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let data = synthetic(24, 5, 8, 2);
        let cfg = small_cfg();
        let a = train(&cfg, &data[..20], &data[20..], None, Exec::Sequential).unwrap();
        let b = train(&cfg, &data[..20], &data[20..], None, Exec::Parallel).unwrap();
        assert_eq!(a.params, b.params);
        let bits = |r: &RunRecord| r.loss_curve().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.record), bits(&b.record));
        assert_eq!(a.record.epochs, b.record.epochs);
    }

    #[test]
    fn loss_decreases() {
        let data = synthetic(64, 6, 8, 3);
        let cfg = TrainConfig { epochs: 10, selection: Selection::LastEpoch, ..small_cfg() };
        let t = train(&cfg, &data, &[], None, Exec::Parallel).unwrap();
        let curve = t.record.loss_curve();
        assert!(curve[9] < curve[0], "{curve:?}");
        assert_eq!(t.record.selected_epoch, 10);
    }

    #[test]
    fn rejects_width_mismatch_and_divergence() {
        let data = synthetic(8, 3, 9, 0);
        assert!(matches!(
            train(&small_cfg(), &data, &[], None, Exec::Parallel),
            Err(Error::Dimension { .. })
        ));
        let mut bad = synthetic(8, 3, 8, 0);
        bad[5].y = f64::INFINITY;
        let cfg = TrainConfig { batch_size: 2, ..small_cfg() };
        match train(&cfg, &bad, &[], None, Exec::Parallel) {
            Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn saves_run_artifacts() {
        let data = synthetic(30, 4, 8, 4);
        let cfg = small_cfg();
        let part = super::super::Partition {
            train: data[..20].to_vec(),
            val: data[20..24].to_vec(),
            test: data[24..].to_vec(),
        };
        let (mut t, ev) = train_and_test(&cfg, &part, "syn", None, Exec::Parallel).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_run(dir.path(), &mut t, ev.as_ref()).unwrap();
        assert_eq!(read_checkpoint(&dir.path().join("checkpoint.m3ck")).unwrap(), t.params);
        let rec: RunRecord =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
        assert_eq!(rec.epochs.len(), 3);
        assert_eq!(rec.test.unwrap().n, 6);
        assert!(dir.path().join("predictions.csv").is_file());
    }
}
