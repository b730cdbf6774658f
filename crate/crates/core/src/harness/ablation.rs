use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::data::{load_samples, resolve_split};
use super::train::train_and_test;
use super::{Partition, TrainConfig};
use crate::datasets::{Composition, DatasetManifest};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::MetricsReport;
use crate::predictor::{FeatureSource, Pooling};

/// One ablation setting; components combine with `+`, e.g. `max+bypass_xlstm`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Variant {
    pub pooling: Option<Pooling>,
    pub bypass_xlstm: bool,
    pub feature_source: Option<FeatureSource>,
    pub composition: Option<Composition>,
    name: String,
}

impl Variant {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        if let Some(p) = self.pooling {
            cfg.predictor.pooling = p;
        }
        cfg.predictor.bypass_xlstm |= self.bypass_xlstm;
        if let Some(s) = self.feature_source {
            cfg.predictor.feature_source = s;
        }
        if let Some(c) = self.composition {
            cfg.composition = c;
        }
        cfg
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = Variant { name: s.trim().to_string(), ..Variant::default() };
        if v.name.is_empty() {
            return Err(Error::UnknownVariant(s.into()));
        }
        for part in v.name.clone().split('+').map(str::trim) {
            let dup = || Error::UnknownVariant(format!("{s} (repeats a setting)"));
            match part {
                "bypass_xlstm" | "wo_xlstm" => {
                    if v.bypass_xlstm {
                        return Err(dup());
                    }
                    v.bypass_xlstm = true;
                }
                "hidden_states" | "feature_source" | "wo_lm_head" => {
                    if v.feature_source.replace(FeatureSource::HiddenStates).is_some() {
                        return Err(dup());
                    }
                }
                "full_conv" | "no_desc" | "with_desc" => {
                    if v.composition.replace(part.parse()?).is_some() {
                        return Err(dup());
                    }
                }
                other => {
                    let p: Pooling = other.parse().map_err(|_| Error::UnknownVariant(other.into()))?;
                    if v.pooling.replace(p).is_some() {
                        return Err(dup());
                    }
                }
            }
        }
        Ok(v)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn parse_suite<S: AsRef<str>>(names: &[S]) -> Result<Vec<Variant>> {
    if names.is_empty() {
        return Err(Error::InvalidConfig("empty ablation suite".into()));
    }
    names.iter().map(|n| n.as_ref().parse()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricsReport>,
    /// Why the variant produced no report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub test_ids: Vec<String>,
}

fn run_variant(base: &TrainConfig, manifest: &DatasetManifest, v: &Variant, exec: Exec) -> Result<MetricsReport> {
    let mut cfg = v.apply(base);
    let s = resolve_split(manifest, &cfg)?;
    let key = cfg.fixture_key();
    let load = |ids: &[String]| load_samples(manifest, ids, key, cfg.aspect, exec);
    let data = Partition { train: load(&s.train)?, val: load(&s.val)?, test: load(&s.test)? };
    if cfg.predictor.feature_source == FeatureSource::HiddenStates {
        // hidden states are narrower than the vocabulary
        if let Some(first) = data.train.first() {
            cfg.predictor.d_vocab = first.seq.cols();
        }
    }
    let (_, ev) = train_and_test(&cfg, &data, &manifest.name, Some(manifest.range), exec)?;
    let ev = ev.ok_or(Error::Empty("test split"))?;
    Ok(ev.report.with_variant(v.name()))
}

/// One training run per variant on the same split and seed, scored on the
/// test split. A variant that fails is reported, not propagated.
pub fn run_ablation(
    base: &TrainConfig,
    manifest: &DatasetManifest,
    suite: &[Variant],
    exec: Exec,
) -> Result<Vec<AblationRow>> {
    if suite.is_empty() {
        return Err(Error::InvalidConfig("empty ablation suite".into()));
    }
    base.validate()?;
    let test_ids = resolve_split(manifest, base)?.test;
    Ok(suite
        .iter()
        .map(|v| {
            log::info!("ablation variant {v}");
            let (report, error) = match run_variant(base, manifest, v, exec) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AblationRow { variant: v.name().into(), report, error, test_ids: test_ids.clone() }
        })
        .collect())
}

/// Metrics columns for every row, plus an `error` column.
pub fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = MetricsReport::csv_header().to_vec();
    header.push("error");
    w.write_record(&header)?;
    for r in rows {
        let mut cells = match &r.report {
            Some(rep) => rep.csv_row(),
            None => {
                let mut c = vec![String::new(); header.len() - 1];
                c[2] = r.variant.clone();
                c
            }
        };
        cells.push(r.error.clone().unwrap_or_default());
        w.write_record(&cells)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{synth_generate, SynthSpec};
    use crate::predictor::PredictorConfig;

    #[test]
    fn parses_variants() {
        let v: Variant = "max+bypass_xlstm".parse().unwrap();
        assert_eq!(v.pooling, Some(Pooling::Max));
        assert!(v.bypass_xlstm);
        let v: Variant = "hidden_states+full_conv".parse().unwrap();
        assert_eq!(v.feature_source, Some(FeatureSource::HiddenStates));
        assert_eq!(v.composition, Some(Composition::FullConv));
        assert!(matches!("median".parse::<Variant>(), Err(Error::UnknownVariant(_))));
        assert!("max+last".parse::<Variant>().is_err());
        assert!(parse_suite::<&str>(&[]).is_err());
        let cfg = "fl_mean+bypass_xlstm".parse::<Variant>().unwrap().apply(&TrainConfig::default());
        assert_eq!(cfg.predictor.variant(), "fl_mean+bypass_xlstm");
    }

    #[test]
    fn small_suite_shares_split() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            count: 40,
            len: 4,
            width: 8,
            compositions: Composition::ALL.to_vec(),
            hidden_states: true,
            ..SynthSpec::default()
        };
        let m = synth_generate(&spec, dir.path(), Exec::Parallel).unwrap();
        let base = TrainConfig {
            predictor: PredictorConfig { d_vocab: 8, d_h: 16, layout: "m".parse().unwrap(), ..PredictorConfig::default() },
            epochs: 2,
            batch_size: 8,
            optimizer: crate::numerics::AdamWConfig { lr: 1e-2, ..Default::default() },
            ..TrainConfig::default()
        };
        let suite = parse_suite(&["mean", "last", "bypass_xlstm", "hidden_states", "no_desc"]).unwrap();
        let rows = run_ablation(&base, &m, &suite, Exec::Parallel).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!(r.error.is_none(), "{}: {:?}", r.variant, r.error);
            assert!(r.report.as_ref().unwrap().is_finite());
            assert_eq!(r.test_ids, rows[0].test_ids);
        }
        let csv = ablation_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 6);
    }
}
