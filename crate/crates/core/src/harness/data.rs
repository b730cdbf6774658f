use super::TrainConfig;
use crate::datasets::{apportion, read_fixture, split, DatasetManifest, FixtureKey, KnownDataset, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::Matrix;
use crate::protocol::Aspect;

const FALLBACK_RATIOS: [u32; 3] = [4, 1, 0];

/// One loaded input sequence with its target score.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub seq: Matrix<f32>,
    pub y: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Partition {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Partitions the manifest. When the ratios leave no validation part, the
/// last `carve_val_percent` of the shuffled train list becomes validation.
pub fn resolve_split(manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<Split> {
    let ratios = cfg
        .split_ratios
        .or_else(|| KnownDataset::lookup(&manifest.name).map(|d| d.split_ratios))
        .unwrap_or(FALLBACK_RATIOS);
    let ids: Vec<String> = manifest.records.iter().map(|r| r.id.clone()).collect();
    let mut s = split(&ids, &SplitSpec::new(ratios, cfg.seed)?)?;
    if s.val.is_empty() && cfg.carve_val_percent > 0 {
        let sizes = apportion(s.train.len(), &[100 - cfg.carve_val_percent, cfg.carve_val_percent]);
        s.val = s.train.split_off(sizes[0]);
    }
    Ok(s)
}

pub fn load_samples(
    manifest: &DatasetManifest,
    ids: &[String],
    key: FixtureKey,
    aspect: Aspect,
    exec: Exec,
) -> Result<Vec<Sample>> {
    if !manifest.aspects.has(aspect) {
        return Err(Error::MissingAspectMos(aspect));
    }
    manifest.require_fixtures(ids, key)?;
    exec.map(ids, |id| {
        let record = manifest
            .record(id)
            .ok_or_else(|| Error::Manifest(format!("unknown sample id '{id}'")))?;
        let y = record.mos.get(aspect).ok_or(Error::MissingAspectMos(aspect))?;
        let path = manifest.fixture_path(record, key).expect("checked by require_fixtures");
        Ok(Sample {
            id: id.clone(),
            seq: read_fixture(&path)?,
            y,
        })
    })
    .into_iter()
    .collect()
}

pub fn load_partition(manifest: &DatasetManifest, cfg: &TrainConfig, exec: Exec) -> Result<(Split, Partition)> {
    let s = resolve_split(manifest, cfg)?;
    let key = cfg.fixture_key();
    let load = |ids: &[String]| load_samples(manifest, ids, key, cfg.aspect, exec);
    let part = Partition {
        train: load(&s.train)?,
        val: load(&s.val)?,
        test: load(&s.test)?,
    };
    Ok((s, part))
}

/// Fixture width, or an error if the samples disagree with `expected`.
pub(crate) fn check_width(samples: &[Sample], expected: usize) -> Result<()> {
    match samples.iter().find(|s| s.seq.cols() != expected) {
        Some(s) => Err(Error::Dimension {
            op: "fixture width vs model input width",
            left: s.seq.shape(),
            right: (expected, 0),
        }),
        None => Ok(()),
    }
}
