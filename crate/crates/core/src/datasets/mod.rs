//! Dataset manifests, splits, fixture files and the synthetic logits generator.

mod adapter;
mod fixture;
mod split;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::predictor::FeatureSource;
use crate::protocol::{Aspect, AspectScores, MosRange, MosRecord};

pub use adapter::read_adapter_csv;
pub use fixture::{decode_fixture, encode_fixture, read_fixture, write_fixture, FIXTURE_VERSION};
pub use split::{apportion, split, Split, SplitSpec};
pub use synth::{synth_generate, synth_samples, DomainShift, SynthSample, SynthSpec};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Which conversation turns preceded the logits a fixture holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// Description turn plus the result request, without the final answer.
    #[default]
    WithDesc,
    /// As `WithDesc`, with the model's one-word answer appended.
    FullConv,
    /// Result request only.
    NoDesc,
}

impl Composition {
    pub const ALL: [Composition; 3] = [Composition::WithDesc, Composition::FullConv, Composition::NoDesc];

    pub fn as_str(self) -> &'static str {
        match self {
            Composition::WithDesc => "with_desc",
            Composition::FullConv => "full_conv",
            Composition::NoDesc => "no_desc",
        }
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Composition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "with_desc" | "w_id" => Ok(Composition::WithDesc),
            "full_conv" | "fullconv" => Ok(Composition::FullConv),
            "no_desc" | "none" => Ok(Composition::NoDesc),
            other => Err(Error::InvalidConfig(format!("unknown composition '{other}'"))),
        }
    }
}

/// Names one fixture of a record, e.g. `quality.with_desc.logits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FixtureKey {
    pub aspect: Aspect,
    pub composition: Composition,
    pub source: FeatureSource,
}

impl FixtureKey {
    pub fn new(aspect: Aspect, composition: Composition, source: FeatureSource) -> Self {
        Self {
            aspect,
            composition,
            source,
        }
    }
}

impl fmt::Display for FixtureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.aspect, self.composition, self.source)
    }
}

impl FromStr for FixtureKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('.').collect();
        let [a, c, f] = parts[..] else {
            return Err(Error::Manifest(format!("fixture key '{s}' is not aspect.composition.source")));
        };
        Ok(Self::new(a.parse()?, c.parse()?, f.parse()?))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectFlags {
    pub quality: bool,
    pub correspondence: bool,
    pub authenticity: bool,
}

impl AspectFlags {
    pub fn has(self, aspect: Aspect) -> bool {
        match aspect {
            Aspect::Quality => self.quality,
            Aspect::Correspondence => self.correspondence,
            Aspect::Authenticity => self.authenticity,
        }
    }

    pub fn only(aspects: &[Aspect]) -> Self {
        let mut f = Self::default();
        for a in aspects {
            match a {
                Aspect::Quality => f.quality = true,
                Aspect::Correspondence => f.correspondence = true,
                Aspect::Authenticity => f.authenticity = true,
            }
        }
        f
    }
}

/// Published statistics of the three benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnownDataset {
    pub name: &'static str,
    pub images: usize,
    pub generator_models: usize,
    pub aspects: AspectFlags,
    /// train : test : validation.
    pub split_ratios: [u32; 3],
}

pub const KNOWN_DATASETS: [KnownDataset; 3] = [
    KnownDataset {
        name: "AGIQA-3k",
        images: 2982,
        generator_models: 6,
        aspects: AspectFlags {
            quality: true,
            correspondence: true,
            authenticity: false,
        },
        split_ratios: [4, 1, 0],
    },
    KnownDataset {
        name: "AIGCIQA2023",
        images: 2400,
        generator_models: 6,
        aspects: AspectFlags {
            quality: true,
            correspondence: true,
            authenticity: true,
        },
        split_ratios: [3, 1, 0],
    },
    KnownDataset {
        name: "AIGIQA-20k",
        images: 20000,
        generator_models: 15,
        aspects: AspectFlags {
            quality: true,
            correspondence: false,
            authenticity: false,
        },
        split_ratios: [7, 2, 1],
    },
];

impl KnownDataset {
    /// Case- and punctuation-insensitive lookup ("agiqa3k" finds AGIQA-3k).
    pub fn lookup(name: &str) -> Option<&'static KnownDataset> {
        let norm = |s: &str| {
            s.chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let key = norm(name);
        KNOWN_DATASETS.iter().find(|d| norm(d.name) == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    #[serde(default)]
    pub prompt: String,
    pub mos: AspectScores,
    /// Fixture key → path, relative to the manifest's directory.
    #[serde(default)]
    pub fixtures: BTreeMap<String, PathBuf>,
}

impl ManifestRecord {
    pub fn to_mos_record(&self, range: MosRange) -> MosRecord {
        MosRecord {
            id: self.id.clone(),
            prompt: self.prompt.clone(),
            mos: self.mos,
            range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub name: String,
    pub image_count: usize,
    #[serde(default)]
    pub generator_models: usize,
    pub aspects: AspectFlags,
    pub range: MosRange,
    pub records: Vec<ManifestRecord>,
    /// Directory fixture paths are resolved against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, aspects: AspectFlags, range: MosRange, records: Vec<ManifestRecord>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            name: name.into(),
            image_count: records.len(),
            generator_models: 0,
            aspects,
            range,
            records,
            base_dir: PathBuf::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "schema version {} (supported: {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        MosRange::new(self.range.min, self.range.max)?;
        if self.image_count != self.records.len() {
            return Err(Error::Manifest(format!(
                "image_count {} but {} records",
                self.image_count,
                self.records.len()
            )));
        }
        if let Some(known) = KnownDataset::lookup(&self.name) {
            if self.image_count != known.images
                || self.generator_models != known.generator_models
                || self.aspects != known.aspects
            {
                return Err(Error::Manifest(format!(
                    "{} must have {} images from {} models with aspects {:?}; found {} / {} / {:?}",
                    known.name,
                    known.images,
                    known.generator_models,
                    known.aspects,
                    self.image_count,
                    self.generator_models,
                    self.aspects
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate id '{}'", r.id)));
            }
            for aspect in Aspect::ALL {
                match (self.aspects.has(aspect), r.mos.get(aspect)) {
                    (true, None) => {
                        return Err(Error::Manifest(format!("record '{}' lacks {aspect} MOS", r.id)))
                    }
                    (false, Some(_)) => {
                        return Err(Error::Manifest(format!(
                            "record '{}' has {aspect} MOS but the dataset does not declare it",
                            r.id
                        )))
                    }
                    _ => {}
                }
            }
            r.to_mos_record(self.range)
                .validate()
                .map_err(|e| Error::Manifest(format!("record '{}': {e}", r.id)))?;
            for key in r.fixtures.keys() {
                key.parse::<FixtureKey>()?;
            }
        }
        Ok(())
    }

    pub fn record(&self, id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn fixture_path(&self, record: &ManifestRecord, key: FixtureKey) -> Option<PathBuf> {
        record.fixtures.get(&key.to_string()).map(|p| self.base_dir.join(p))
    }

    /// Ids among `ids` with no readable fixture under `key`.
    pub fn missing_fixtures(&self, ids: &[String], key: FixtureKey) -> Vec<String> {
        ids.iter()
            .filter(|id| {
                self.record(id)
                    .and_then(|r| self.fixture_path(r, key))
                    .is_none_or(|p| !p.is_file())
            })
            .cloned()
            .collect()
    }

    /// Fails with the first five missing ids when any fixture is absent.
    pub fn require_fixtures(&self, ids: &[String], key: FixtureKey) -> Result<()> {
        let missing = self.missing_fixtures(ids, key);
        if missing.is_empty() {
            return Ok(());
        }
        Err(Error::MissingFixtures {
            count: missing.len(),
            first: missing.into_iter().take(5).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<DatasetManifest> {
    let mut m: DatasetManifest =
        serde_json::from_str(text).map_err(|e| Error::Manifest(format!("schema: {e}")))?;
    m.base_dir = base_dir.to_path_buf();
    m.validate()?;
    Ok(m)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range() -> MosRange {
        MosRange::new(0.0, 5.0).unwrap()
    }

    fn records(n: usize, aspects: &[Aspect]) -> Vec<ManifestRecord> {
        (0..n)
            .map(|i| {
                let mut mos = AspectScores::default();
                for &a in aspects {
                    mos.set(a, Some(2.5));
                }
                ManifestRecord {
                    id: format!("r{i}"),
                    prompt: String::new(),
                    mos,
                    fixtures: BTreeMap::new(),
                }
            })
            .collect()
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = DatasetManifest::new("empty", AspectFlags::only(&[Aspect::Quality]), range(), vec![]);
        m.validate().unwrap();
    }

    #[test]
    fn known_dataset_shape_enforced() {
        use Aspect::*;
        let mut m = DatasetManifest::new(
            "AGIQA-3k",
            AspectFlags::only(&[Quality, Correspondence, Authenticity]),
            range(),
            records(2982, &[Quality, Correspondence, Authenticity]),
        );
        m.generator_models = 6;
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
        m.aspects = AspectFlags::only(&[Quality, Correspondence]);
        m.records = records(2982, &[Quality, Correspondence]);
        m.validate().unwrap();
        m.records.pop();
        m.image_count -= 1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn known_dataset_values() {
        let by = |n: &str| KnownDataset::lookup(n).unwrap();
        assert_eq!(by("agiqa3k").images, 2982);
        assert_eq!(by("AIGCIQA2023").images, 2400);
        assert_eq!(by("aigiqa-20K").images, 20000);
        assert_eq!(by("AIGIQA-20k").generator_models, 15);
        assert!(by("AIGCIQA2023").aspects.authenticity);
        assert!(!by("AGIQA-3k").aspects.authenticity);
        assert!(!by("AIGIQA-20k").aspects.correspondence);
    }

    #[test]
    fn undeclared_or_missing_aspects_rejected() {
        let mut m = DatasetManifest::new("x", AspectFlags::only(&[Aspect::Quality]), range(), records(2, &[]));
        assert!(m.validate().is_err());
        m.records = records(2, &[Aspect::Quality, Aspect::Authenticity]);
        assert!(m.validate().is_err());
        m.records = records(2, &[Aspect::Quality]);
        m.records[1].mos.quality = Some(7.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn fixture_keys_round_trip() {
        let k = FixtureKey::new(Aspect::Quality, Composition::WithDesc, FeatureSource::Logits);
        assert_eq!(k.to_string(), "quality.with_desc.logits");
        assert_eq!(k.to_string().parse::<FixtureKey>().unwrap(), k);
        let h = FixtureKey::new(Aspect::Authenticity, Composition::FullConv, FeatureSource::HiddenStates);
        assert_eq!(h.to_string().parse::<FixtureKey>().unwrap(), h);
        assert!("quality.logits".parse::<FixtureKey>().is_err());
    }

    #[test]
    fn json_round_trip_and_missing_fixtures() {
        let dir = tempfile::tempdir().unwrap();
        let mut recs = records(3, &[Aspect::Quality]);
        let key = FixtureKey::new(Aspect::Quality, Composition::WithDesc, FeatureSource::Logits);
        for r in &mut recs {
            r.fixtures.insert(key.to_string(), PathBuf::from(format!("{}.m3lg", r.id)));
        }
        let m = DatasetManifest::new("syn", AspectFlags::only(&[Aspect::Quality]), range(), recs);
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = load_manifest(&path).unwrap();
        assert_eq!(back.records, m.records);
        assert_eq!(back.base_dir, dir.path());

        std::fs::write(dir.path().join("r1.m3lg"), b"").unwrap();
        let ids: Vec<String> = (0..3).map(|i| format!("r{i}")).collect();
        assert_eq!(back.missing_fixtures(&ids, key), vec!["r0", "r2"]);
        match back.require_fixtures(&ids, key) {
            Err(Error::MissingFixtures { count: 2, first }) => assert_eq!(first, vec!["r0", "r2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_violations() {
        let dir = Path::new(".");
        assert!(parse_manifest("{}", dir).is_err());
        let bad_version = r#"{"schema_version": 9, "name": "x", "image_count": 0,
            "aspects": {"quality": true, "correspondence": false, "authenticity": false},
            "range": {"min": 0, "max": 5}, "records": []}"#;
        assert!(parse_manifest(bad_version, dir).unwrap_err().to_string().contains("schema version 9"));
    }
}
