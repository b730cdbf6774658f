//! Synthetic logit sequences with a known quality signal.
//!
//! Each row is `prior(v) + pattern(t, v) + s·g(v) + shift·u(v) + ε(t, v)`: a
//! per-vocabulary prior and a position pattern shared by every sample, the
//! latent score `s` along a fixed unit direction `g`, an optional domain offset
//! along a unit direction `u ⟂ g`, and Gaussian noise whose scale is the score
//! spread divided by the signal-to-noise ratio.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AspectFlags, Composition, DatasetManifest, FixtureKey, ManifestRecord};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::{stream, Matrix, Stream};
use crate::predictor::FeatureSource;
use crate::protocol::{Aspect, AspectScores, MosRange};

const PRIOR_BOUND: f64 = 2.0;
const PATTERN_BOUND: f64 = 1.0;
/// Signal gain of the shorter, description-free variant.
const NO_DESC_GAIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub count: usize,
    pub len: usize,
    pub width: usize,
    /// Ratio of the latent-score standard deviation to the noise standard
    /// deviation. `inf` disables noise.
    pub snr: f64,
    pub range: MosRange,
    /// Per-sample draws (scores, noise).
    pub seed: u64,
    /// Shared structure (prior, pattern, signal direction). Two datasets with
    /// the same pattern seed measure the same underlying quality.
    pub pattern_seed: u64,
    pub shift: Option<DomainShift>,
    pub aspect: Aspect,
    pub compositions: Vec<Composition>,
    pub hidden_states: bool,
    pub id_prefix: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            count: 400,
            len: 32,
            width: 64,
            snr: 5.0,
            range: MosRange { min: 0.0, max: 5.0 },
            seed: 0,
            pattern_seed: 0,
            shift: None,
            aspect: Aspect::Quality,
            compositions: vec![Composition::WithDesc],
            hidden_states: false,
            id_prefix: "syn".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.len == 0 || self.width == 0 {
            return Err(Error::InvalidConfig(format!(
                "synthetic sequences need L ≥ 1 and D ≥ 1 (got {}×{})",
                self.len, self.width
            )));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::InvalidConfig(format!("SNR must be > 0, got {}", self.snr)));
        }
        if self.compositions.is_empty() {
            return Err(Error::InvalidConfig("no compositions requested".into()));
        }
        if let Some(s) = self.shift {
            if !s.magnitude.is_finite() {
                return Err(Error::NonFinite(format!("shift magnitude {}", s.magnitude)));
            }
            if self.width < 2 {
                return Err(Error::InvalidConfig("a domain shift needs D ≥ 2".into()));
            }
        }
        MosRange::new(self.range.min, self.range.max)?;
        Ok(())
    }

    pub fn noise_std(&self) -> f64 {
        self.range.width() / (12f64.sqrt() * self.snr)
    }

    pub fn hidden_width(&self) -> usize {
        (self.width / 2).max(1)
    }

    pub fn sample_id(&self, i: usize) -> String {
        format!("{}{:05}", self.id_prefix, i)
    }
}

/// The fixed, sample-independent structure of a synthetic domain.
#[derive(Debug, Clone)]
pub struct SynthDomain {
    pub prior: Vec<f64>,
    /// Unit-norm quality direction.
    pub signal: Vec<f64>,
    /// Unit-norm offset direction orthogonal to `signal`, scaled by the shift.
    pub offset: Vec<f64>,
    pattern_seed: u64,
    hidden_proj: Option<Matrix<f64>>,
}

fn unit_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

impl SynthDomain {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.width;
        let ps = spec.pattern_seed;
        let mut rng = stream(ps, Stream::SynthPattern(0));
        let prior = (0..d).map(|_| rng.random_range(-PRIOR_BOUND..=PRIOR_BOUND)).collect();
        let signal = unit_gaussian(&mut stream(ps, Stream::SynthPattern(1)), d);
        let offset = match spec.shift {
            Some(shift) => {
                let mut rng = stream(shift.seed, Stream::SynthPattern(2));
                loop {
                    let mut u = unit_gaussian(&mut rng, d);
                    let along: f64 = u.iter().zip(&signal).map(|(a, b)| a * b).sum();
                    u.iter_mut().zip(&signal).for_each(|(a, b)| *a -= along * b);
                    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-6 {
                        break u.into_iter().map(|x| shift.magnitude * x / norm).collect();
                    }
                }
            }
            None => vec![0.0; d],
        };
        let hidden_proj = if spec.hidden_states {
            let h = spec.hidden_width();
            let mut rng = stream(ps, Stream::SynthPattern(4));
            let scale = 1.0 / (d as f64).sqrt();
            let data = (0..d * h).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            Some(Matrix::from_vec(d, h, data)?)
        } else {
            None
        };
        Ok(Self {
            prior,
            signal,
            offset,
            pattern_seed: ps,
            hidden_proj,
        })
    }

    /// Position-specific term for row `t`, independent of the sequence length.
    fn pattern_row(&self, t: usize) -> Vec<f64> {
        let mut rng = stream(self.pattern_seed, Stream::SynthPattern(1000 + t as u32));
        (0..self.prior.len())
            .map(|_| rng.random_range(-PATTERN_BOUND..=PATTERN_BOUND))
            .collect()
    }

    fn row(&self, t: usize, score: f64, noise: &mut impl FnMut() -> f64) -> Vec<f64> {
        self.pattern_row(t)
            .into_iter()
            .zip(&self.prior)
            .zip(&self.signal)
            .zip(&self.offset)
            .map(|(((p, b), g), u)| b + p + score * g + u + noise())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub id: String,
    pub score: f64,
    pub fixtures: BTreeMap<FixtureKey, Matrix<f32>>,
}

fn sample(spec: &SynthSpec, domain: &SynthDomain, i: usize) -> Result<SynthSample> {
    let mut rng = stream(spec.seed, Stream::SynthSample(i as u64));
    let score = rng.random_range(spec.range.min..=spec.range.max);
    let sigma = spec.noise_std();
    let normal = Normal::new(0.0, if sigma.is_finite() { sigma } else { 0.0 })
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut noise = || if sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };

    let with_desc: Vec<Vec<f64>> = (0..spec.len).map(|t| domain.row(t, score, &mut noise)).collect();
    let mut fixtures = BTreeMap::new();
    for &comp in &spec.compositions {
        let rows = match comp {
            Composition::WithDesc => with_desc.clone(),
            Composition::NoDesc => {
                let short = (spec.len / 2).max(1);
                (0..short)
                    .map(|t| domain.row(t, NO_DESC_GAIN * score, &mut noise))
                    .collect()
            }
            Composition::FullConv => {
                // the answer token carries the midpoint of a noisily judged label
                let judged = (score + noise()).clamp(spec.range.min, spec.range.max);
                let answer = spec.range.label_clamped(judged).midpoint(spec.range);
                let mut rows = with_desc.clone();
                rows.push(domain.row(spec.len, answer, &mut noise));
                rows
            }
        };
        let logits = Matrix::from_rows(&rows)?;
        if let Some(p) = &domain.hidden_proj {
            let key = FixtureKey::new(spec.aspect, comp, FeatureSource::HiddenStates);
            fixtures.insert(key, logits.matmul(p)?.cast());
        }
        let key = FixtureKey::new(spec.aspect, comp, FeatureSource::Logits);
        fixtures.insert(key, logits.cast());
    }
    Ok(SynthSample {
        id: spec.sample_id(i),
        score,
        fixtures,
    })
}

/// Generates every sample in memory. Each sample draws from its own stream,
/// so the output does not depend on the execution mode.
pub fn synth_samples(spec: &SynthSpec, exec: Exec) -> Result<Vec<SynthSample>> {
    let domain = SynthDomain::new(spec)?;
    exec.map_range(spec.count, |i| sample(spec, &domain, i))
        .into_iter()
        .collect()
}

/// Writes fixtures under `dir/fixtures/` and `dir/manifest.json`.
pub fn synth_generate(spec: &SynthSpec, dir: &Path, exec: Exec) -> Result<DatasetManifest> {
    let samples = synth_samples(spec, exec)?;
    let written: Vec<Result<ManifestRecord>> = exec.map(&samples, |s| {
        let mut fixtures = BTreeMap::new();
        for (key, m) in &s.fixtures {
            let rel = Path::new("fixtures").join(format!("{}.{key}.m3lg", s.id));
            super::write_fixture(&dir.join(&rel), m)?;
            fixtures.insert(key.to_string(), rel);
        }
        let mut mos = AspectScores::default();
        mos.set(spec.aspect, Some(s.score));
        Ok(ManifestRecord {
            id: s.id.clone(),
            prompt: format!("synthetic sample {}", s.id),
            mos,
            fixtures,
        })
    });
    let records = written.into_iter().collect::<Result<Vec<_>>>()?;
    let mut manifest = DatasetManifest::new("synthetic", AspectFlags::only(&[spec.aspect]), spec.range, records);
    manifest.base_dir = dir.to_path_buf();
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::srcc;

    fn key(comp: Composition) -> FixtureKey {
        FixtureKey::new(Aspect::Quality, comp, FeatureSource::Logits)
    }

    fn mean_pool(m: &Matrix<f32>) -> Vec<f64> {
        let mut acc = vec![0.0; m.cols()];
        for r in 0..m.rows() {
            for (a, &v) in acc.iter_mut().zip(m.row(r)) {
                *a += v as f64;
            }
        }
        acc.iter().map(|a| a / m.rows() as f64).collect()
    }

    /// Least squares with intercept via Cholesky on the normal equations.
    fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len() + 1;
        let mut a = vec![vec![0.0; p]; p];
        let mut b = vec![0.0; p];
        for (row, &t) in x.iter().zip(y) {
            let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
            for i in 0..p {
                b[i] += z[i] * t;
                for j in 0..p {
                    a[i][j] += z[i] * z[j];
                }
            }
        }
        let mut l = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..=i {
                let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
            }
        }
        let mut w = vec![0.0; p];
        for i in 0..p {
            w[i] = (b[i] - (0..i).map(|k| l[i][k] * w[k]).sum::<f64>()) / l[i][i];
        }
        let mut beta = vec![0.0; p];
        for i in (0..p).rev() {
            beta[i] = (w[i] - (i + 1..p).map(|k| l[k][i] * beta[k]).sum::<f64>()) / l[i][i];
        }
        beta
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let spec = SynthSpec { count: 12, len: 5, width: 7, ..SynthSpec::default() };
        let a = synth_samples(&spec, Exec::Sequential).unwrap();
        let b = synth_samples(&spec, Exec::Parallel).unwrap();
        assert_eq!(a, b);

        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = synth_generate(&spec, d1.path(), Exec::Parallel).unwrap();
        synth_generate(&spec, d2.path(), Exec::Sequential).unwrap();
        for r in &m1.records {
            for rel in r.fixtures.values() {
                assert_eq!(std::fs::read(d1.path().join(rel)).unwrap(), std::fs::read(d2.path().join(rel)).unwrap());
            }
        }
        let back = super::super::load_manifest(&d1.path().join("manifest.json")).unwrap();
        assert_eq!(back.records.len(), 12);
    }

    #[test]
    fn noiseless_projection_is_affine_and_monotone() {
        let spec = SynthSpec { count: 40, len: 6, width: 16, snr: f64::INFINITY, ..SynthSpec::default() };
        let domain = SynthDomain::new(&spec).unwrap();
        let samples = synth_samples(&spec, Exec::Parallel).unwrap();
        let proj: Vec<(f64, f64)> = samples
            .iter()
            .map(|s| {
                let pooled = mean_pool(&s.fixtures[&key(Composition::WithDesc)]);
                (s.score, pooled.iter().zip(&domain.signal).map(|(a, b)| a * b).sum())
            })
            .collect();
        // projection = c + s exactly, up to f32 storage
        let c = proj[0].1 - proj[0].0;
        for &(s, p) in &proj {
            assert!((p - (c + s)).abs() < 1e-5, "{p} vs {}", c + s);
        }
        let mut sorted = proj.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(sorted.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn least_squares_oracle_learns_the_task() {
        let spec = SynthSpec { count: 500, ..SynthSpec::default() };
        let samples = synth_samples(&spec, Exec::Parallel).unwrap();
        let feats: Vec<Vec<f64>> = samples.iter().map(|s| mean_pool(&s.fixtures[&key(Composition::WithDesc)])).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.score).collect();
        let beta = ols_fit(&feats[..400], &y[..400]);
        let pred: Vec<f64> = feats[400..]
            .iter()
            .map(|f| beta[0] + f.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let rho = srcc(&pred, &y[400..]).unwrap();
        assert!(rho >= 0.95, "held-out SRCC {rho}");
    }

    #[test]
    fn scores_are_uniform() {
        let spec = SynthSpec { count: 1000, len: 1, width: 1, seed: 42, ..SynthSpec::default() };
        let mut s: Vec<f64> = synth_samples(&spec, Exec::Parallel).unwrap().iter().map(|x| x.score).collect();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = v / 5.0;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // 5% critical value of the one-sample KS statistic at n = 1000
        assert!(ks < 1.36 / n.sqrt(), "KS {ks}");
    }

    #[test]
    fn shift_is_orthogonal_with_requested_norm() {
        let spec = SynthSpec {
            width: 32,
            shift: Some(DomainShift { magnitude: 3.0, seed: 5 }),
            ..SynthSpec::default()
        };
        let d = SynthDomain::new(&spec).unwrap();
        let dot: f64 = d.offset.iter().zip(&d.signal).map(|(a, b)| a * b).sum();
        let norm: f64 = d.offset.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(dot.abs() < 1e-12);
        assert!((norm - 3.0).abs() < 1e-12);
    }

    #[test]
    fn variants_have_expected_shapes() {
        let spec = SynthSpec {
            count: 3,
            len: 8,
            width: 10,
            compositions: Composition::ALL.to_vec(),
            hidden_states: true,
            ..SynthSpec::default()
        };
        let s = &synth_samples(&spec, Exec::Parallel).unwrap()[0];
        assert_eq!(s.fixtures.len(), 6);
        assert_eq!(s.fixtures[&key(Composition::WithDesc)].shape(), (8, 10));
        assert_eq!(s.fixtures[&key(Composition::NoDesc)].shape(), (4, 10));
        assert_eq!(s.fixtures[&key(Composition::FullConv)].shape(), (9, 10));
        let h = FixtureKey::new(Aspect::Quality, Composition::WithDesc, FeatureSource::HiddenStates);
        assert_eq!(s.fixtures[&h].shape(), (8, 5));
        // full_conv extends the with_desc sequence by one row
        let full = &s.fixtures[&key(Composition::FullConv)];
        let with = &s.fixtures[&key(Composition::WithDesc)];
        assert_eq!(&full.as_slice()[..with.len()], with.as_slice());
    }

    #[test]
    fn invalid_specs() {
        assert!(SynthSpec { snr: 0.0, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec { len: 0, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec { compositions: vec![], ..SynthSpec::default() }.validate().is_err());
    }
}
