use serde::{Deserialize, Serialize};

use super::{mos_to_label, Aspect, MosLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosRange {
    pub min: f64,
    pub max: f64,
}

impl MosRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidConfig(format!("MOS range [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn width(self) -> f64 {
        self.max - self.min
    }

    pub fn contains(self, y: f64) -> bool {
        y >= self.min && y <= self.max
    }

    /// Label of an unconstrained prediction, clamped into the range first.
    pub fn label_clamped(self, y: f64) -> MosLabel {
        let y = if y.is_nan() { self.min } else { y.clamp(self.min, self.max) };
        mos_to_label(y, self).expect("clamped value lies in range")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AspectScores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correspondence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authenticity: Option<f64>,
}

impl AspectScores {
    pub fn get(&self, aspect: Aspect) -> Option<f64> {
        match aspect {
            Aspect::Quality => self.quality,
            Aspect::Correspondence => self.correspondence,
            Aspect::Authenticity => self.authenticity,
        }
    }

    pub fn set(&mut self, aspect: Aspect, value: Option<f64>) {
        match aspect {
            Aspect::Quality => self.quality = value,
            Aspect::Correspondence => self.correspondence = value,
            Aspect::Authenticity => self.authenticity = value,
        }
    }
}

/// One generated image: its text prompt and per-aspect opinion scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRecord {
    pub id: String,
    pub prompt: String,
    pub mos: AspectScores,
    pub range: MosRange,
}

impl MosRecord {
    pub fn validate(&self) -> Result<()> {
        MosRange::new(self.range.min, self.range.max)?;
        for aspect in Aspect::ALL {
            if let Some(y) = self.mos.get(aspect) {
                if !self.range.contains(y) {
                    return Err(Error::MosOutOfRange {
                        value: y,
                        min: self.range.min,
                        max: self.range.max,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn score(&self, aspect: Aspect) -> Result<f64> {
        self.mos.get(aspect).ok_or(Error::MissingAspectMos(aspect))
    }
}
