use std::fmt;

use serde::{Deserialize, Serialize};

use super::MosRange;
use crate::error::{Error, Result};

const WORDS: [&str; 5] = ["bad", "poor", "fair", "good", "excellent"];

/// Five-level Likert label, index 0 (bad) to 4 (excellent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct MosLabel(u8);

impl MosLabel {
    pub const ALL: [MosLabel; 5] = [MosLabel(0), MosLabel(1), MosLabel(2), MosLabel(3), MosLabel(4)];

    pub fn new(index: usize) -> Result<Self> {
        if index < 5 {
            Ok(MosLabel(index as u8))
        } else {
            Err(Error::LabelOutOfRange(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn word(self) -> &'static str {
        WORDS[self.0 as usize]
    }

    /// Centre of this label's bucket within `range`.
    pub fn midpoint(self, range: MosRange) -> f64 {
        range.min + (self.0 as f64 + 0.5) * range.width() / 5.0
    }
}

impl TryFrom<u8> for MosLabel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        MosLabel::new(v as usize)
    }
}

impl From<MosLabel> for u8 {
    fn from(l: MosLabel) -> u8 {
        l.0
    }
}

impl fmt::Display for MosLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// Splits `range` into five equal buckets, each closed on the left and open on
/// the right, except the top bucket which also includes `range.max`.
pub fn mos_to_label(y: f64, range: MosRange) -> Result<MosLabel> {
    if !y.is_finite() || y < range.min || y > range.max {
        return Err(Error::MosOutOfRange {
            value: y,
            min: range.min,
            max: range.max,
        });
    }
    let position = 5.0 * (y - range.min) / range.width();
    Ok(MosLabel((position.floor() as u8).min(4)))
}

/// Case-insensitive exact match against the lexicon after trimming.
pub fn parse_label_word(text: &str) -> Result<MosLabel> {
    let t = text.trim().to_ascii_lowercase();
    WORDS
        .iter()
        .position(|w| *w == t)
        .map(|i| MosLabel(i as u8))
        .ok_or_else(|| Error::LabelParse(text.to_string()))
}
